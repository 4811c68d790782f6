#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "latwave/model.hpp"
#include "latwave/profile.hpp"

namespace latwave {

struct PhaseCondition {
  enum class Kind { value, integral };
  Kind kind = Kind::value;
  int comp = 0;
  // value: pins phi_comp(0) = target; NaN means (alpha+omega)/2 of the seed.
  double target = std::numeric_limits<double>::quiet_NaN();
};

struct SolveOptions {
  double newton_tol = 1e-12;
  int max_iter = 60;
  double c_min = 1e-3;     // below this the outcome is reported as pinned
  double tail_tol = 1e-4;  // required closeness of phi(+-Xi) to the limits
};

enum class SolveStatus { converged, pinned, diverged, singular };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::pinned: return "pinned";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::singular: return "singular";
  }
  return "?";
}

struct SolveResult {
  SolveStatus status = SolveStatus::diverged;
  WaveProfile profile;  // meaningful when converged
  double c = 0.0;       // last speed iterate (diagnostic for pinning)
  std::vector<double> residual_history;
  std::string message;
};

namespace detail {
inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}
}  // namespace detail

/// Residual of the traveling-wave collocation system at every grid point:
///   r(xi) = -c phi'(xi) - (L phi)(xi) - g(N phi(xi)),
/// phi' by 4th-order centered differences, evaluations beyond the grid
/// clamped to the limits.
inline Mat collocation_residual(const ModelSpec& model, const Mat& phi, double c, int m,
                                const Vec& alpha, const Vec& omega) {
  const int N = static_cast<int>(phi.rows());
  const int n = model.n;
  if (phi.cols() != n) throw std::invalid_argument("collocation_residual: component mismatch");
  const double dxi = 1.0 / m;

  auto value = [&](int q, int k) -> double {
    if (q < 0) return alpha[k];
    if (q >= N) return omega[k];
    return phi(q, k);
  };

  Mat r = Mat::Zero(N, n);
  Vec stacked(n * model.J());
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < n; ++k) {
      const double d = (value(i - 2, k) - 8.0 * value(i - 1, k) + 8.0 * value(i + 1, k) -
                        value(i + 2, k)) /
                       (12.0 * dxi);
      r(i, k) = -c * d;
    }
    for (const auto& e : model.L) {
      const int q = i + e.offset * m;
      for (int row = 0; row < n; ++row) {
        double acc = 0.0;
        for (int col = 0; col < n; ++col) acc += e.A(row, col) * value(q, col);
        r(i, row) -= acc;
      }
    }
    for (int f = 0; f < model.J(); ++f) {
      for (int k = 0; k < n; ++k) stacked[f * n + k] = 0.0;
      for (const auto& e : model.functionals[f]) {
        const int q = i + e.offset * m;
        for (int row = 0; row < n; ++row) {
          double acc = 0.0;
          for (int col = 0; col < n; ++col) acc += e.A(row, col) * value(q, col);
          stacked[f * n + row] += acc;
        }
      }
    }
    Vec gv = model.g.eval(stacked);
    for (int k = 0; k < n; ++k) r(i, k) -= gv[k];
  }
  return r;
}

inline Mat profile_residual(const ModelSpec& model, const WaveProfile& p) {
  return collocation_residual(model, p.phi, p.c, p.m, p.alpha, p.omega);
}

/// Componentwise tanh blend from alpha to omega, used to seed Newton.
inline WaveProfile make_seed_front(const ModelSpec& model, const Vec& alpha, const Vec& omega,
                                   double width, double c0, double xi, int m) {
  WaveProfile p;
  p.model = model;
  p.xi_min = -xi;
  p.m = m;
  const int N = static_cast<int>(std::lround(2.0 * xi * m)) + 1;
  p.phi.resize(N, model.n);
  for (int i = 0; i < N; ++i) {
    const double s = 0.5 * (1.0 + std::tanh((p.xi_min + i * p.dxi()) / width));
    for (int k = 0; k < model.n; ++k) p.phi(i, k) = alpha[k] + (omega[k] - alpha[k]) * s;
  }
  p.c = c0;
  p.alpha = alpha;
  p.omega = omega;
  p.refresh_derivative();
  return p;
}

/// Seeds a profile from a lattice snapshot (site values interpolated onto the
/// fine grid), centered so that the phase-condition point sits at xi = 0.
inline WaveProfile make_seed_from_state(const ModelSpec& model, const LatticeState& x,
                                        double center_site, double c0, double xi, int m) {
  WaveProfile p;
  p.model = model;
  p.xi_min = -xi;
  p.m = m;
  const int N = static_cast<int>(std::lround(2.0 * xi * m)) + 1;
  p.phi.resize(N, model.n);
  for (int i = 0; i < N; ++i) {
    const double site = center_site + p.xi_min + i * p.dxi();
    const int base = static_cast<int>(std::floor(site)) - 1;
    const double u = site - base;
    const double w0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    const double w1 = u * (u - 2.0) * (u - 3.0) / 2.0;
    const double w2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
    const double w3 = u * (u - 1.0) * (u - 2.0) / 6.0;
    for (int k = 0; k < model.n; ++k)
      p.phi(i, k) = w0 * x.site_comp(base, k) + w1 * x.site_comp(base + 1, k) +
                    w2 * x.site_comp(base + 2, k) + w3 * x.site_comp(base + 3, k);
  }
  p.c = c0;
  p.alpha = x.tail_left();
  p.omega = x.tail_right();
  p.refresh_derivative();
  return p;
}

namespace detail {

struct PhaseRow {
  std::vector<std::pair<int, double>> entries;  // (flat column, weight)
  double evaluate(const Mat& phi, double offset) const {
    double v = offset;
    const int n = static_cast<int>(phi.cols());
    for (const auto& [col, w] : entries) v += w * phi(col / n, col % n);
    return v;
  }
};

}  // namespace detail

/// Newton iteration on the collocation unknowns (phi grid values, c) plus a
/// phase condition fixing the translation gauge.  Pinning (|c| below c_min)
/// is a typed outcome, not a failure: propagation failure is genuine lattice
/// phenomenology.
inline SolveResult solve_profile(const ModelSpec& model, const WaveProfile& seed,
                                 PhaseCondition pc = {}, const SolveOptions& opt = {}) {
  SolveResult res;
  const int N = seed.points();
  const int n = model.n;
  const int m = seed.m;
  const double dxi = seed.dxi();
  const int dim = N * n + 1;
  const Vec alpha = seed.alpha, omega = seed.omega;

  Mat phi = seed.phi;
  double c = seed.c;

  // Phase condition.
  double target = pc.target;
  if (!std::isfinite(target)) target = 0.5 * (alpha[pc.comp] + omega[pc.comp]);
  const int i_zero = static_cast<int>(std::lround(-seed.xi_min * m));
  if (i_zero < 0 || i_zero >= N)
    throw std::invalid_argument("solve_profile: xi = 0 is not on the grid");
  detail::PhaseRow phase;
  double phase_offset = 0.0;
  if (pc.kind == PhaseCondition::Kind::value) {
    phase.entries = {{i_zero * n + pc.comp, 1.0}};
    phase_offset = -target;
  } else {
    // integral condition <phi'_seed, phi - phi_seed> = 0
    double acc = 0.0;
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < n; ++k) {
        const double w = seed.dphi(i, k) * dxi;
        if (w != 0.0) phase.entries.push_back({i * n + k, w});
        acc += w * seed.phi(i, k);
      }
    phase_offset = -acc;
  }

  auto residual_vec = [&](const Mat& ph, double cc) {
    Mat r = collocation_residual(model, ph, cc, m, alpha, omega);
    Vec out(dim);
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < n; ++k) out[i * n + k] = r(i, k);
    out[dim - 1] = phase.evaluate(ph, phase_offset);
    return out;
  };

  Vec r = residual_vec(phi, c);
  double rnorm = r.cwiseAbs().maxCoeff();
  res.residual_history.push_back(rnorm);
  double best_rnorm = rnorm;
  int since_best = 0;

  Eigen::SparseMatrix<double> Jac(dim, dim);
  std::vector<Eigen::Triplet<double>> trip;
  Vec stacked(n * model.J());

  auto value = [&](const Mat& ph, int q, int k) -> double {
    if (q < 0) return alpha[k];
    if (q >= N) return omega[k];
    return ph(q, k);
  };

  for (int iter = 0; iter < opt.max_iter && rnorm > opt.newton_tol; ++iter) {
    trip.clear();
    // derivative stencil weights for the -c phi' term
    const int ds[4] = {-2, -1, 1, 2};
    const double dw[4] = {1.0, -8.0, 8.0, -1.0};
    for (int i = 0; i < N; ++i) {
      for (int s = 0; s < 4; ++s) {
        const int q = i + ds[s];
        if (q < 0 || q >= N) continue;
        const double w = -c * dw[s] / (12.0 * dxi);
        for (int k = 0; k < n; ++k) trip.emplace_back(i * n + k, q * n + k, w);
      }
      for (const auto& e : model.L) {
        const int q = i + e.offset * m;
        if (q < 0 || q >= N) continue;
        for (int row = 0; row < n; ++row)
          for (int col = 0; col < n; ++col)
            trip.emplace_back(i * n + row, q * n + col, -e.A(row, col));
      }
      // nonlinearity: -Dg * (functional stencils)
      for (int f = 0; f < model.J(); ++f) {
        for (int k = 0; k < n; ++k) stacked[f * n + k] = 0.0;
        for (const auto& e : model.functionals[f]) {
          const int q = i + e.offset * m;
          for (int row = 0; row < n; ++row) {
            double acc = 0.0;
            for (int col = 0; col < n; ++col) acc += e.A(row, col) * value(phi, q, col);
            stacked[f * n + row] += acc;
          }
        }
      }
      Mat Dg = model.g.jacobian(stacked);
      for (int f = 0; f < model.J(); ++f) {
        for (const auto& e : model.functionals[f]) {
          const int q = i + e.offset * m;
          if (q < 0 || q >= N) continue;
          // block: -Dg[:, f-slice] * e.A
          for (int row = 0; row < n; ++row)
            for (int col = 0; col < n; ++col) {
              double acc = 0.0;
              for (int k = 0; k < n; ++k) acc += Dg(row, f * n + k) * e.A(k, col);
              if (acc != 0.0) trip.emplace_back(i * n + row, q * n + col, -acc);
            }
        }
      }
      // d/dc column: -phi'(xi_i)
      for (int k = 0; k < n; ++k) {
        const double d = (value(phi, i - 2, k) - 8.0 * value(phi, i - 1, k) +
                          8.0 * value(phi, i + 1, k) - value(phi, i + 2, k)) /
                         (12.0 * dxi);
        trip.emplace_back(i * n + k, dim - 1, -d);
      }
    }
    for (const auto& [col, w] : phase.entries) trip.emplace_back(dim - 1, col, w);

    Jac.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(Jac);
    if (lu.info() != Eigen::Success) {
      res.status = std::abs(c) < opt.c_min ? SolveStatus::pinned : SolveStatus::singular;
      res.c = c;
      res.message = "Jacobian factorization failed (near-singular collocation system)";
      return res;
    }
    Vec dz = lu.solve(-r);
    if (!dz.allFinite()) {
      res.status = SolveStatus::singular;
      res.c = c;
      res.message = "Jacobian solve produced non-finite correction";
      return res;
    }

    // Damped step with a non-monotone acceptance rule: transient sup-residual
    // growth is normal when the correction contains a finite translation
    // component, so progress is judged against the best iterate seen.
    double step = 1.0;
    Mat phi_new = phi;
    double c_new = c, rnorm_new = rnorm;
    Vec r_new = r;
    for (int bt = 0; bt < 12; ++bt) {
      phi_new = phi;
      for (int i = 0; i < N; ++i)
        for (int k = 0; k < n; ++k) phi_new(i, k) += step * dz[i * n + k];
      c_new = c + step * dz[dim - 1];
      r_new = residual_vec(phi_new, c_new);
      rnorm_new = r_new.cwiseAbs().maxCoeff();
      if (std::isfinite(rnorm_new) &&
          (rnorm_new < rnorm || rnorm_new < 10.0 * best_rnorm || rnorm < opt.newton_tol * 10))
        break;
      step *= 0.5;
    }
    if (!std::isfinite(rnorm_new)) {
      res.status = SolveStatus::diverged;
      res.c = c;
      res.message = "Newton step produced non-finite residual";
      return res;
    }
    phi = phi_new;
    c = c_new;
    r = r_new;
    rnorm = rnorm_new;
    res.residual_history.push_back(rnorm);
    if (rnorm < best_rnorm * 0.9) {
      best_rnorm = rnorm;
      since_best = 0;
    } else if (++since_best > 6) {
      res.status = std::abs(c) < opt.c_min ? SolveStatus::pinned : SolveStatus::diverged;
      res.c = c;
      res.message = "Newton stalled at residual " + detail::sci(rnorm);
      return res;
    }
  }

  res.c = c;
  if (!(rnorm <= opt.newton_tol)) {
    // Near pinning the collocation system degenerates (the grid points
    // decouple as c -> 0) and Newton grinds without reaching full tolerance.
    if (std::abs(c) < opt.c_min && rnorm < 1e-6) {
      res.status = SolveStatus::pinned;
      res.message = "stalled at |c| = " + detail::sci(std::abs(c)) +
                    " below c_min (residual " + detail::sci(rnorm) + ")";
      return res;
    }
    res.status = SolveStatus::diverged;
    res.message = "no convergence in " + std::to_string(opt.max_iter) + " iterations";
    return res;
  }
  if (std::abs(c) < opt.c_min) {
    res.status = SolveStatus::pinned;
    res.message = "converged to |c| = " + detail::sci(std::abs(c)) + " below c_min";
    return res;
  }

  // tail containment
  double tail_err = 0.0;
  for (int k = 0; k < n; ++k) {
    tail_err = std::max(tail_err, std::abs(phi(0, k) - alpha[k]));
    tail_err = std::max(tail_err, std::abs(phi(N - 1, k) - omega[k]));
  }
  if (tail_err > opt.tail_tol) {
    res.status = SolveStatus::diverged;
    res.message = "profile does not settle to the limits (tail error " +
                  detail::sci(tail_err) + "); enlarge the domain";
    return res;
  }

  res.status = SolveStatus::converged;
  res.profile = seed;
  res.profile.model = model;
  res.profile.phi = phi;
  res.profile.c = c;
  res.profile.alpha = alpha;
  res.profile.omega = omega;
  res.profile.residual_sup = rnorm;
  res.profile.refresh_derivative();
  res.message = "converged in " + std::to_string(res.residual_history.size() - 1) + " iterations";
  return res;
}

/// (c, phi(xi)) -> (-c, phi(-xi)): valid for reflection-symmetric stencils,
/// re-verified at the data level.
inline WaveProfile reflect(const WaveProfile& p) {
  WaveProfile q = p;
  const int N = p.points();
  for (int i = 0; i < N; ++i) {
    q.phi.row(i) = p.phi.row(N - 1 - i);
    q.dphi.row(i) = -p.dphi.row(N - 1 - i);
  }
  q.c = -p.c;
  q.xi_min = -p.xi_max();
  q.alpha = p.omega;
  q.omega = p.alpha;
  q.decay_left = p.decay_right;
  q.decay_right = p.decay_left;
  const double rq = profile_residual(q.model, q).cwiseAbs().maxCoeff();
  if (rq > std::max(2.0 * p.residual_sup, 1e-9))
    throw std::runtime_error("reflect: residual re-verification failed (stencil not symmetric?)");
  q.residual_sup = rq;
  return q;
}

struct DecayFit {
  bool ok = false;
  double b_left = 0.0, b_right = 0.0;  // fitted rates (min over phi and phi')
  double rms_left = 0.0, rms_right = 0.0;
  std::string message;
};

namespace detail {

struct TailFit {
  bool ok = false;
  double rate = 0.0;
  double rms = 0.0;
  std::string why;
};

// Least-squares fit of log|v| against xi over the outer third of one tail,
// excluding the last 15% of the domain where the clamped boundary distorts
// the free decay.  side = -1: left tail (slope +rate); side = +1: right tail.
inline TailFit fit_tail(const WaveProfile& p, const Mat& data, const Vec& limit, int side) {
  TailFit out;
  const int N = p.points();
  std::vector<std::pair<double, double>> pts;  // (xi, log|v|)
  const double span = p.xi_max() - p.xi_min;
  const double scale = std::max(1.0, (p.alpha - p.omega).cwiseAbs().maxCoeff());
  // Position fractions across the full domain: between 15% and 45% of the
  // half-domain measured from the edge, widened toward the center if needed.
  for (double widen = 0.0; widen <= 0.21 && pts.size() < 8; widen += 0.1) {
    pts.clear();
    const double lo_f = side < 0 ? 0.075 : 0.775 - widen;
    const double hi_f = side < 0 ? 0.225 + widen : 0.925;
    for (int i = 0; i < N; ++i) {
      const double xi = p.xi(i);
      const double s = (xi - p.xi_min) / span;
      if (s < lo_f || s > hi_f) continue;
      double v = 0.0;
      for (int k = 0; k < p.comps(); ++k) v = std::max(v, std::abs(data(i, k) - limit[k]));
      if (v >= 1e-12 && v <= 0.05 * scale) pts.push_back({xi, std::log(v)});
    }
  }
  if (pts.size() < 8) {
    out.why = "too few usable tail points";
    return out;
  }
  auto slope_of = [](const std::vector<std::pair<double, double>>& q, size_t a, size_t b) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double len = static_cast<double>(b - a);
    for (size_t i = a; i < b; ++i) {
      sx += q[i].first;
      sy += q[i].second;
      sxx += q[i].first * q[i].first;
      sxy += q[i].first * q[i].second;
    }
    return (len * sxy - sx * sy) / (len * sxx - sx * sx);
  };
  const double slope = slope_of(pts, 0, pts.size());
  const double s1 = slope_of(pts, 0, pts.size() / 2);
  const double s2 = slope_of(pts, pts.size() / 2, pts.size());
  // rms of the fit residual in log space
  double sx = 0, sy = 0;
  for (auto& q : pts) {
    sx += q.first;
    sy += q.second;
  }
  const double mx = sx / pts.size(), my = sy / pts.size();
  double rr = 0;
  for (auto& q : pts) {
    const double e = q.second - (my + slope * (q.first - mx));
    rr += e * e;
  }
  out.rms = std::sqrt(rr / pts.size());
  out.rate = side < 0 ? slope : -slope;
  if (out.rate <= 0.0) {
    out.why = "tail does not decay";
    return out;
  }
  if (out.rms > 0.05) {
    out.why = "log-linear fit residual too large";
    return out;
  }
  if (std::abs(s1 / s2 - 1.0) > 0.1) {
    out.why = "decay rate drifts across the tail (non-exponential)";
    return out;
  }
  out.ok = true;
  return out;
}

}  // namespace detail

/// Fits exponential tail rates for phi and phi' on both sides; on success
/// stores the per-side rates on the profile and sets default_b to half the
/// smaller rate (margin for the weighted-space arguments downstream).
inline DecayFit certify_decay(WaveProfile& p) {
  DecayFit out;
  const Vec zero = Vec::Zero(p.comps());
  auto l_phi = detail::fit_tail(p, p.phi, p.alpha, -1);
  auto r_phi = detail::fit_tail(p, p.phi, p.omega, +1);
  auto l_dphi = detail::fit_tail(p, p.dphi, zero, -1);
  auto r_dphi = detail::fit_tail(p, p.dphi, zero, +1);
  if (!l_phi.ok || !r_phi.ok || !l_dphi.ok || !r_dphi.ok) {
    out.message = "tail certification failed:";
    for (auto* f : {&l_phi, &r_phi, &l_dphi, &r_dphi})
      if (!f->ok) out.message += " [" + f->why + "]";
    return out;
  }
  out.ok = true;
  out.b_left = std::min(l_phi.rate, l_dphi.rate);
  out.b_right = std::min(r_phi.rate, r_dphi.rate);
  out.rms_left = std::max(l_phi.rms, l_dphi.rms);
  out.rms_right = std::max(r_phi.rms, r_dphi.rms);
  p.decay_left = out.b_left;
  p.decay_right = out.b_right;
  p.default_b = 0.5 * std::min(out.b_left, out.b_right);
  return out;
}

}  // namespace latwave
