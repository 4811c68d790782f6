#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "latwave/heaviside.hpp"
#include "latwave/lattice_state.hpp"
#include "latwave/model.hpp"
#include "latwave/ode.hpp"
#include "latwave/profile.hpp"

namespace latwave {

struct IntegratorConfig {
  StepMethod method = StepMethod::adaptive;
  double dt = 1e-2;
  double rtol = 1e-9;
  double atol = 1e-11;
  double t0 = 0.0;
  double t1 = 1.0;
  double sample_every = 0.0;  // 0: endpoints only

  OdeOptions ode() const { return {method, dt, rtol, atol, 1.0}; }

  std::vector<double> sample_times() const {
    std::vector<double> s;
    if (sample_every > 0.0) {
      const int count = static_cast<int>(std::floor((t1 - t0) / sample_every + 1e-9));
      for (int i = 1; i <= count; ++i) {
        const double t = t0 + i * sample_every;
        if (t < t1 - 1e-12 * std::max(1.0, std::abs(t1))) s.push_back(t);
      }
    }
    s.push_back(t1);
    return s;
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<LatticeState> states;
  StepStats stats;
  std::vector<double> steps;  // accepted step endpoints, reusable for replay
};

struct PairTrajectory {
  std::vector<double> times;
  std::vector<std::pair<LatticeState, LatticeState>> states;
  StepStats stats;
  std::vector<double> steps;
};

namespace detail {

// Flattened stencil blocks for tight loops over raw arrays.
struct FlatStencil {
  int offset;
  std::vector<double> a;  // row-major n x n
};

inline std::vector<FlatStencil> flatten(const Stencil& s, int n) {
  std::vector<FlatStencil> out;
  out.reserve(s.size());
  for (const auto& e : s) {
    FlatStencil f{e.offset, std::vector<double>(static_cast<size_t>(n) * n)};
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) f.a[static_cast<size_t>(r) * n + c] = e.A(r, c);
    out.push_back(std::move(f));
  }
  return out;
}

inline void block_accumulate(const FlatStencil& s, const double* site, int n, double* out) {
  for (int r = 0; r < n; ++r) {
    double acc = 0.0;
    for (int c = 0; c < n; ++c) acc += s.a[static_cast<size_t>(r) * n + c] * site[c];
    out[r] += acc;
  }
}

}  // namespace detail

/// Right-hand side of the truncated lattice system on a fixed window.
/// Sites beyond the window hold the constant tail values throughout; the
/// state vector is the flat row of window values.  Instances keep scratch
/// buffers, so share one instance per integration, not across threads.
class WindowOde {
public:
  WindowOde(const ModelSpec& m, int lo, int hi, Vec tail_left, Vec tail_right)
      : model_(m), lo_(lo), hi_(hi), r_(m.radius()), n_(m.n),
        tail_left_(std::move(tail_left)), tail_right_(std::move(tail_right)),
        L_(detail::flatten(m.L, m.n)) {
    for (const auto& s : m.functionals) N_.push_back(detail::flatten(s, m.n));
    pad_.resize(static_cast<size_t>(width() + 2 * r_) * n_);
    stacked_.resize(static_cast<size_t>(n_) * N_.size());
    gout_.resize(n_);
  }

  int width() const { return hi_ - lo_ + 1; }
  int dim() const { return width() * n_; }
  int lo() const { return lo_; }
  int hi() const { return hi_; }
  int comps() const { return n_; }
  const ModelSpec& model() const { return model_; }
  const Vec& tail_left() const { return tail_left_; }
  const Vec& tail_right() const { return tail_right_; }

  /// Copies window values into the padded scratch (tails in the pad cells)
  /// and returns the pointer positioned at window site lo.
  const double* padded(const double* u) const {
    double* p = pad_.data();
    for (int j = 0; j < r_; ++j)
      for (int k = 0; k < n_; ++k) p[static_cast<size_t>(j) * n_ + k] = tail_left_[k];
    std::copy(u, u + static_cast<size_t>(width()) * n_, p + static_cast<size_t>(r_) * n_);
    double* right = p + static_cast<size_t>(r_ + width()) * n_;
    for (int j = 0; j < r_; ++j)
      for (int k = 0; k < n_; ++k) right[static_cast<size_t>(j) * n_ + k] = tail_right_[k];
    return p + static_cast<size_t>(r_) * n_;
  }

  /// Stacked functional values (N_1 .. N_J) at window-relative site j,
  /// reading from a padded view.
  void stack_functionals(const double* p, int j, double* stacked) const {
    for (size_t i = 0; i < N_.size(); ++i) {
      double* dst = stacked + i * n_;
      for (int k = 0; k < n_; ++k) dst[k] = 0.0;
      for (const auto& s : N_[i])
        detail::block_accumulate(s, p + static_cast<size_t>(j + s.offset) * n_, n_, dst);
    }
  }

  void operator()(double, const double* u, double* du) const {
    const double* p = padded(u);
    for (int j = 0; j < width(); ++j) {
      double* out = du + static_cast<size_t>(j) * n_;
      for (int k = 0; k < n_; ++k) out[k] = 0.0;
      for (const auto& s : L_)
        detail::block_accumulate(s, p + static_cast<size_t>(j + s.offset) * n_, n_, out);
      stack_functionals(p, j, stacked_.data());
      model_.g.f(stacked_.data(), gout_.data());
      for (int k = 0; k < n_; ++k) out[k] += gout_[k];
    }
  }

  LatticeState to_state(const std::vector<double>& u) const {
    LatticeState x(lo_, hi_, n_);
    x.raw() = u;
    x.set_tails(tail_left_, tail_right_);
    return x;
  }

  std::vector<double> from_state(const LatticeState& x) const {
    std::vector<double> u(static_cast<size_t>(dim()));
    for (int j = lo_; j <= hi_; ++j) {
      Vec v = x.site(j);
      for (int k = 0; k < n_; ++k) u[static_cast<size_t>(j - lo_) * n_ + k] = v[k];
    }
    return u;
  }

private:
  ModelSpec model_;
  int lo_, hi_, r_, n_;
  Vec tail_left_, tail_right_;
  std::vector<detail::FlatStencil> L_;
  std::vector<std::vector<detail::FlatStencil>> N_;
  mutable std::vector<double> pad_, stacked_, gout_;
};

/// Right-hand side of the embedded pair system on a shared fixed window.
/// State layout: [window of u-minus | window of u-plus].  The interaction
/// term is evaluated at the exact stage time and assigned to the component
/// selected by the mask side of each site.
class EmbeddedOde {
public:
  EmbeddedOde(const ModelSpec& m, int lo, int hi, const Vec& alpha_minus, const Vec& omega_plus,
              double c_bar)
      : minus_(m, lo, hi, alpha_minus, Vec::Zero(m.n)),
        plus_(m, lo, hi, Vec::Zero(m.n), omega_plus), c_bar_(c_bar), n_(m.n) {
    const size_t nj = static_cast<size_t>(n_) * m.J();
    stacked_m_.resize(nj);
    stacked_p_.resize(nj);
    stacked_s_.resize(nj);
    gm_.resize(n_);
    gp_.resize(n_);
    gs_.resize(n_);
  }

  int dim() const { return 2 * minus_.dim(); }
  const WindowOde& minus() const { return minus_; }
  const WindowOde& plus() const { return plus_; }
  double c_bar() const { return c_bar_; }

  void operator()(double t, const double* u, double* du) const {
    const int half = minus_.dim();
    minus_(t, u, du);
    plus_(t, u + half, du + half);

    // minus_ and plus_ own separate pad buffers, so both views stay valid.
    const double* pm = minus_.padded(u);
    const double* pp = plus_.padded(u + half);

    const auto& g = minus_.model().g;
    const int W = minus_.width();
    const int lo = minus_.lo();
    for (int j = 0; j < W; ++j) {
      minus_.stack_functionals(pm, j, stacked_m_.data());
      plus_.stack_functionals(pp, j, stacked_p_.data());
      for (size_t i = 0; i < stacked_s_.size(); ++i)
        stacked_s_[i] = stacked_m_[i] + stacked_p_[i];
      g.f(stacked_m_.data(), gm_.data());
      g.f(stacked_p_.data(), gp_.data());
      g.f(stacked_s_.data(), gs_.data());
      double* dst = right_mask(lo + j, c_bar_, t) ? du + half + static_cast<size_t>(j) * n_
                                                  : du + static_cast<size_t>(j) * n_;
      for (int k = 0; k < n_; ++k) dst[k] += gs_[k] - gm_[k] - gp_[k];
    }
  }

  /// Next time > t at which the mask seam crosses a site boundary.
  std::function<double(double)> seam_events() const {
    if (c_bar_ == 0.0) return nullptr;
    const double cb = c_bar_;
    return [cb](double t) {
      const double x = cb * t;
      double next = cb > 0.0 ? std::floor(x) + 1.0 : std::ceil(x) - 1.0;
      double te = next / cb;
      if (te <= t) te = (next + (cb > 0.0 ? 1.0 : -1.0)) / cb;
      return te;
    };
  }

private:
  WindowOde minus_, plus_;
  double c_bar_;
  int n_;
  mutable std::vector<double> stacked_m_, stacked_p_, stacked_s_, gm_, gp_, gs_;
};

/// Non-autonomous linear system  Ydot = (L + G'(phi(. - c t))) Y  on a fixed
/// window with zero fill beyond it.  The coefficient is evaluated along the
/// exact traveling wave, interpolated off-grid.
class VariationalOde {
public:
  VariationalOde(const ModelSpec& m, const WaveProfile& p, int lo, int hi)
      : model_(m), profile_(p), lo_(lo), hi_(hi), r_(m.radius()), n_(m.n),
        L_(detail::flatten(m.L, m.n)) {
    for (const auto& s : m.functionals) N_.push_back(detail::flatten(s, m.n));
    const size_t padded = static_cast<size_t>(width() + 2 * r_) * n_;
    wave_.resize(padded);
    ypad_.resize(padded, 0.0);
    stacked_.resize(static_cast<size_t>(n_) * N_.size());
    dg_.resize(static_cast<size_t>(width()) * n_ * n_ * N_.size());
  }

  int width() const { return hi_ - lo_ + 1; }
  int dim() const { return width() * n_; }
  int lo() const { return lo_; }
  int hi() const { return hi_; }
  const ModelSpec& model() const { return model_; }

  /// Evaluates the pointwise Jacobian blocks G'(phi(. - c t)) for all window
  /// sites.  Splitting this from apply() lets a matrix flow reuse one
  /// coefficient evaluation across many columns.
  void refresh_coefficients(double t) const {
    const double shift = profile_.c * t;
    for (int j = lo_ - r_; j <= hi_ + r_; ++j) {
      const Vec v = profile_.eval(static_cast<double>(j) - shift);
      double* dst = wave_.data() + static_cast<size_t>(j - (lo_ - r_)) * n_;
      for (int k = 0; k < n_; ++k) dst[k] = v[k];
    }
    const double* w = wave_.data() + static_cast<size_t>(r_) * n_;
    const size_t block = static_cast<size_t>(n_) * n_ * N_.size();
    for (int j = 0; j < width(); ++j) {
      stack(w, j, stacked_.data());
      model_.g.jac(stacked_.data(), dg_.data() + static_cast<size_t>(j) * block);
    }
  }

  /// dy = L y + G'(wave) y with the current coefficients.
  void apply(const double* y, double* dy) const {
    std::fill(ypad_.begin(), ypad_.end(), 0.0);
    std::copy(y, y + dim(), ypad_.data() + static_cast<size_t>(r_) * n_);
    const double* yp = ypad_.data() + static_cast<size_t>(r_) * n_;
    const int nj = n_ * static_cast<int>(N_.size());
    const size_t block = static_cast<size_t>(n_) * nj;
    for (int j = 0; j < width(); ++j) {
      double* out = dy + static_cast<size_t>(j) * n_;
      for (int k = 0; k < n_; ++k) out[k] = 0.0;
      for (const auto& s : L_)
        detail::block_accumulate(s, yp + static_cast<size_t>(j + s.offset) * n_, n_, out);
      stack(yp, j, stacked_.data());
      const double* J = dg_.data() + static_cast<size_t>(j) * block;
      for (int rrow = 0; rrow < n_; ++rrow) {
        double acc = 0.0;
        for (int cc = 0; cc < nj; ++cc) acc += J[static_cast<size_t>(rrow) * nj + cc] * stacked_[cc];
        out[rrow] += acc;
      }
    }
  }

  void operator()(double t, const double* y, double* dy) const {
    refresh_coefficients(t);
    apply(y, dy);
  }

private:
  void stack(const double* p, int j, double* stacked) const {
    for (size_t i = 0; i < N_.size(); ++i) {
      double* dst = stacked + i * n_;
      for (int k = 0; k < n_; ++k) dst[k] = 0.0;
      for (const auto& s : N_[i])
        detail::block_accumulate(s, p + static_cast<size_t>(j + s.offset) * n_, n_, dst);
    }
  }

  ModelSpec model_;
  WaveProfile profile_;
  int lo_, hi_, r_, n_;
  std::vector<detail::FlatStencil> L_;
  std::vector<std::vector<detail::FlatStencil>> N_;
  mutable std::vector<double> wave_, ypad_, stacked_, dg_;
};

namespace detail {

inline void require_equilibrium_tail(const ModelSpec& m, const Vec& tail, const char* who) {
  Vec lv = Vec::Zero(m.n);
  for (const auto& e : m.L) lv += e.A * tail;
  Vec stacked(m.n * m.J());
  for (int i = 0; i < m.J(); ++i) {
    Mat sum = Mat::Zero(m.n, m.n);
    for (const auto& e : m.functionals[i]) sum += e.A;
    stacked.segment(static_cast<Eigen::Index>(i) * m.n, m.n) = sum * tail;
  }
  const double f = (lv + m.g.eval(stacked)).cwiseAbs().maxCoeff();
  if (f > 1e-9)
    throw std::invalid_argument(std::string(who) + ": tail is not an equilibrium (|F| = " +
                                std::to_string(f) + ")");
}

}  // namespace detail

/// Integrates the truncated system Xdot = F(X) with tails held fixed.
inline Trajectory integrate(const ModelSpec& m, const LatticeState& x0,
                            const IntegratorConfig& cfg) {
  detail::require_comps(m, x0, "integrate");
  detail::require_equilibrium_tail(m, x0.tail_left(), "integrate");
  detail::require_equilibrium_tail(m, x0.tail_right(), "integrate");
  WindowOde sys(m, x0.window_lo(), x0.window_hi(), x0.tail_left(), x0.tail_right());
  std::vector<double> y = sys.from_state(x0);
  Trajectory out;
  ode_drive(
      std::ref(sys), y, cfg.t0, cfg.t1, cfg.ode(), cfg.sample_times(), nullptr,
      [&](double t, const std::vector<double>& yy) {
        out.times.push_back(t);
        out.states.push_back(sys.to_state(yy));
      },
      &out.stats, &out.steps);
  return out;
}

/// Re-runs a trajectory following a recorded step sequence verbatim (same
/// discrete flow, no error control).
inline Trajectory integrate_replay(const ModelSpec& m, const LatticeState& x0,
                                   const IntegratorConfig& cfg, const std::vector<double>& steps) {
  detail::require_comps(m, x0, "integrate_replay");
  WindowOde sys(m, x0.window_lo(), x0.window_hi(), x0.tail_left(), x0.tail_right());
  std::vector<double> y = sys.from_state(x0);
  Trajectory out;
  ode_drive(
      std::ref(sys), y, cfg.t0, cfg.t1, cfg.ode(), cfg.sample_times(), nullptr,
      [&](double t, const std::vector<double>& yy) {
        out.times.push_back(t);
        out.states.push_back(sys.to_state(yy));
      },
      &out.stats, nullptr, &steps);
  return out;
}

/// Integrates the embedded pair system.  Both initial states are expanded to
/// a common window; the mask seam must stay well inside it for the whole
/// span.
inline PairTrajectory integrate_embedded(const ModelSpec& m, const LatticeState& xm0,
                                         const LatticeState& xp0, double c_bar,
                                         const IntegratorConfig& cfg) {
  detail::require_comps(m, xm0, "integrate_embedded");
  detail::require_comps(m, xp0, "integrate_embedded");
  if (xm0.tail_right().cwiseAbs().maxCoeff() > 1e-12 ||
      xp0.tail_left().cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument(
        "integrate_embedded: inner tails must be zero (normalize the middle state to 0)");
  detail::require_equilibrium_tail(m, xm0.tail_left(), "integrate_embedded");
  detail::require_equilibrium_tail(m, xp0.tail_right(), "integrate_embedded");

  const int lo = std::min(xm0.window_lo(), xp0.window_lo());
  const int hi = std::max(xm0.window_hi(), xp0.window_hi());
  const int guard = m.radius() + 1;
  for (double t : {cfg.t0, cfg.t1}) {
    const double seam = c_bar * t;
    if (seam < lo + guard || seam > hi - guard)
      throw std::invalid_argument("integrate_embedded: mask seam leaves the window margin");
  }

  EmbeddedOde sys(m, lo, hi, xm0.tail_left(), xp0.tail_right(), c_bar);
  std::vector<double> y(static_cast<size_t>(sys.dim()));
  {
    const std::vector<double> ym = sys.minus().from_state(xm0.expanded(lo, hi));
    const std::vector<double> yp = sys.plus().from_state(xp0.expanded(lo, hi));
    std::copy(ym.begin(), ym.end(), y.begin());
    std::copy(yp.begin(), yp.end(), y.begin() + sys.minus().dim());
  }

  PairTrajectory out;
  ode_drive(
      std::ref(sys), y, cfg.t0, cfg.t1, cfg.ode(), cfg.sample_times(), sys.seam_events(),
      [&](double t, const std::vector<double>& yy) {
        std::vector<double> ym(yy.begin(), yy.begin() + sys.minus().dim());
        std::vector<double> yp(yy.begin() + sys.minus().dim(), yy.end());
        out.times.push_back(t);
        out.states.emplace_back(sys.minus().to_state(ym), sys.plus().to_state(yp));
      },
      &out.stats, &out.steps);
  return out;
}

/// Integrates the linear variational equation along the frozen wave.
inline Trajectory integrate_variational(const ModelSpec& m, const WaveProfile& p,
                                        const LatticeState& y0, const IntegratorConfig& cfg) {
  detail::require_comps(m, y0, "integrate_variational");
  if (y0.tail_left().cwiseAbs().maxCoeff() > 0.0 || y0.tail_right().cwiseAbs().maxCoeff() > 0.0)
    throw std::invalid_argument("integrate_variational: perturbation tails must be zero");
  VariationalOde sys(m, p, y0.window_lo(), y0.window_hi());
  WindowOde layout(m, y0.window_lo(), y0.window_hi(), Vec::Zero(m.n), Vec::Zero(m.n));
  std::vector<double> y = layout.from_state(y0);
  Trajectory out;
  ode_drive(
      std::ref(sys), y, cfg.t0, cfg.t1, cfg.ode(), cfg.sample_times(), nullptr,
      [&](double t, const std::vector<double>& yy) {
        out.times.push_back(t);
        out.states.push_back(layout.to_state(yy));
      },
      &out.stats, &out.steps);
  return out;
}

}  // namespace latwave
