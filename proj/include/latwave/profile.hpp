#pragma once

#include <cmath>
#include <stdexcept>

#include "latwave/lattice_state.hpp"
#include "latwave/model.hpp"

namespace latwave {

/// A traveling-wave profile phi sampled on the uniform grid
/// xi_min, xi_min + 1/m, ..., xi_max, together with its speed and limits.
/// Lattice offsets are integers, so spacing 1/m puts every offset exactly on
/// the grid.
struct WaveProfile {
  ModelSpec model;
  double xi_min = 0.0;
  int m = 16;  // grid spacing 1/m
  Mat phi;     // points x n
  Mat dphi;    // centered 4th-order derivative samples
  double c = 0.0;
  Vec alpha, omega;  // limits at -inf / +inf
  double decay_left = 0.0, decay_right = 0.0;
  double default_b = 0.0;
  double residual_sup = 0.0;

  int points() const { return static_cast<int>(phi.rows()); }
  int comps() const { return static_cast<int>(phi.cols()); }
  double dxi() const { return 1.0 / m; }
  double xi_max() const { return xi_min + (points() - 1) * dxi(); }
  double xi(int i) const { return xi_min + i * dxi(); }

  Vec eval(double x) const { return interpolate(phi, x); }
  Vec eval_deriv(double x) const { return interpolate(dphi, x); }

  double eval_comp(double x, int k) const { return interpolate_comp(phi, x, k); }
  double eval_deriv_comp(double x, int k) const { return interpolate_comp(dphi, x, k); }

  /// Rebuild the derivative grid from phi (4th-order centered differences,
  /// values beyond the grid clamped to the limits).
  void refresh_derivative() {
    const int N = points(), n = comps();
    dphi.resize(N, n);
    const double s = 1.0 / (12.0 * dxi());
    auto value = [&](int i, int k) -> double {
      if (i < 0) return alpha[k];
      if (i >= N) return omega[k];
      return phi(i, k);
    };
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < n; ++k)
        dphi(i, k) = s * (value(i - 2, k) - 8.0 * value(i - 1, k) + 8.0 * value(i + 1, k) -
                          value(i + 2, k));
  }

private:
  // Local 4-point Lagrange cubic; clamps to the limits outside the grid.
  double interpolate_comp(const Mat& data, double x, int k) const {
    const int N = points();
    if (x <= xi_min) return &data == &dphi ? 0.0 : alpha[k];
    if (x >= xi_max()) return &data == &dphi ? 0.0 : omega[k];
    const double s = (x - xi_min) * m;
    int base = static_cast<int>(std::floor(s)) - 1;
    base = std::max(0, std::min(base, N - 4));
    const double u = s - base;
    const double w0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    const double w1 = u * (u - 2.0) * (u - 3.0) / 2.0;
    const double w2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
    const double w3 = u * (u - 1.0) * (u - 2.0) / 6.0;
    return w0 * data(base, k) + w1 * data(base + 1, k) + w2 * data(base + 2, k) +
           w3 * data(base + 3, k);
  }

  Vec interpolate(const Mat& data, double x) const {
    Vec out(comps());
    for (int k = 0; k < comps(); ++k) out[k] = interpolate_comp(data, x, k);
    return out;
  }
};

/// Sample phi(. - s) onto lattice sites [lo, hi]; tails are the limits.
inline LatticeState sample_profile(const WaveProfile& p, double s, int lo, int hi) {
  LatticeState out(lo, hi, p.comps());
  out.set_tails(p.alpha, p.omega);
  for (int j = lo; j <= hi; ++j) out.set_site(j, p.eval(static_cast<double>(j) - s));
  return out;
}

/// Sample phi'(. - s); tails are zero (the derivative decays).
inline LatticeState sample_profile_deriv(const WaveProfile& p, double s, int lo, int hi) {
  LatticeState out(lo, hi, p.comps());
  for (int j = lo; j <= hi; ++j) out.set_site(j, p.eval_deriv(static_cast<double>(j) - s));
  return out;
}

}  // namespace latwave
