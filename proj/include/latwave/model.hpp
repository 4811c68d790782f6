#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "latwave/heaviside.hpp"
#include "latwave/lattice_state.hpp"

namespace latwave {

struct StencilEntry {
  int offset;
  Mat A;  // n_out x n_in block applied to the value at site j + offset
};
using Stencil = std::vector<StencilEntry>;

inline int stencil_radius(const Stencil& s) {
  int r = 0;
  for (const auto& e : s) r = std::max(r, std::abs(e.offset));
  return r;
}

/// Pointwise map g : R^{n J} -> R^n together with its Jacobian, identified by
/// a registry family name plus parameters so it can round-trip through files.
struct PointwiseMap {
  int in_dim = 0;
  int out_dim = 0;
  std::function<void(const double*, double*)> f;
  std::function<void(const double*, double*)> jac;  // row-major out_dim x in_dim
  std::string family;
  std::map<std::string, double> params;

  Vec eval(const Vec& x) const {
    Vec y(out_dim);
    f(x.data(), y.data());
    return y;
  }
  Mat jacobian(const Vec& x) const {
    Mat J(out_dim, in_dim);
    std::vector<double> buf(static_cast<size_t>(out_dim) * in_dim);
    jac(x.data(), buf.data());
    for (int r = 0; r < out_dim; ++r)
      for (int c = 0; c < in_dim; ++c) J(r, c) = buf[static_cast<size_t>(r) * in_dim + c];
    return J;
  }
};

/// A lattice differential equation  Xdot = L X + G(X)  with
/// G(X)_j = g(N_1(X)_j, ..., N_J(X)_j).  L and every N_i are finite stencils
/// of n x n blocks; L annihilates constants.
struct ModelSpec {
  std::string name;
  int n = 1;
  Stencil L;
  std::vector<Stencil> functionals;  // N_1 .. N_J
  PointwiseMap g;
  std::vector<Vec> equilibria;
  double default_b = 0.0;  // filled at profile-certification time
  std::map<std::string, double> params;

  int J() const { return static_cast<int>(functionals.size()); }

  int radius() const {
    int r = stencil_radius(L);
    for (const auto& s : functionals) r = std::max(r, stencil_radius(s));
    return r;
  }

  void validate() const {
    if (n <= 0) throw std::invalid_argument(name + ": component count must be positive");
    Mat row_sum = Mat::Zero(n, n);
    for (const auto& e : L) {
      if (e.A.rows() != n || e.A.cols() != n)
        throw std::invalid_argument(name + ": L stencil block size mismatch");
      row_sum += e.A;
    }
    if (row_sum.cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument(name + ": L does not annihilate constants");
    if (g.in_dim != n * J() || g.out_dim != n)
      throw std::invalid_argument(name + ": nonlinearity dimensions inconsistent");
    Vec zero = Vec::Zero(g.in_dim);
    if (g.eval(zero).cwiseAbs().maxCoeff() > 1e-14)
      throw std::invalid_argument(name + ": g(0) != 0");
  }

  /// Stacked functional values (N_1 X_j, ..., N_J X_j) at one site.
  Vec functional_values(const LatticeState& x, int j) const {
    Vec out(n * J());
    for (int i = 0; i < J(); ++i) {
      Vec acc = Vec::Zero(n);
      for (const auto& e : functionals[i]) acc += e.A * x.site(j + e.offset);
      out.segment(static_cast<Eigen::Index>(i) * n, n) = acc;
    }
    return out;
  }
};

namespace detail {
inline void require_comps(const ModelSpec& m, const LatticeState& x, const char* op) {
  if (m.n != x.comps()) throw std::invalid_argument(std::string(op) + ": component count mismatch");
}
}  // namespace detail

/// (L X)_j = sum_k A_k X_{j+k}.  The output window is the input window
/// expanded by the stencil radius; output tails are L of the constant tails
/// (zero, since L annihilates constants).
inline LatticeState apply_linear(const ModelSpec& m, const LatticeState& x) {
  detail::require_comps(m, x, "apply_linear");
  const int r = stencil_radius(m.L);
  LatticeState out(x.window_lo() - r, x.window_hi() + r, m.n);
  for (int j = out.window_lo(); j <= out.window_hi(); ++j) {
    Vec acc = Vec::Zero(m.n);
    for (const auto& e : m.L) acc += e.A * x.site(j + e.offset);
    out.set_site(j, acc);
  }
  return out;
}

/// G(X)_j = g(N_1(X)_j, ..., N_J(X)_j); tails map to g of the tail
/// functional values.
inline LatticeState apply_nonlinearity(const ModelSpec& m, const LatticeState& x) {
  detail::require_comps(m, x, "apply_nonlinearity");
  const int r = m.radius();
  LatticeState out(x.window_lo() - r, x.window_hi() + r, m.n);
  for (int j = out.window_lo(); j <= out.window_hi(); ++j) {
    Vec y = m.g.eval(m.functional_values(x, j));
    if (!y.allFinite()) throw std::runtime_error("apply_nonlinearity: non-finite value (blow-up)");
    out.set_site(j, y);
  }
  auto tail_value = [&](const Vec& tail) {
    Vec stacked(m.n * m.J());
    for (int i = 0; i < m.J(); ++i) {
      Mat sum = Mat::Zero(m.n, m.n);
      for (const auto& e : m.functionals[i]) sum += e.A;
      stacked.segment(static_cast<Eigen::Index>(i) * m.n, m.n) = sum * tail;
    }
    return m.g.eval(stacked);
  };
  out.set_tails(tail_value(x.tail_left()), tail_value(x.tail_right()));
  return out;
}

/// F(X) = L X + G(X).
inline LatticeState rhs_full(const ModelSpec& m, const LatticeState& x) {
  return apply_linear(m, x) + apply_nonlinearity(m, x);
}

/// The interaction term G(X^- + X^+) - G(X^-) - G(X^+) before masking.
inline LatticeState coupling_term(const ModelSpec& m, const LatticeState& xm,
                                  const LatticeState& xp) {
  return apply_nonlinearity(m, xm + xp) - apply_nonlinearity(m, xm) - apply_nonlinearity(m, xp);
}

/// Right-hand sides of the embedded two-component system: each component
/// evolves by its own F, plus the interaction term localized to its side of
/// the moving seam at c_bar * t.
inline std::pair<LatticeState, LatticeState> rhs_embedded(const ModelSpec& m,
                                                          const LatticeState& xm,
                                                          const LatticeState& xp, double t,
                                                          double c_bar) {
  LatticeState cross = coupling_term(m, xm, xp);
  HeavisideCutoff left{c_bar, MaskSide::left, t};
  HeavisideCutoff right{c_bar, MaskSide::right, t};
  LatticeState fm = rhs_full(m, xm) + apply_cutoff(left, cross);
  LatticeState fp = rhs_full(m, xp) + apply_cutoff(right, cross);
  return {std::move(fm), std::move(fp)};
}

}  // namespace latwave
