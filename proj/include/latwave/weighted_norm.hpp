#pragma once

#include <cmath>
#include <limits>

#include "latwave/lattice_state.hpp"

namespace latwave {

/// Exponentially weighted sup norm  ||X||_b = sup_j |(1 + e^{b j}) X_j|.
/// b > 0 enforces decay to the right, b < 0 to the left, b = 0 is twice the
/// plain sup norm.
struct WeightedNorm {
  double b = 0.0;

  double weight(double j) const {
    const double e = b * j;
    if (e > 700.0) return std::numeric_limits<double>::infinity();
    return 1.0 + std::exp(e);
  }

  double operator()(const LatticeState& x) const {
    const double inf = std::numeric_limits<double>::infinity();
    const int lo = x.window_lo(), hi = x.window_hi();

    auto vec_max = [](const Vec& v) { return v.cwiseAbs().maxCoeff(); };
    const double tl = vec_max(x.tail_left());
    const double tr = vec_max(x.tail_right());

    double m = 0.0;
    // A nonzero tail on the side where the weight grows without bound makes
    // the norm infinite; on the other side the weight supremum sits at the
    // window edge.
    if (b > 0.0) {
      if (tr > 0.0) return inf;
      m = std::max(m, weight(lo - 1) * tl);
    } else if (b < 0.0) {
      if (tl > 0.0) return inf;
      m = std::max(m, weight(hi + 1) * tr);
    } else {
      m = 2.0 * std::max(tl, tr);
    }

    for (int j = lo; j <= hi; ++j) {
      const double w = weight(j);
      const double* p = x.at(j);
      double a = 0.0;
      for (int k = 0; k < x.comps(); ++k) a = std::max(a, std::abs(p[k]));
      if (a > 0.0 && std::isinf(w)) return inf;
      m = std::max(m, w * a);
    }
    return m;
  }
};

inline double weighted_norm(const WeightedNorm& norm, const LatticeState& x) { return norm(x); }

}  // namespace latwave
