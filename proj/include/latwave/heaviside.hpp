#pragma once

#include <stdexcept>

#include "latwave/lattice_state.hpp"

namespace latwave {

enum class MaskSide { left, right };

/// Time-dependent Heaviside localization: the right mask keeps sites with
/// j - c_bar*t > 0 (strict, so the boundary site itself belongs to the left
/// mask), and the left mask is its complement.  The two masks partition the
/// lattice at every time.
struct HeavisideCutoff {
  double c_bar = 0.0;
  MaskSide side = MaskSide::right;
  double t = 0.0;

  bool keeps(int j) const {
    const bool right = static_cast<double>(j) - c_bar * t > 0.0;
    return side == MaskSide::right ? right : !right;
  }
};

inline bool right_mask(int j, double c_bar, double t) {
  return static_cast<double>(j) - c_bar * t > 0.0;
}

/// Sitewise multiplication by the mask.  The masked-off tail becomes zero.
/// The mask boundary must be representable: either it lies within one site of
/// the window, or the tail being zeroed piecewise is already zero.
inline LatticeState apply_cutoff(const HeavisideCutoff& cut, const LatticeState& x) {
  const double boundary = cut.c_bar * cut.t;
  const int lo = x.window_lo(), hi = x.window_hi();
  const bool boundary_inside = boundary >= lo - 1 && boundary <= hi + 1;
  if (!boundary_inside) {
    // Outside the window the state is constant; a cut through a nonzero
    // constant region cannot be represented with constant tails.
    const Vec& affected = boundary < lo - 1 ? x.tail_left() : x.tail_right();
    if (affected.cwiseAbs().maxCoeff() > 0.0)
      throw std::invalid_argument("apply_cutoff: mask boundary outside window over a nonzero tail");
  }

  LatticeState out = x;
  const Vec zero = Vec::Zero(x.comps());
  out.set_tails(cut.side == MaskSide::left ? x.tail_left() : zero,
                cut.side == MaskSide::right ? x.tail_right() : zero);
  for (int j = lo; j <= hi; ++j) {
    if (!cut.keeps(j)) {
      double* p = out.at(j);
      for (int k = 0; k < x.comps(); ++k) p[k] = 0.0;
    }
  }
  return out;
}

}  // namespace latwave
