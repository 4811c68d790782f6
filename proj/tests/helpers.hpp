#pragma once

#include <cstdint>
#include <random>

#include "latwave/lattice_state.hpp"
#include "latwave/model.hpp"
#include "latwave/models.hpp"

namespace testutil {

// Platform-stable uniform double in [-1, 1).
inline double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

inline latwave::LatticeState random_state(std::mt19937_64& rng, int lo, int hi, int n,
                                          double amplitude = 1.0) {
  latwave::LatticeState s(lo, hi, n);
  for (double& v : s.raw()) v = amplitude * uniform_pm1(rng);
  return s;
}

// A scalar model with two functionals (identity and neighbor average), so the
// multi-functional machinery gets exercised: g(p, q) = -p(p-1)(p-a) + mu p (q - p).
inline latwave::ModelSpec j2_model(double a = 0.3, double mu = 0.1) {
  using namespace latwave;
  ModelSpec m;
  m.name = "j2_test";
  m.n = 1;
  Mat one = Mat::Constant(1, 1, 1.0);
  m.L = {{-1, one}, {0, -2.0 * one}, {1, one}};
  m.functionals = {{{0, one}}, {{-1, 0.5 * one}, {1, 0.5 * one}}};
  m.g.in_dim = 2;
  m.g.out_dim = 1;
  m.g.family = "test_j2";
  m.g.params = {{"a", a}, {"mu", mu}};
  m.g.f = [a, mu](const double* x, double* y) {
    const double p = x[0], q = x[1];
    y[0] = -p * (p - 1.0) * (p - a) + mu * p * (q - p);
  };
  m.g.jac = [a, mu](const double* x, double* jy) {
    const double p = x[0], q = x[1];
    jy[0] = -(3.0 * p * p - 2.0 * (1.0 + a) * p + a) + mu * (q - 2.0 * p);
    jy[1] = mu * p;
  };
  m.equilibria = {Vec::Zero(1), Vec::Constant(1, a), Vec::Ones(1)};
  m.validate();
  return m;
}

inline latwave::LatticeState delta_state(int site, double value, int lo, int hi, int n = 1,
                                         int comp = 0) {
  latwave::LatticeState s(lo, hi, n);
  s.at(site)[comp] = value;
  return s;
}

}  // namespace testutil
