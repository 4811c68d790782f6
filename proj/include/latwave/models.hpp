#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "latwave/model.hpp"

namespace latwave {

namespace detail {

inline double get_param(const std::map<std::string, double>& p, const std::string& key,
                        double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

inline Stencil scalar_laplacian(double coef) {
  Mat one = Mat::Constant(1, 1, 1.0);
  return {{-1, coef * one}, {0, -2.0 * coef * one}, {1, coef * one}};
}

}  // namespace detail

/// Pointwise nonlinearity registry: family name + parameters -> map.  Every
/// model that round-trips through files references one of these families.
inline PointwiseMap make_pointwise(const std::string& family,
                                   const std::map<std::string, double>& params) {
  PointwiseMap g;
  g.family = family;
  g.params = params;
  if (family == "nagumo") {
    const double a = detail::get_param(params, "a", 0.3);
    g.in_dim = g.out_dim = 1;
    g.params = {{"a", a}};
    g.f = [a](const double* u, double* y) { y[0] = -u[0] * (u[0] - 1.0) * (u[0] - a); };
    g.jac = [a](const double* u, double* jy) {
      jy[0] = -(3.0 * u[0] * u[0] - 2.0 * (1.0 + a) * u[0] + a);
    };
  } else if (family == "tristable") {
    const double a1 = detail::get_param(params, "a1", -0.75);
    const double a2 = detail::get_param(params, "a2", 0.75);
    g.in_dim = g.out_dim = 1;
    g.params = {{"a1", a1}, {"a2", a2}};
    const double s = a1 + a2, r = a1 * a2;
    // p(u) = u (u^2 - 1)(u - a1)(u - a2) = u^5 - s u^4 + (r-1) u^3 + s u^2 - r u
    g.f = [s, r](const double* uu, double* y) {
      const double u = uu[0];
      y[0] = -(((((u - s) * u + (r - 1.0)) * u + s) * u - r) * u);
    };
    g.jac = [s, r](const double* uu, double* jy) {
      const double u = uu[0];
      jy[0] = -((((5.0 * u - 4.0 * s) * u + 3.0 * (r - 1.0)) * u + 2.0 * s) * u - r);
    };
  } else if (family == "fhn") {
    const double eps = detail::get_param(params, "eps", 0.1);
    const double a = detail::get_param(params, "a", 0.1);
    const double b = detail::get_param(params, "b", 2.0);
    g.in_dim = g.out_dim = 2;
    g.params = {{"eps", eps}, {"a", a}, {"b", b}};
    g.f = [eps, a, b](const double* x, double* y) {
      const double u = x[0], v = x[1];
      y[0] = (u * (1.0 - u) * (u - a) - v) / eps;
      y[1] = u - b * v;
    };
    g.jac = [eps, a, b](const double* x, double* jy) {
      const double u = x[0];
      jy[0] = (-3.0 * u * u + 2.0 * (1.0 + a) * u - a) / eps;
      jy[1] = -1.0 / eps;
      jy[2] = 1.0;
      jy[3] = -b;
    };
  } else if (family == "nagumo_pair") {
    // Two decoupled copies of the cubic; a deliberately degenerate system
    // used to exercise "eigenvalue 1 not simple" diagnostics.
    const double a = detail::get_param(params, "a", 0.3);
    g.in_dim = g.out_dim = 2;
    g.params = {{"a", a}};
    g.f = [a](const double* u, double* y) {
      y[0] = -u[0] * (u[0] - 1.0) * (u[0] - a);
      y[1] = -u[1] * (u[1] - 1.0) * (u[1] - a);
    };
    g.jac = [a](const double* u, double* jy) {
      jy[0] = -(3.0 * u[0] * u[0] - 2.0 * (1.0 + a) * u[0] + a);
      jy[1] = 0.0;
      jy[2] = 0.0;
      jy[3] = -(3.0 * u[1] * u[1] - 2.0 * (1.0 + a) * u[1] + a);
    };
  } else if (family == "zero") {
    const int n = static_cast<int>(detail::get_param(params, "n", 1));
    g.in_dim = g.out_dim = n;
    g.params = {{"n", static_cast<double>(n)}};
    g.f = [n](const double*, double* y) {
      for (int i = 0; i < n; ++i) y[i] = 0.0;
    };
    g.jac = [n](const double*, double* jy) {
      for (int i = 0; i < n * n; ++i) jy[i] = 0.0;
    };
  } else {
    throw std::invalid_argument("make_pointwise: unknown family '" + family + "'");
  }
  return g;
}

inline Stencil identity_functional(int n) { return {{0, Mat::Identity(n, n)}}; }

/// Spatially discrete Nagumo equation:
///   udot_j = (u_{j+1} + u_{j-1} - 2 u_j)/h^2 - u_j (u_j - 1)(u_j - a).
inline ModelSpec make_nagumo(double h, double a) {
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("nagumo: need a in (0,1)");
  if (!(h > 0.0)) throw std::invalid_argument("nagumo: need h > 0");
  ModelSpec m;
  m.name = "nagumo";
  m.n = 1;
  m.L = detail::scalar_laplacian(1.0 / (h * h));
  m.functionals = {identity_functional(1)};
  m.g = make_pointwise("nagumo", {{"a", a}});
  m.equilibria = {Vec::Zero(1), Vec::Constant(1, a), Vec::Ones(1)};
  m.params = {{"h", h}, {"a", a}};
  m.validate();
  return m;
}

/// Quintic tristable variant with stable states -1, 0, 1.
inline ModelSpec make_tristable(double h, double a1, double a2) {
  if (!(a1 > -1.0 && a1 < 0.0 && a2 > 0.0 && a2 < 1.0))
    throw std::invalid_argument("tristable: need -1 < a1 < 0 < a2 < 1");
  if (!(h > 0.0)) throw std::invalid_argument("tristable: need h > 0");
  ModelSpec m;
  m.name = "tristable";
  m.n = 1;
  m.L = detail::scalar_laplacian(1.0 / (h * h));
  m.functionals = {identity_functional(1)};
  m.g = make_pointwise("tristable", {{"a1", a1}, {"a2", a2}});
  m.equilibria = {Vec::Constant(1, -1.0), Vec::Constant(1, a1), Vec::Zero(1),
                  Vec::Constant(1, a2), Vec::Ones(1)};
  m.params = {{"h", h}, {"a1", a1}, {"a2", a2}};
  m.validate();
  return m;
}

/// Nonlocal convolution model  udot_j = sum_k J_k u_{j-k} - u_j + g(u_j)
/// with a geometrically decaying kernel J_k ~ rho^{|k|} truncated at |k| <= K
/// and normalized to unit mass (so the linear part annihilates constants).
/// The discarded kernel mass fraction rho^K is recorded in the parameters.
inline ModelSpec make_convolution(double rho, int K, double a) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("convolution: need rho in (0,1)");
  if (K < 1) throw std::invalid_argument("convolution: need kernel radius K >= 1");
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("convolution: need a in (0,1)");
  ModelSpec m;
  m.name = "convolution";
  m.n = 1;
  double mass = 0.0;
  for (int k = 1; k <= K; ++k) mass += std::pow(rho, k);
  const double scale = 1.0 / (2.0 * mass);
  Mat one = Mat::Constant(1, 1, 1.0);
  for (int o = -K; o <= K; ++o) {
    if (o == 0)
      m.L.push_back({0, -one});
    else
      m.L.push_back({o, scale * std::pow(rho, std::abs(o)) * one});
  }
  m.functionals = {identity_functional(1)};
  m.g = make_pointwise("nagumo", {{"a", a}});
  m.equilibria = {Vec::Zero(1), Vec::Constant(1, a), Vec::Ones(1)};
  m.params = {{"rho", rho}, {"K", static_cast<double>(K)}, {"a", a},
              {"truncation_mass", std::pow(rho, K)}};
  m.validate();
  return m;
}

/// Discrete FitzHugh-Nagumo system (n = 2):
///   eps udot_j = d (u_{j+1} + u_{j-1} - 2 u_j) + u_j (1 - u_j)(u_j - a) - v_j
///       vdot_j = u_j - b v_j.
inline ModelSpec make_fhn(double eps, double d, double a, double b) {
  if (!(eps > 0.0)) throw std::invalid_argument("fhn: need eps > 0");
  if (!(d > 0.0)) throw std::invalid_argument("fhn: need d > 0");
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("fhn: need a in (0,1)");
  if (!(b > 0.0)) throw std::invalid_argument("fhn: need b > 0");
  ModelSpec m;
  m.name = "fhn";
  m.n = 2;
  Mat coupling = Mat::Zero(2, 2);
  coupling(0, 0) = d / eps;
  m.L = {{-1, coupling}, {0, -2.0 * coupling}, {1, coupling}};
  m.functionals = {identity_functional(2)};
  m.g = make_pointwise("fhn", {{"eps", eps}, {"a", a}, {"b", b}});
  m.equilibria = {Vec::Zero(2)};
  // Further rest states exist when (1-u)(u-a) = 1/b has real roots.
  const double disc = (1.0 - a) * (1.0 - a) - 4.0 / b;
  if (disc > 1e-12) {
    for (double sgn : {-1.0, 1.0}) {
      const double u = 0.5 * ((1.0 + a) + sgn * std::sqrt(disc));
      Vec e(2);
      e << u, u / b;
      m.equilibria.push_back(e);
    }
  }
  m.params = {{"eps", eps}, {"d", d}, {"a", a}, {"b", b}};
  m.validate();
  return m;
}

inline ModelSpec make_nagumo_pair(double h, double a) {
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("nagumo_pair: need a in (0,1)");
  if (!(h > 0.0)) throw std::invalid_argument("nagumo_pair: need h > 0");
  ModelSpec m;
  m.name = "nagumo_pair";
  m.n = 2;
  const double c = 1.0 / (h * h);
  Mat block = c * Mat::Identity(2, 2);
  m.L = {{-1, block}, {0, -2.0 * block}, {1, block}};
  m.functionals = {identity_functional(2)};
  m.g = make_pointwise("nagumo_pair", {{"a", a}});
  for (double u : {0.0, a, 1.0}) {
    Vec e(2);
    e << u, u;
    m.equilibria.push_back(e);
  }
  {
    Vec e(2);
    e << 0.0, 1.0;
    m.equilibria.push_back(e);
    e << 1.0, 0.0;
    m.equilibria.push_back(e);
  }
  m.params = {{"h", h}, {"a", a}};
  m.validate();
  return m;
}

struct ModelFamily {
  std::string name;
  std::string summary;
  std::vector<std::pair<std::string, double>> param_defaults;
  std::function<ModelSpec(const std::map<std::string, double>&)> make;
};

inline const std::vector<ModelFamily>& model_families() {
  using detail::get_param;
  static const std::vector<ModelFamily> families = {
      {"nagumo",
       "discrete Nagumo equation, cubic bistable reaction",
       {{"h", 1.0}, {"a", 0.3}},
       [](const std::map<std::string, double>& p) {
         return make_nagumo(get_param(p, "h", 1.0), get_param(p, "a", 0.3));
       }},
      {"tristable",
       "quintic reaction with stable states -1, 0, 1 (front stacking)",
       {{"h", 0.5}, {"a1", -0.75}, {"a2", 0.75}},
       [](const std::map<std::string, double>& p) {
         return make_tristable(get_param(p, "h", 0.5), get_param(p, "a1", -0.75),
                               get_param(p, "a2", 0.75));
       }},
      {"convolution",
       "nonlocal convolution model, truncated geometric kernel",
       {{"rho", 0.5}, {"K", 6.0}, {"a", 0.3}},
       [](const std::map<std::string, double>& p) {
         return make_convolution(get_param(p, "rho", 0.5),
                                 static_cast<int>(get_param(p, "K", 6.0)),
                                 get_param(p, "a", 0.3));
       }},
      {"fhn",
       "discrete FitzHugh-Nagumo system (n = 2), pulse waves",
       {{"eps", 0.1}, {"d", 5.0}, {"a", 0.1}, {"b", 2.0}},
       [](const std::map<std::string, double>& p) {
         return make_fhn(get_param(p, "eps", 0.1), get_param(p, "d", 5.0),
                         get_param(p, "a", 0.1), get_param(p, "b", 2.0));
       }},
      {"nagumo_pair",
       "two decoupled Nagumo copies; degenerate-spectrum diagnostic",
       {{"h", 1.0}, {"a", 0.3}},
       [](const std::map<std::string, double>& p) {
         return make_nagumo_pair(get_param(p, "h", 1.0), get_param(p, "a", 0.3));
       }},
  };
  return families;
}

inline ModelSpec make_model(const std::string& family, std::map<std::string, double> params = {}) {
  for (const auto& fam : model_families()) {
    if (fam.name == family) {
      for (const auto& [key, _] : params) {
        bool known = false;
        for (const auto& [name, unused] : fam.param_defaults) known = known || name == key;
        if (!known)
          throw std::invalid_argument("make_model: unknown parameter '" + key + "' for " + family);
      }
      for (const auto& [key, value] : fam.param_defaults)
        if (!params.count(key)) params[key] = value;
      return fam.make(params);
    }
  }
  throw std::invalid_argument("make_model: unknown family '" + family + "'");
}

/// The built-in model zoo at default parameters.
inline std::vector<ModelSpec> builtin_models() {
  std::vector<ModelSpec> out;
  for (const auto& fam : model_families()) out.push_back(fam.make({}));
  return out;
}

}  // namespace latwave
