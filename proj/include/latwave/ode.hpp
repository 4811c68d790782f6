#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace latwave {

struct BlowupError : std::runtime_error {
  explicit BlowupError(const std::string& what) : std::runtime_error(what) {}
};
struct StepUnderflowError : std::runtime_error {
  explicit StepUnderflowError(const std::string& what) : std::runtime_error(what) {}
};

enum class StepMethod { rk4, adaptive };

struct OdeOptions {
  StepMethod method = StepMethod::adaptive;
  double dt = 1e-2;  // fixed-step size (rk4 mode)
  double rtol = 1e-9;
  double atol = 1e-11;
  double h_max = 1.0;
};

struct StepStats {
  long accepted = 0;
  long rejected = 0;
  double max_err = 0.0;  // largest accepted scaled error estimate
};

namespace detail {

// Dormand-Prince 5(4) coefficients.
struct Dopri5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline void check_finite(const std::vector<double>& y, double t) {
  for (double v : y)
    if (!std::isfinite(v))
      throw BlowupError("integration blow-up: non-finite state at t = " + std::to_string(t));
}

}  // namespace detail

/// Integrates y' = rhs(t, y) from t0 to t1.
///
/// The driver lands exactly on every time in `stops` (sorted, within
/// (t0, t1]); `on_stop` is invoked there and at t0/t1.  `next_event`, when
/// set, returns the next time > t at which the right-hand side changes
/// non-smoothly (mask seam crossings); steps are clipped so no step
/// straddles such a boundary.  Accepted step endpoints are appended to
/// `step_log` when given.  When `replay` is set, the recorded endpoint
/// sequence is followed verbatim with no error control, so two systems
/// integrated with the same step sequence share the identical discrete flow.
template <class Rhs>
void ode_drive(Rhs&& rhs, std::vector<double>& y, double t0, double t1, const OdeOptions& opt,
               const std::vector<double>& stops, const std::function<double(double)>& next_event,
               const std::function<void(double, const std::vector<double>&)>& on_stop,
               StepStats* stats = nullptr, std::vector<double>* step_log = nullptr,
               const std::vector<double>* replay = nullptr) {
  using D = detail::Dopri5;
  const size_t N = y.size();
  const double span = t1 - t0;
  if (span <= 0.0) throw std::invalid_argument("ode_drive: need t1 > t0");
  const double t_eps = std::max(1e-14 * std::max(std::abs(t0), std::abs(t1)), 1e-300);

  std::vector<double> k1(N), k2(N), k3(N), k4(N), k5(N), k6(N), k7(N), ytmp(N), ynew(N);
  StepStats local_stats;
  StepStats& st = stats ? *stats : local_stats;

  if (on_stop) on_stop(t0, y);

  double t = t0;
  size_t stop_idx = 0;
  while (stop_idx < stops.size() && stops[stop_idx] <= t0 + t_eps) ++stop_idx;
  size_t replay_idx = 0;

  const bool adaptive = opt.method == StepMethod::adaptive && replay == nullptr;
  double h = adaptive ? std::min({opt.h_max, span, 1e-2}) : opt.dt;

  rhs(t, y.data(), k1.data());  // FSAL seed

  auto do_stages = [&](double hh) {
    for (size_t i = 0; i < N; ++i) ytmp[i] = y[i] + hh * D::a21 * k1[i];
    rhs(t + D::c2 * hh, ytmp.data(), k2.data());
    for (size_t i = 0; i < N; ++i) ytmp[i] = y[i] + hh * (D::a31 * k1[i] + D::a32 * k2[i]);
    rhs(t + D::c3 * hh, ytmp.data(), k3.data());
    for (size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + hh * (D::a41 * k1[i] + D::a42 * k2[i] + D::a43 * k3[i]);
    rhs(t + D::c4 * hh, ytmp.data(), k4.data());
    for (size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + hh * (D::a51 * k1[i] + D::a52 * k2[i] + D::a53 * k3[i] + D::a54 * k4[i]);
    rhs(t + D::c5 * hh, ytmp.data(), k5.data());
    for (size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + hh * (D::a61 * k1[i] + D::a62 * k2[i] + D::a63 * k3[i] + D::a64 * k4[i] +
                             D::a65 * k5[i]);
    rhs(t + hh, ytmp.data(), k6.data());
    for (size_t i = 0; i < N; ++i)
      ynew[i] = y[i] + hh * (D::b1 * k1[i] + D::b3 * k3[i] + D::b4 * k4[i] + D::b5 * k5[i] +
                             D::b6 * k6[i]);
    rhs(t + hh, ynew.data(), k7.data());
  };

  while (t < t1 - t_eps) {
    double t_stop = t1;
    if (stop_idx < stops.size()) t_stop = std::min(t_stop, stops[stop_idx]);
    if (next_event) {
      const double te = next_event(t);
      if (te > t + t_eps) t_stop = std::min(t_stop, te);
    }

    double hh;
    if (replay) {
      if (replay_idx >= replay->size())
        throw std::invalid_argument("ode_drive: replay step sequence exhausted");
      hh = (*replay)[replay_idx] - t;
      if (hh <= 0.0) throw std::invalid_argument("ode_drive: replay sequence not increasing");
    } else {
      hh = std::min(h, opt.h_max);
      if (t + hh >= t_stop - t_eps) hh = t_stop - t;
    }

    if (hh < span * 1e-15)
      throw StepUnderflowError("ode_drive: step size underflow at t = " + std::to_string(t));

    bool accept = true;
    if (opt.method == StepMethod::adaptive) {
      do_stages(hh);
      if (replay == nullptr) {
        double err2 = 0.0;
        for (size_t i = 0; i < N; ++i) {
          const double e = hh * (D::e1 * k1[i] + D::e3 * k3[i] + D::e4 * k4[i] + D::e5 * k5[i] +
                                 D::e6 * k6[i] + D::e7 * k7[i]);
          const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
          err2 += (e / sc) * (e / sc);
        }
        const double err = std::sqrt(err2 / static_cast<double>(N));
        accept = err <= 1.0 || hh <= span * 1e-14;
        const double factor =
            std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
        h = hh * (accept ? std::min(factor, 5.0) : std::min(factor, 1.0));
        if (accept) st.max_err = std::max(st.max_err, err);
      }
    } else {
      // classical RK4
      for (size_t i = 0; i < N; ++i) ytmp[i] = y[i] + 0.5 * hh * k1[i];
      rhs(t + 0.5 * hh, ytmp.data(), k2.data());
      for (size_t i = 0; i < N; ++i) ytmp[i] = y[i] + 0.5 * hh * k2[i];
      rhs(t + 0.5 * hh, ytmp.data(), k3.data());
      for (size_t i = 0; i < N; ++i) ytmp[i] = y[i] + hh * k3[i];
      rhs(t + hh, ytmp.data(), k4.data());
      for (size_t i = 0; i < N; ++i)
        ynew[i] = y[i] + hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }

    if (!accept) {
      ++st.rejected;
      continue;
    }

    t = (std::abs(t + hh - t_stop) <= t_eps) ? t_stop : t + hh;
    y.swap(ynew);
    detail::check_finite(y, t);
    ++st.accepted;
    if (replay) ++replay_idx;
    if (step_log) step_log->push_back(t);

    if (opt.method == StepMethod::adaptive) {
      k1.swap(k7);  // FSAL
    } else {
      rhs(t, y.data(), k1.data());
    }

    if (stop_idx < stops.size() && std::abs(t - stops[stop_idx]) <= t_eps) {
      if (on_stop) on_stop(stops[stop_idx], y);
      ++stop_idx;
    }
  }
  if (on_stop && (stops.empty() || std::abs(stops.back() - t1) > t_eps)) on_stop(t1, y);
}

}  // namespace latwave
