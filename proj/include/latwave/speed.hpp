#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "latwave/stepper.hpp"

namespace latwave {

struct SpeedOptions {
  double level = std::numeric_limits<double>::quiet_NaN();  // default: midway between the tails
  int comp = 0;
  double t0 = 0.0;
  double t1 = 150.0;
  double sample_every = 0.5;
  double rtol = 1e-8;
  double atol = 1e-10;
};

namespace detail {

inline double nearest_crossing(const LatticeState& x, double level, int comp, double near) {
  const int lo = x.window_lo(), hi = x.window_hi();
  double best = std::numeric_limits<double>::quiet_NaN();
  double best_dist = std::numeric_limits<double>::infinity();
  for (int j = lo; j < hi; ++j) {
    const double a = x.site_comp(j, comp) - level;
    const double b = x.site_comp(j + 1, comp) - level;
    if (a == 0.0 || a * b < 0.0) {
      const double pos = j + (a == b ? 0.0 : a / (a - b));
      const double dist = std::abs(pos - near);
      if (dist < best_dist) {
        best_dist = dist;
        best = pos;
      }
    }
  }
  if (!std::isfinite(best)) throw std::runtime_error("measure_speed: no level crossing in window");
  return best;
}

}  // namespace detail

/// Independent speed oracle: integrates front-like initial data, tracks the
/// level-crossing position of one component (linear interpolation between
/// sites), and fits the slope of position vs time over the final half of the
/// span by least squares.
inline double measure_speed(const ModelSpec& model, const LatticeState& init,
                            SpeedOptions opt = {}) {
  double level = opt.level;
  if (!std::isfinite(level))
    level = 0.5 * (init.tail_left()[opt.comp] + init.tail_right()[opt.comp]);

  IntegratorConfig cfg;
  cfg.method = StepMethod::adaptive;
  cfg.rtol = opt.rtol;
  cfg.atol = opt.atol;
  cfg.t0 = opt.t0;
  cfg.t1 = opt.t1;
  cfg.sample_every = opt.sample_every;
  Trajectory traj = integrate(model, init, cfg);

  const int edge_margin = model.radius() + 2;
  std::vector<double> ts, ps;
  double prev = detail::nearest_crossing(traj.states.front(), level, opt.comp,
                                         0.5 * (init.window_lo() + init.window_hi()));
  for (size_t i = 0; i < traj.times.size(); ++i) {
    prev = detail::nearest_crossing(traj.states[i], level, opt.comp, prev);
    if (prev < init.window_lo() + edge_margin || prev > init.window_hi() - edge_margin)
      throw std::runtime_error("measure_speed: crossing reached the window edge");
    ts.push_back(traj.times[i]);
    ps.push_back(prev);
  }

  const double t_mid = 0.5 * (opt.t0 + opt.t1);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long cnt = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] < t_mid) continue;
    sx += ts[i];
    sy += ps[i];
    sxx += ts[i] * ts[i];
    sxy += ts[i] * ps[i];
    ++cnt;
  }
  if (cnt < 4) throw std::runtime_error("measure_speed: not enough samples in the fit range");
  return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

}  // namespace latwave
