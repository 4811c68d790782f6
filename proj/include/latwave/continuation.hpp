#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "latwave/wave_solver.hpp"

namespace latwave {

struct BranchPoint {
  double param = 0.0;
  double c = 0.0;
  SolveStatus status = SolveStatus::diverged;
  std::shared_ptr<const WaveProfile> profile;  // null unless converged
};

struct ContinuationRun {
  std::string parameter;
  std::vector<BranchPoint> points;
  bool hit_pinning = false;
  bool completed = false;
  std::string message;
};

struct ContinuationOptions {
  double step0 = 0.02;
  double step_min = 1e-5;
  double step_max = 0.1;
  PhaseCondition phase;
  SolveOptions solve;
};

/// Natural-parameter continuation with a secant predictor.  Failed corrector
/// solves halve the step; a pinned outcome ends the branch of traveling
/// waves and is recorded as such.
inline ContinuationRun continue_branch(const std::function<ModelSpec(double)>& model_of,
                                       const std::string& parameter, const WaveProfile& start,
                                       double p0, double p1, ContinuationOptions opt = {}) {
  ContinuationRun run;
  run.parameter = parameter;
  const double dir = p1 >= p0 ? 1.0 : -1.0;

  SolveResult first = solve_profile(model_of(p0), start, opt.phase, opt.solve);
  if (first.status != SolveStatus::converged) {
    run.message = "start point did not converge: " + first.message;
    run.points.push_back({p0, first.c, first.status, nullptr});
    run.hit_pinning = first.status == SolveStatus::pinned;
    return run;
  }
  certify_decay(first.profile);
  run.points.push_back(
      {p0, first.profile.c, SolveStatus::converged,
       std::make_shared<const WaveProfile>(first.profile)});

  double p = p0;
  double step = std::min(opt.step0, opt.step_max);
  WaveProfile current = first.profile;
  const WaveProfile* previous = nullptr;
  double p_prev = p0;
  WaveProfile prev_store;

  while (dir * (p1 - p) > 1e-12) {
    const double dp = std::min(step, dir * (p1 - p)) * dir;
    const double p_next = p + dp;

    WaveProfile seed = current;
    if (previous) {
      const double ratio = dp / (p - p_prev);
      seed.phi = current.phi + ratio * (current.phi - previous->phi);
      seed.c = current.c + ratio * (current.c - previous->c);
      seed.refresh_derivative();
    }

    SolveResult sr = solve_profile(model_of(p_next), seed, opt.phase, opt.solve);
    if (sr.status == SolveStatus::converged) {
      certify_decay(sr.profile);
      run.points.push_back({p_next, sr.profile.c, SolveStatus::converged,
                            std::make_shared<const WaveProfile>(sr.profile)});
      prev_store = current;
      previous = &prev_store;
      p_prev = p;
      current = sr.profile;
      p = p_next;
      step = std::min(step * 1.3, opt.step_max);
    } else if (sr.status == SolveStatus::pinned) {
      run.points.push_back({p_next, sr.c, SolveStatus::pinned, nullptr});
      run.hit_pinning = true;
      run.message = "pinning reached at " + parameter + " = " + std::to_string(p_next);
      return run;
    } else {
      step *= 0.5;
      if (step < opt.step_min) {
        run.message = "step underflow at " + parameter + " = " + std::to_string(p) + ": " +
                      sr.message;
        return run;
      }
    }
  }
  run.completed = true;
  run.message = "branch completed";
  return run;
}

}  // namespace latwave
