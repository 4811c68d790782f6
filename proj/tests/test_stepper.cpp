#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latwave/models.hpp"
#include "latwave/stepper.hpp"
#include "latwave/wave_solver.hpp"

#include "helpers.hpp"

using namespace latwave;

namespace {

LatticeState tanh_front(const ModelSpec& m, int lo, int hi, double center, double width,
                        const Vec& a, const Vec& w) {
  LatticeState x(lo, hi, m.n);
  x.set_tails(a, w);
  for (int j = lo; j <= hi; ++j) {
    const double s = 0.5 * (1.0 + std::tanh((j - center) / width));
    x.set_site(j, a + s * (w - a));
  }
  return x;
}

const WaveProfile& cheap_profile() {
  static WaveProfile p = [] {
    ModelSpec m = make_nagumo(1.0, 0.3);
    WaveProfile seed = make_seed_front(m, Vec::Ones(1), Vec::Zero(1), 2.0, 0.28, 20.0, 16);
    SolveResult r = solve_profile(m, seed);
    REQUIRE(r.status == SolveStatus::converged);
    certify_decay(r.profile);
    return r.profile;
  }();
  return p;
}

}  // namespace

TEST_CASE("equilibrium initial data stays put exactly") {
  ModelSpec m = make_nagumo(1.0, 0.3);
  for (const Vec& e : m.equilibria) {
    LatticeState x0 = LatticeState::constant(-10, 10, e);
    IntegratorConfig cfg;
    cfg.t1 = 5.0;
    Trajectory tr = integrate(m, x0, cfg);
    CHECK(max_abs_diff(tr.states.back(), x0) == 0.0);

    cfg.method = StepMethod::rk4;
    cfg.dt = 0.05;
    Trajectory tr2 = integrate(m, x0, cfg);
    CHECK(max_abs_diff(tr2.states.back(), x0) == 0.0);
  }
}

TEST_CASE("tails must be equilibria") {
  ModelSpec m = make_nagumo(1.0, 0.3);
  LatticeState bad = LatticeState::constant(-5, 5, Vec::Constant(1, 0.4));
  IntegratorConfig cfg;
  cfg.t1 = 1.0;
  CHECK_THROWS_AS(integrate(m, bad, cfg), std::invalid_argument);
}

TEST_CASE("fixed-step RK4 shows fourth-order self-convergence") {
  ModelSpec m = make_nagumo(1.0, 0.3);
  LatticeState x0 = tanh_front(m, -15, 15, 0.0, 1.5, Vec::Ones(1), Vec::Zero(1));

  auto terminal = [&](double dt) {
    IntegratorConfig cfg;
    cfg.method = StepMethod::rk4;
    cfg.dt = dt;
    cfg.t1 = 1.0;
    return integrate(m, x0, cfg).states.back();
  };
  LatticeState ref = terminal(1.0 / 512.0);
  const double e1 = max_abs_diff(terminal(1.0 / 8.0), ref);
  const double e2 = max_abs_diff(terminal(1.0 / 16.0), ref);
  const double order = std::log2(e1 / e2);
  INFO("errors " << e1 << " " << e2 << " order " << order);
  CHECK(order >= 3.7);
}

TEST_CASE("profile advected by one site over one period") {
  const WaveProfile& p = cheap_profile();
  const ModelSpec& m = p.model;
  LatticeState x0 = sample_profile(p, 0.0, -30, 30);
  IntegratorConfig cfg;
  cfg.t1 = 1.0 / p.c;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;
  Trajectory tr = integrate(m, x0, cfg);
  LatticeState shifted = shift(x0, 1);
  double err = 0.0;
  for (int j = -25; j <= 25; ++j)
    err = std::max(err, std::abs(tr.states.back().site_comp(j, 0) - shifted.site_comp(j, 0)));
  CHECK(err < 2e-6);
}

TEST_CASE("embedded system with vanishing second component decouples") {
  ModelSpec m = make_nagumo(1.0, 0.7);
  WaveProfile seed = make_seed_front(m, Vec::Ones(1), Vec::Zero(1), 2.0, -0.28, 20.0, 16);
  SolveResult r = solve_profile(m, seed);
  REQUIRE(r.status == SolveStatus::converged);
  LatticeState xm0 = sample_profile(r.profile, -5.0, -25, 25);
  LatticeState xp0(-25, 25, 1);

  IntegratorConfig cfg;
  cfg.t1 = 4.0;
  cfg.sample_every = 1.0;

  SECTION("plus component stays zero; minus equals the plain run") {
    PairTrajectory pt = integrate_embedded(m, xm0, xp0, 0.0, cfg);
    for (const auto& [xm, xp] : pt.states) CHECK(sup_norm(xp) == 0.0);
    Trajectory plain = integrate(m, xm0, cfg);
    CHECK(max_abs_diff(pt.states.back().first, plain.states.back()) < 1e-8);
  }

  SECTION("moving seam events do not degrade the solution") {
    PairTrajectory pt = integrate_embedded(m, xm0, xp0, 0.45, cfg);
    Trajectory plain = integrate(m, xm0, cfg);
    CHECK(max_abs_diff(pt.states.back().first, plain.states.back()) < 1e-8);
    CHECK(pt.stats.accepted > plain.stats.accepted);  // seam clipping adds steps
  }
}

TEST_CASE("embedded pair sums to the direct flow") {
  ModelSpec m = make_nagumo(1.0, 0.7);
  WaveProfile seed = make_seed_front(m, Vec::Ones(1), Vec::Zero(1), 2.0, -0.28, 20.0, 16);
  SolveResult res = solve_profile(m, seed);
  REQUIRE(res.status == SolveStatus::converged);
  WaveProfile pm = res.profile;
  WaveProfile pp = reflect(pm);

  LatticeState x0 = sample_profile(pm, -8.0, -30, 30) + sample_profile(pp, 8.0, -30, 30);
  x0.set_tails(pm.alpha, pp.omega);
  LatticeState xm0 = apply_cutoff({0.0, MaskSide::left, 0.0}, x0);
  LatticeState xp0 = apply_cutoff({0.0, MaskSide::right, 0.0}, x0);

  IntegratorConfig cfg;
  cfg.t1 = 6.0;
  cfg.sample_every = 1.0;
  PairTrajectory pt = integrate_embedded(m, xm0, xp0, 0.0, cfg);

  SECTION("within integrator tolerance of an independent direct run") {
    Trajectory direct = integrate(m, x0, cfg);
    for (size_t i = 0; i < pt.states.size(); ++i) {
      const auto& [xm, xp] = pt.states[i];
      CHECK(max_abs_diff(xm + xp, direct.states[i]) < 1e-7);
    }
  }

  SECTION("replaying the pair's steps reproduces the sum to round-off") {
    Trajectory replay = integrate_replay(m, x0, cfg, pt.steps);
    for (size_t i = 0; i < pt.states.size(); ++i) {
      const auto& [xm, xp] = pt.states[i];
      CHECK(max_abs_diff(xm + xp, replay.states[i]) < 1e-12);
    }
  }
}

TEST_CASE("variational flow is linear") {
  const WaveProfile& p = cheap_profile();
  const ModelSpec& m = p.model;
  std::mt19937_64 rng(23);
  IntegratorConfig cfg;
  cfg.t1 = 2.0;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;

  LatticeState zero(-20, 20, 1);
  CHECK(sup_norm(integrate_variational(m, p, zero, cfg).states.back()) == 0.0);

  LatticeState y1 = testutil::random_state(rng, -20, 20, 1, 1.0);
  LatticeState y2 = testutil::random_state(rng, -20, 20, 1, 1.0);
  const double a = 0.7, b = -1.3;
  LatticeState combo = scaled(y1, a) + scaled(y2, b);
  LatticeState lhs = integrate_variational(m, p, combo, cfg).states.back();
  LatticeState rhs = scaled(integrate_variational(m, p, y1, cfg).states.back(), a) +
                     scaled(integrate_variational(m, p, y2, cfg).states.back(), b);
  CHECK(max_abs_diff(lhs, rhs) < 100 * (cfg.rtol + cfg.atol));
}

TEST_CASE("wave derivative is the neutral mode of the variational flow") {
  // Finer grid so the interpolated coefficients track the true wave closely
  // enough for a pointwise comparison.
  ModelSpec m = make_nagumo(1.0, 0.3);
  WaveProfile seed = make_seed_front(m, Vec::Ones(1), Vec::Zero(1), 2.0, 0.28, 25.0, 64);
  SolveResult r = solve_profile(m, seed);
  REQUIRE(r.status == SolveStatus::converged);
  const WaveProfile& p = r.profile;

  LatticeState y0 = sample_profile_deriv(p, 0.0, -30, 30);
  IntegratorConfig cfg;
  cfg.t1 = 1.0 / p.c;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-13;
  Trajectory tr = integrate_variational(m, p, y0, cfg);
  LatticeState expected = shift(y0, 1);
  double num = 0.0, den = 0.0;
  for (int j = -20; j <= 20; ++j) {
    num = std::max(num, std::abs(tr.states.back().site_comp(j, 0) - expected.site_comp(j, 0)));
    den = std::max(den, std::abs(expected.site_comp(j, 0)));
  }
  INFO("relative error " << num / den);
  CHECK(num / den < 1e-5);
}
