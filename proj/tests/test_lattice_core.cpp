#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "latwave/heaviside.hpp"
#include "latwave/lattice_state.hpp"
#include "latwave/model.hpp"
#include "latwave/models.hpp"
#include "latwave/weighted_norm.hpp"

#include "helpers.hpp"

using namespace latwave;
using testutil::delta_state;
using testutil::random_state;

TEST_CASE("site access is total") {
  LatticeState s(0, 2, 1);
  s.at(0)[0] = 1;
  s.at(1)[0] = 2;
  s.at(2)[0] = 3;
  s.set_tails(Vec::Zero(1), Vec::Constant(1, 9.0));
  CHECK(s.site(1)[0] == 2.0);
  CHECK(s.site(-5)[0] == 0.0);
  CHECK(s.site(100)[0] == 9.0);
  CHECK_THROWS_AS(s.at(5), std::out_of_range);
}

TEST_CASE("shift translates the window and obeys the group law") {
  LatticeState d = delta_state(0, 1.0, -3, 3);
  CHECK(max_abs_diff(shift(d, 0), d) == 0.0);
  CHECK(shift(d, 1).site(1)[0] == 1.0);
  CHECK(shift(d, 1).site(0)[0] == 0.0);
  CHECK(max_abs_diff(shift(shift(d, 3), -3), d) == 0.0);
}

TEST_CASE("apply_linear matches the discrete Laplacian stencil") {
  ModelSpec m = make_nagumo(1.0, 0.3);
  LatticeState c = LatticeState::constant(-4, 4, Vec::Constant(1, 5.0));
  CHECK(sup_norm(apply_linear(m, c)) == 0.0);

  LatticeState d = delta_state(0, 1.0, -3, 3);
  LatticeState ld = apply_linear(m, d);
  CHECK(ld.site(-1)[0] == 1.0);
  CHECK(ld.site(0)[0] == -2.0);
  CHECK(ld.site(1)[0] == 1.0);
  CHECK(ld.site(2)[0] == 0.0);

  ModelSpec mh = make_nagumo(0.5, 0.3);
  LatticeState lh = apply_linear(mh, d);
  CHECK(lh.site(-1)[0] == 4.0);
  CHECK(lh.site(0)[0] == -8.0);
  CHECK(lh.site(1)[0] == 4.0);
}

TEST_CASE("apply_nonlinearity evaluates the cubic pointwise") {
  ModelSpec m = make_nagumo(1.0, 0.25);
  LatticeState z(-2, 2, 1);
  CHECK(sup_norm(apply_nonlinearity(m, z)) == 0.0);

  LatticeState one = delta_state(0, 1.0, -2, 2);
  CHECK(apply_nonlinearity(m, one).site(0)[0] == 0.0);

  LatticeState half = delta_state(0, 0.5, -2, 2);
  CHECK(apply_nonlinearity(m, half).site(0)[0] == Catch::Approx(0.0625).margin(1e-15));
}

TEST_CASE("rhs_full vanishes on equilibria") {
  for (const ModelSpec& m : builtin_models()) {
    for (const Vec& e : m.equilibria) {
      LatticeState s = LatticeState::constant(-5, 5, e);
      CHECK(sup_norm(rhs_full(m, s)) < 1e-13);
    }
  }
  ModelSpec m = make_nagumo(1.0, 0.3);
  LatticeState mid = LatticeState::constant(-5, 5, Vec::Constant(1, 0.3));
  CHECK(sup_norm(rhs_full(m, mid)) < 1e-15);
}

TEST_CASE("rhs_embedded reduces and sums correctly") {
  ModelSpec m = make_nagumo(1.0, 0.3);
  std::mt19937_64 rng(7);

  SECTION("x_plus identically zero decouples") {
    LatticeState xm = random_state(rng, -6, 6, 1, 0.4);
    LatticeState xp(-6, 6, 1);
    auto [fm, fp] = rhs_embedded(m, xm, xp, 0.3, 0.5);
    CHECK(max_abs_diff(fm, rhs_full(m, xm)) < 1e-15);
    CHECK(sup_norm(fp) == 0.0);
  }

  SECTION("components sum to the full right-hand side") {
    for (int trial = 0; trial < 20; ++trial) {
      LatticeState xm = random_state(rng, -8, 8, 1, 0.7);
      LatticeState xp = random_state(rng, -8, 8, 1, 0.7);
      const double t = 3.0 * testutil::uniform_pm1(rng);
      auto [fm, fp] = rhs_embedded(m, xm, xp, t, 0.25);
      CHECK(max_abs_diff(fm + fp, rhs_full(m, xm + xp)) < 1e-13);
    }
  }

  SECTION("multi-functional model keeps the sum identity") {
    ModelSpec j2 = testutil::j2_model();
    for (int trial = 0; trial < 10; ++trial) {
      LatticeState xm = random_state(rng, -8, 8, 1, 0.7);
      LatticeState xp = random_state(rng, -8, 8, 1, 0.7);
      auto [fm, fp] = rhs_embedded(j2, xm, xp, 1.0, -0.4);
      CHECK(max_abs_diff(fm + fp, rhs_full(j2, xm + xp)) < 1e-13);
    }
  }

  SECTION("disjoint supports produce no interaction") {
    LatticeState xm = delta_state(-10, 0.3, -12, 12);
    LatticeState xp = delta_state(10, 0.3, -12, 12);
    LatticeState cross = coupling_term(m, xm, xp);
    CHECK(sup_norm(cross) == 0.0);
  }
}

TEST_CASE("weighted norm definition and flags") {
  CHECK(WeightedNorm{0.7}(delta_state(0, 1.0, -3, 3)) == 2.0);
  CHECK(WeightedNorm{std::log(2.0)}(delta_state(1, 1.0, -3, 3)) == Catch::Approx(3.0));

  SECTION("b = 0 is twice the sup norm") {
    std::mt19937_64 rng(29);
    LatticeState x = random_state(rng, -6, 6, 2);
    CHECK(WeightedNorm{0.0}(x) == 2.0 * sup_norm(x));
  }

  LatticeState t(-3, 3, 1);
  t.set_tails(Vec::Zero(1), Vec::Ones(1));
  CHECK(std::isinf(WeightedNorm{0.5}(t)));
  CHECK(WeightedNorm{-0.5}(t) < std::numeric_limits<double>::infinity());
}

TEST_CASE("weighted norm monotonicity and product bound") {
  std::mt19937_64 rng(11);
  WeightedNorm wn{0.37};
  for (int trial = 0; trial < 200; ++trial) {
    LatticeState u = random_state(rng, -10, 10, 1);
    LatticeState v = random_state(rng, -10, 10, 1);
    LatticeState uv = sitewise_product(u, v);
    CHECK(wn(uv) <= wn(u) * sup_norm(v) * (1.0 + 1e-12) + 1e-12);

    // sitewise domination implies norm domination
    LatticeState big = u;
    for (double& val : big.raw()) val *= 1.0 + std::abs(testutil::uniform_pm1(rng));
    CHECK(wn(u) <= wn(big) * (1.0 + 1e-12));
  }
}

TEST_CASE("heaviside masks partition the lattice") {
  HeavisideCutoff right{0.0, MaskSide::right, 0.0};
  HeavisideCutoff left{0.0, MaskSide::left, 0.0};
  LatticeState one = LatticeState::constant(-5, 5, Vec::Ones(1));

  LatticeState r = apply_cutoff(right, one);
  LatticeState l = apply_cutoff(left, one);
  CHECK(r.site(1)[0] == 1.0);
  CHECK(r.site(0)[0] == 0.0);  // boundary site belongs to the left mask
  CHECK(l.site(0)[0] == 1.0);
  CHECK(l.site(1)[0] == 0.0);
  CHECK(max_abs_diff(r + l, one) == 0.0);

  SECTION("partition and idempotence at many times") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const double cb = testutil::uniform_pm1(rng);
      const double t = 4.0 * testutil::uniform_pm1(rng);
      if (std::abs(cb * t) > 4.0) continue;
      LatticeState x = random_state(rng, -10, 10, 2);
      x.set_tails(Vec::Zero(2), Vec::Zero(2));
      HeavisideCutoff hl{cb, MaskSide::left, t}, hr{cb, MaskSide::right, t};
      CHECK(max_abs_diff(apply_cutoff(hl, x) + apply_cutoff(hr, x), x) == 0.0);
      CHECK(max_abs_diff(apply_cutoff(hl, apply_cutoff(hl, x)), apply_cutoff(hl, x)) == 0.0);
    }
  }

  SECTION("left cutoff factors over sitewise products") {
    std::mt19937_64 rng(5);
    LatticeState x = random_state(rng, -6, 6, 1);
    LatticeState y = random_state(rng, -6, 6, 1);
    HeavisideCutoff hl{0.4, MaskSide::left, 2.0};
    CHECK(max_abs_diff(apply_cutoff(hl, sitewise_product(x, y)),
                       sitewise_product(apply_cutoff(hl, x), apply_cutoff(hl, y))) == 0.0);
  }
}

TEST_CASE("shift equivariance of the model operators") {
  std::mt19937_64 rng(13);
  std::vector<ModelSpec> models = {make_nagumo(1.0, 0.3), testutil::j2_model(),
                                   make_convolution(0.5, 4, 0.3), make_fhn(0.2, 1.0, 0.1, 2.0)};
  for (const ModelSpec& m : models) {
    for (int k = -5; k <= 5; ++k) {
      LatticeState x = random_state(rng, -7, 7, m.n, 0.6);
      CHECK(max_abs_diff(shift(apply_linear(m, x), k), apply_linear(m, shift(x, k))) == 0.0);
      CHECK(max_abs_diff(shift(rhs_full(m, x), k), rhs_full(m, shift(x, k))) == 0.0);
    }
  }
}

TEST_CASE("builtin model zoo") {
  CHECK(builtin_models().size() >= 4);

  ModelSpec nag = make_nagumo(1.0, 0.25);
  REQUIRE(nag.equilibria.size() == 3);
  CHECK(nag.equilibria[0][0] == 0.0);
  CHECK(nag.equilibria[1][0] == 0.25);
  CHECK(nag.equilibria[2][0] == 1.0);

  ModelSpec tri = make_tristable(1.0, -0.2, 0.2);
  bool has_m1 = false, has_0 = false, has_1 = false;
  for (const Vec& e : tri.equilibria) {
    has_m1 = has_m1 || e[0] == -1.0;
    has_0 = has_0 || e[0] == 0.0;
    has_1 = has_1 || e[0] == 1.0;
  }
  CHECK((has_m1 && has_0 && has_1));

  ModelSpec fhn = make_fhn(0.1, 5.0, 0.1, 2.0);
  LatticeState rest = LatticeState::constant(-4, 4, Vec::Zero(2));
  CHECK(sup_norm(rhs_full(fhn, rest)) == 0.0);

  CHECK_THROWS_AS(make_nagumo(1.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(make_convolution(1.2, 4, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(make_fhn(-0.1, 5.0, 0.1, 2.0), std::invalid_argument);

  SECTION("convolution kernel truncation is recorded and L annihilates constants") {
    ModelSpec conv = make_convolution(0.4, 5, 0.3);
    CHECK(conv.params.at("truncation_mass") == Catch::Approx(std::pow(0.4, 5)));
    LatticeState c = LatticeState::constant(-10, 10, Vec::Constant(1, 2.5));
    CHECK(sup_norm(apply_linear(conv, c)) < 1e-15);
  }
}
