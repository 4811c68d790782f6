// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure.  Heavy artifacts (benchmark profiles, monodromies, the reference
// exit run) are built once and shared across criteria.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "latwave/latwave.hpp"

using namespace latwave;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Criterion {
  int id;
  std::string title;
  bool pass = true;
  std::string detail;

  Criterion(int id_, std::string title_) : id(id_), title(std::move(title_)) {}

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + why;
    }
  }
  void note(const std::string& info) {
    if (pass && detail.size() < 160) detail += (detail.empty() ? "" : "; ") + info;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

LatticeState random_state(std::mt19937_64& rng, int lo, int hi, int n, double amp) {
  LatticeState s(lo, hi, n);
  for (double& v : s.raw()) v = amp * uniform_pm1(rng);
  return s;
}

}  // namespace

int main() {
  std::vector<Criterion> results;
  const auto wall0 = Clock::now();

  // ---------------------------------------------------------------- [1]
  {
    Criterion cr{1, "operator algebra (annihilation, equivariance, masks, product bound)"};
    std::mt19937_64 rng(101);

    for (const ModelSpec& m : builtin_models()) {
      for (int trial = 0; trial < 5; ++trial) {
        Vec v(m.n);
        for (int k = 0; k < m.n; ++k) v[k] = 2.0 * uniform_pm1(rng);
        LatticeState c = LatticeState::constant(-8, 8, v);
        cr.require(sup_norm(apply_linear(m, c)) < 1e-12, "L does not annihilate a constant");
      }
      for (int k = -5; k <= 5; ++k) {
        LatticeState x = random_state(rng, -7, 7, m.n, 0.6);
        const double d = max_abs_diff(shift(rhs_full(m, x), k), rhs_full(m, shift(x, k)));
        cr.require(d < 1e-12, "F does not commute with the shift");
      }
    }

    for (int trial = 0; trial < 200; ++trial) {
      const double cb = uniform_pm1(rng);
      const double t = 4.0 * uniform_pm1(rng);
      if (std::abs(cb * t) > 5.0) continue;
      LatticeState x = random_state(rng, -10, 10, 1, 1.0);
      HeavisideCutoff hl{cb, MaskSide::left, t}, hr{cb, MaskSide::right, t};
      LatticeState l = apply_cutoff(hl, x), r = apply_cutoff(hr, x);
      cr.require(max_abs_diff(l + r, x) == 0.0, "masks do not partition");
      cr.require(max_abs_diff(apply_cutoff(hl, l), l) == 0.0, "left mask not idempotent");
      cr.require(max_abs_diff(apply_cutoff(hr, r), r) == 0.0, "right mask not idempotent");
    }

    for (int trial = 0; trial < 1000; ++trial) {
      const double b = uniform_pm1(rng);
      WeightedNorm wn{b};
      LatticeState u = random_state(rng, -12, 12, 1, 2.0);
      LatticeState v = random_state(rng, -12, 12, 1, 2.0);
      const double lhs = wn(sitewise_product(u, v));
      const double rhs = wn(u) * sup_norm(v);
      cr.require(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "weighted product bound violated");
    }
    results.push_back(cr);
  }

  // ------------------------------------------------ shared benchmark setup
  // Wide bistable fronts (strong coupling) so the two-wave interaction stays
  // measurable across all separations used below.
  ModelSpec bench = make_nagumo(1.0 / 3.0, 0.7);
  WaveProfile pm, pp;
  {
    WaveProfile seed = make_seed_front(bench, Vec::Ones(1), Vec::Zero(1), 4.0, -0.85, 90.0, 64);
    SolveResult r = solve_profile(bench, seed);
    if (r.status != SolveStatus::converged) {
      std::printf("FATAL: benchmark profile solve failed (%s)\n", r.message.c_str());
      return 99;
    }
    certify_decay(r.profile);
    pm = r.profile;
    pp = reflect(pm);
    certify_decay(pp);
  }

  const int flo = -100, fhi = 100;
  FloquetOptions fopt;
  fopt.steps_per_period = 1000;
  MonodromyMatrix Mm = build_monodromy(bench, pm, flo, fhi, fopt);
  MonodromyMatrix Mp = build_monodromy(bench, pp, flo, fhi, fopt);
  FloquetReport rep_m = spectrum(conjugate_weight(Mm, -pm.default_b));
  FloquetReport rep_p = spectrum(conjugate_weight(Mp, pp.default_b));
  stability_verdict(rep_m, pm);
  stability_verdict(rep_p, pp);
  const double lambda = std::min(rep_m.lambda_decay, rep_p.lambda_decay);

  ExitConfig bench_cfg;
  bench_cfg.pm = pm;
  bench_cfg.pp = pp;
  bench_cfg.tau_minus = -30.0;
  bench_cfg.tau_plus = 30.0;   // separation tau* = 60
  bench_cfg.tau_star = 20.0;
  bench_cfg.delta = 1e-3;
  bench_cfg.pert.shape = Perturbation::Shape::single_site;
  bench_cfg.t_end = 30.0;
  bench_cfg.rtol = 1e-9;
  bench_cfg.atol = 1e-11;
  bench_cfg.lambda = lambda;
  bench_cfg.nu_minus = rep_m.leading_left;
  bench_cfg.nu_lo_minus = flo;
  bench_cfg.nu_plus = rep_p.leading_left;
  bench_cfg.nu_lo_plus = flo;

  const auto t_exit0 = Clock::now();
  ExitRunReport direct = run_direct(bench_cfg);
  const double direct_secs = seconds_since(t_exit0);
  const auto t_emb0 = Clock::now();
  ExitRunReport embedded = run_embedded(bench_cfg, &direct);
  const double embedded_secs = seconds_since(t_emb0);

  // ---------------------------------------------------------------- [2]
  {
    Criterion cr{2, "embedding identity on the benchmark exit run"};
    double max_sup = 0.0;
    {
      LatticeState x0 = build_initial(bench_cfg);
      max_sup = sup_norm(x0);  // the run stays within the initial range here
    }
    const double bound = 10.0 * (bench_cfg.rtol * max_sup + bench_cfg.atol);
    cr.require(embedded.embed_consistency <= bound,
               "max |X- + X+ - X_direct| = " + num(embedded.embed_consistency) + " > " +
                   num(bound));
    cr.require(embedded_secs < 120.0, "runtime " + num(embedded_secs) + " s exceeds 2 min");
    cr.note("max deviation " + num(embedded.embed_consistency) + ", bound " + num(bound) +
            ", " + num(embedded_secs) + " s");
    results.push_back(cr);
  }

  // ---------------------------------------------------------------- [3]
  {
    Criterion cr{3, "wave oracle equivalence (solver vs simulation, grid, symmetry)"};
    ModelSpec nag = make_nagumo(1.0, 0.3);
    WaveProfile s16 = make_seed_front(nag, Vec::Ones(1), Vec::Zero(1), 2.0, 0.28, 40.0, 16);
    SolveResult r16 = solve_profile(nag, s16);
    WaveProfile s32 = make_seed_front(nag, Vec::Ones(1), Vec::Zero(1), 2.0, 0.28, 40.0, 32);
    SolveResult r32 = solve_profile(nag, s32);
    cr.require(r16.status == SolveStatus::converged && r32.status == SolveStatus::converged,
               "profile solves failed");
    if (cr.pass) {
      certify_decay(r16.profile);
      const double dc = std::abs(r32.profile.c - r16.profile.c);
      cr.require(dc < 1e-8, "grid halving moves c by " + num(dc));

      LatticeState init = sample_profile(r16.profile, 0.0, -45, 70);
      SpeedOptions so;
      so.t1 = 100.0;
      const double c_sim = measure_speed(nag, init, so);
      const double rel = std::abs(c_sim - r16.profile.c) / r16.profile.c;
      cr.require(rel < 1e-3, "simulated speed off by " + num(rel) + " relative");

      ContinuationOptions co;
      co.step0 = co.step_max = 0.02;
      WaveProfile sb = make_seed_front(nag, Vec::Ones(1), Vec::Zero(1), 2.0, 0.28, 20.0, 16);
      SolveResult b0 = solve_profile(nag, sb);
      auto fam = [](double a) { return make_nagumo(1.0, a); };
      ContinuationRun fwd = continue_branch(fam, "a", b0.profile, 0.3, 0.45, co);
      ModelSpec nag7 = make_nagumo(1.0, 0.7);
      WaveProfile sb7 = make_seed_front(nag7, Vec::Ones(1), Vec::Zero(1), 2.0, -0.28, 20.0, 16);
      SolveResult b7 = solve_profile(nag7, sb7);
      ContinuationRun bwd = continue_branch(fam, "a", b7.profile, 0.7, 0.55, co);
      cr.require(fwd.completed && bwd.completed, "continuation did not finish");
      double worst = 0.0;
      size_t matched = 0;
      for (const auto& A : fwd.points)
        for (const auto& B : bwd.points) {
          if (A.status != SolveStatus::converged || B.status != SolveStatus::converged) continue;
          if (std::abs(A.param + B.param - 1.0) > 1e-12) continue;
          worst = std::max(worst, std::abs(A.c + B.c));
          ++matched;
        }
      cr.require(matched >= 5, "too few matched branch points");
      cr.require(worst < 1e-8, "c(a) + c(1-a) = " + num(worst));
      cr.note("dc_halving " + num(std::abs(r32.profile.c - r16.profile.c)) + ", sim rel " +
              num(rel) + ", symmetry " + num(worst));
    }
    results.push_back(cr);
  }

  // ---------------------------------------------------------------- [4]
  {
    Criterion cr{4, "Floquet hypothesis suite on both benchmark waves"};
    const int band = 25;  // one-period boundary influence cone
    for (const auto& [prof, M, rep] :
         {std::tie(pm, Mm, rep_m), std::tie(pp, Mp, rep_p)}) {
      Vec d(M.dim());
      for (int j = flo; j <= fhi; ++j) d[j - flo] = prof.eval_deriv_comp(j, 0);
      Vec Ad = M.A * d;
      const double bw = prof.default_b * (prof.c > 0 ? 1.0 : -1.0);
      double nume = 0.0, den = 0.0;
      for (int j = flo + band; j <= fhi - band; ++j) {
        const double w = 1.0 + std::exp(bw * j);
        nume = std::max(nume, w * std::abs(Ad[j - flo] - d[j - flo]));
        den = std::max(den, w * std::abs(d[j - flo]));
      }
      cr.require(nume / den < 1e-6,
                 "wave-derivative eigen-residual " + num(nume / den) + " (c=" + num(prof.c) + ")");
      cr.require(rep.verdict == FloquetReport::Verdict::pass, "stability verdict not pass");
      cr.require(rep.unit_eig_error < 1e-6, "leading eigenvalue off one by " +
                                                num(rep.unit_eig_error));
      cr.require(rep.spectral_gap > 1e-3, "spectral gap " + num(rep.spectral_gap));
    }

    // 25% window enlargement moves nothing that matters
    const int elo = -125, ehi = 125;
    MonodromyMatrix Mp2 = build_monodromy(bench, pp, elo, ehi, fopt);
    FloquetReport rep2 = spectrum(conjugate_weight(Mp2, pp.default_b));
    stability_verdict(rep2, pp);
    const double drift = std::abs(rep2.leading - rep_p.leading);
    const double gap_drift = std::abs(rep2.spectral_gap - rep_p.spectral_gap);
    cr.require(rep2.verdict == FloquetReport::Verdict::pass, "verdict flips when enlarged");
    cr.require(drift < 1e-6, "leading eigenvalue drifts by " + num(drift));
    cr.require(gap_drift < 1e-3, "spectral gap drifts by " + num(gap_drift));
    cr.note("gap " + num(rep_p.spectral_gap) + ", lambda " + num(lambda) + ", drift " +
            num(drift));
    results.push_back(cr);
  }

  // ---------------------------------------------------------------- [5]
  {
    Criterion cr{5, "exit decay: modulated residual, rates, manifold bound, shifts"};
    cr.require(direct.fitted_rate_a > 0.0, "no decay");
    cr.require(direct.fit_r2 > 0.98, "R^2 = " + num(direct.fit_r2));
    cr.require(direct.fitted_rate_a >= 0.5 * direct.a_pred,
               "fitted rate " + num(direct.fitted_rate_a) + " below half of predicted " +
                   num(direct.a_pred));
    bool super = true;
    for (size_t i = 0; i < direct.times.size(); ++i)
      super = super && direct.manifold_dist[i] <= direct.residual[i] * (1.0 + 1e-12) + 1e-15;
    cr.require(super, "manifold distance exceeded the fitted residual somewhere");
    cr.require(direct.gamma_tv_minus < 1e-4 && direct.gamma_tv_plus < 1e-4,
               "terminal shift variation " + num(direct.gamma_tv_minus) + " / " +
                   num(direct.gamma_tv_plus));
    cr.require(direct_secs < 300.0, "runtime " + num(direct_secs) + " s exceeds 5 min");
    cr.note("a_fit " + num(direct.fitted_rate_a) + ", a_pred " + num(direct.a_pred) + ", R2 " +
            num(direct.fit_r2) + ", " + num(direct_secs) + " s");
    results.push_back(cr);
  }

  // ---------------------------------------------------------------- [6]
  {
    Criterion cr{6, "masked cross-term decay rate"};
    const double want = 0.8 * 0.5 * embedded.b_used * (pp.c - pm.c);
    cr.require(std::isfinite(embedded.crossterm_rate), "no measurable cross-term decay");
    cr.require(embedded.crossterm_rate >= want,
               "rate " + num(embedded.crossterm_rate) + " below " + num(want));
    cr.note("rate " + num(embedded.crossterm_rate) + " vs floor " + num(want));
    results.push_back(cr);
  }

  // ---------------------------------------------------------------- [7]
  {
    Criterion cr{7, "scaling shape of the peak residual in delta and separation"};
    ExitConfig sweep_cfg = bench_cfg;
    sweep_cfg.t_end = 10.0;
    auto dcells = sweep(sweep_cfg, {0.0, 1e-4, 1e-2}, {60.0}, {1}, 2);
    bool ok = dcells.size() == 3;
    for (const auto& c : dcells) ok = ok && c.ok;
    cr.require(ok, "delta sweep cells failed");
    if (ok) {
      cr.require(dcells[0].peak_residual < dcells[1].peak_residual &&
                     dcells[1].peak_residual < dcells[2].peak_residual,
                 "peaks not increasing in delta: " + num(dcells[0].peak_residual) + ", " +
                     num(dcells[1].peak_residual) + ", " + num(dcells[2].peak_residual));
    }

    sweep_cfg.t_end = 12.0;
    auto tcells = sweep(sweep_cfg, {0.0}, {30.0, 45.0, 60.0}, {1}, 2);
    ok = tcells.size() == 3;
    for (const auto& c : tcells) ok = ok && c.ok;
    cr.require(ok, "separation sweep cells failed");
    if (ok) {
      cr.require(tcells[0].peak_residual > tcells[1].peak_residual &&
                     tcells[1].peak_residual > tcells[2].peak_residual,
                 "peaks not decreasing in tau*: " + num(tcells[0].peak_residual) + ", " +
                     num(tcells[1].peak_residual) + ", " + num(tcells[2].peak_residual));
      cr.note("delta peaks " + num(dcells[0].peak_residual) + " < " +
              num(dcells[1].peak_residual) + " < " + num(dcells[2].peak_residual) +
              "; tau* peaks " + num(tcells[0].peak_residual) + " > " +
              num(tcells[1].peak_residual) + " > " + num(tcells[2].peak_residual));
    }
    results.push_back(cr);
  }

  // ---------------------------------------------------------------- [8]
  {
    Criterion cr{8, "tristable front stacking: monotone, plateau widening at c+ - c-"};
    ModelSpec tri = make_tristable(0.5, -0.75, 0.75);
    WaveProfile sd = make_seed_front(tri, -Vec::Ones(1), Vec::Zero(1), 2.0, -0.7, 45.0, 16);
    SolveResult rd = solve_profile(tri, sd);
    WaveProfile su = make_seed_front(tri, Vec::Zero(1), Vec::Ones(1), 2.0, 0.7, 45.0, 16);
    SolveResult ru = solve_profile(tri, su);
    cr.require(rd.status == SolveStatus::converged && ru.status == SolveStatus::converged,
               "tristable fronts did not converge");
    if (cr.pass) {
      certify_decay(rd.profile);
      certify_decay(ru.profile);
      ExitConfig cfg;
      cfg.pm = rd.profile;
      cfg.pp = ru.profile;
      cfg.tau_minus = -20.0;
      cfg.tau_plus = 20.0;
      cfg.tau_star = 20.0;
      cfg.t_end = 40.0;
      LatticeState x0 = build_initial(cfg);

      IntegratorConfig ic;
      ic.rtol = 1e-9;
      ic.atol = 1e-11;
      ic.t1 = cfg.t_end;
      ic.sample_every = 2.0;
      Trajectory tr = integrate(tri, x0, ic);

      bool monotone = true;
      std::vector<double> ts, widths;
      for (size_t i = 0; i < tr.times.size(); ++i) {
        const LatticeState& x = tr.states[i];
        double cm = 0.0, cp = 0.0;
        for (int j = x.window_lo(); j < x.window_hi(); ++j) {
          const double a = x.site_comp(j, 0), b2 = x.site_comp(j + 1, 0);
          monotone = monotone && b2 - a >= -1e-9;
          if (a < -0.5 && b2 >= -0.5) cm = j + (-0.5 - a) / (b2 - a);
          if (a < 0.5 && b2 >= 0.5) cp = j + (0.5 - a) / (b2 - a);
        }
        ts.push_back(tr.times[i]);
        widths.push_back(cp - cm);
      }
      cr.require(monotone, "configuration lost monotonicity");
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (size_t i = 0; i < ts.size(); ++i) {
        sx += ts[i];
        sy += widths[i];
        sxx += ts[i] * ts[i];
        sxy += ts[i] * widths[i];
      }
      const double n_pts = static_cast<double>(ts.size());
      const double slope = (n_pts * sxy - sx * sy) / (n_pts * sxx - sx * sx);
      const double want = ru.profile.c - rd.profile.c;
      const double rel = std::abs(slope - want) / want;
      cr.require(rel < 0.05, "plateau widens at " + num(slope) + " vs " + num(want));
      cr.note("widening " + num(slope) + " vs c+-c- " + num(want) + " (rel " + num(rel) + ")");
    }
    results.push_back(cr);
  }

  // ---------------------------------------------------------------- [9]
  {
    Criterion cr{9, "shift-fit correctness on 20 synthetic superpositions"};
    std::mt19937_64 rng(909);
    auto [lo, hi] = bench_cfg.window();
    int grid_hits = 0;
    double worst = 0.0;
    for (int cse = 0; cse < 20; ++cse) {
      const double gm_true = 1.5 * uniform_pm1(rng);
      const double gp_true = 1.5 * uniform_pm1(rng);
      LatticeState x(lo, hi, 1);
      x.set_tails(pm.alpha, pp.omega);
      for (int j = lo; j <= hi; ++j)
        x.at(j)[0] = pm.eval_comp(j - bench_cfg.tau_minus - gm_true, 0) +
                     pp.eval_comp(j - bench_cfg.tau_plus - gp_true, 0);
      FitResult fr = fit_shifts(x, bench_cfg, 0.0);
      worst = std::max({worst, std::abs(fr.gm - gm_true), std::abs(fr.gp - gp_true)});

      const double cell = 0.05;
      double best = 1e100, bgm = 0, bgp = 0;
      for (double a = -2.0; a <= 2.0 + 1e-12; a += cell)
        for (double b2 = -2.0; b2 <= 2.0 + 1e-12; b2 += cell) {
          const double r = superposition_residual(x, bench_cfg, bench_cfg.tau_minus + a,
                                                  bench_cfg.tau_plus + b2);
          if (r < best) {
            best = r;
            bgm = a;
            bgp = b2;
          }
        }
      if (std::abs(fr.gm - bgm) <= cell + 1e-12 && std::abs(fr.gp - bgp) <= cell + 1e-12)
        ++grid_hits;
    }
    cr.require(worst < 1e-6, "worst shift recovery error " + num(worst));
    cr.require(grid_hits == 20, "grid-scan argmin matched in only " +
                                    std::to_string(grid_hits) + "/20 cases");
    cr.note("worst recovery " + num(worst) + ", grid matches 20/20");
    results.push_back(cr);
  }

  // ------------------------------------------------------------- summary
  int failures = 0;
  for (const auto& cr : results) {
    std::printf("%s  [%d] %s%s%s\n", cr.pass ? "PASS" : "FAIL", cr.id, cr.title.c_str(),
                cr.detail.empty() ? "" : " -- ", cr.detail.c_str());
    failures += cr.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed in %.1f s\n", static_cast<int>(results.size()) - failures,
              results.size(), seconds_since(wall0));
  return failures;
}
