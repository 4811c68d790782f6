// latwave command-line tool: model zoo listing, traveling-wave solves with
// optional continuation, Floquet stability analysis, and two-wave exit
// experiments.  All outputs are plain text / CSV plus a manifest that records
// every resolved parameter and input digest.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "latwave/latwave.hpp"

namespace fs = std::filesystem;
using namespace latwave;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_solver = 3;
constexpr int exit_verdict_fail = 4;
constexpr int exit_pinned = 5;
constexpr int exit_indeterminate = 6;

fs::path resolve_outdir(std::string out) {
  if (const char* env = std::getenv("LATWAVE_OUT")) out = env;
  fs::path dir(out.empty() ? "." : out);
  fs::create_directories(dir);
  return dir;
}

void write_output(io::Manifest& mf, const fs::path& dir, const std::string& name,
                  const std::string& content) {
  io::atomic_write((dir / name).string(), content);
  mf.outputs.push_back(name);
}

std::map<std::string, double> parse_params(const std::vector<std::string>& kvs) {
  std::map<std::string, double> out;
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("expected key=value parameter, got '" + kv + "'");
    out[kv.substr(0, eq)] = io::parse_double(kv.substr(eq + 1));
  }
  return out;
}

Vec parse_vec(const std::string& csv, int n) {
  Vec v(n);
  std::stringstream ss(csv);
  std::string item;
  for (int k = 0; k < n; ++k) {
    if (!std::getline(ss, item, ',')) throw std::invalid_argument("bad vector '" + csv + "'");
    v[k] = io::parse_double(item);
  }
  return v;
}

int cmd_models(bool as_json) {
  if (as_json) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& fam : model_families()) {
      nlohmann::json params = nlohmann::json::object();
      for (const auto& [k, v] : fam.param_defaults) params[k] = v;
      out.push_back({{"name", fam.name}, {"summary", fam.summary}, {"params", params}});
    }
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& fam : model_families()) {
      std::cout << fam.name << ": " << fam.summary << "\n  defaults:";
      for (const auto& [k, v] : fam.param_defaults) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        std::cout << " " << k << "=" << buf;
      }
      std::cout << "\n";
    }
  }
  return exit_ok;
}

struct SolveWaveArgs {
  std::string family = "nagumo";
  std::vector<std::string> params;
  std::string model_file;
  std::string from, to;  // boundary values, comma-separated per component
  double xi = 40.0;
  int m = 16;
  double c0 = std::numeric_limits<double>::quiet_NaN();
  double width = 2.0;
  std::string phase = "value";
  double seed_sim_t = 0.0;  // > 0: seed from a direct-simulation snapshot
  std::string cont;         // param:from:to[:step]
  std::string out = "out";
};

// Family-specific default front orientation, chosen so the standard
// benchmark fronts come out with the conventional speed signs.
void default_orientation(const ModelSpec& model, Vec& a, Vec& w) {
  if (model.name == "tristable") {
    a = Vec::Zero(1);
    w = Vec::Ones(1);
  } else if (model.n == 1) {
    a = Vec::Ones(1);
    w = Vec::Zero(1);
  } else {
    a = Vec::Zero(model.n);
    w = Vec::Zero(model.n);
  }
}

int cmd_solve_wave(const SolveWaveArgs& args) {
  io::Manifest mf;
  mf.command = "solve-wave";
  mf.version = version_string;

  ModelSpec model;
  if (!args.model_file.empty()) {
    const std::string text = io::read_file(args.model_file);
    model = io::model_from_text(text);
    mf.input(args.model_file, text);
  } else {
    model = make_model(args.family, parse_params(args.params));
  }
  for (const auto& [k, v] : model.params) mf.param("model." + k, v);
  mf.param("model.family", model.name);
  mf.param("xi", args.xi);
  mf.param("m", static_cast<double>(args.m));
  mf.param("phase", args.phase);

  Vec from(model.n), to(model.n);
  default_orientation(model, from, to);
  if (!args.from.empty()) from = parse_vec(args.from, model.n);
  if (!args.to.empty()) to = parse_vec(args.to, model.n);
  mf.param("from", io::fmt(from[0]));
  mf.param("to", io::fmt(to[0]));

  double c0 = args.c0;
  if (!std::isfinite(c0)) c0 = 0.2;

  WaveProfile seed;
  if (args.seed_sim_t > 0.0) {
    // launch front-like data, snapshot, recenter at the mid-level crossing
    const int span = static_cast<int>(std::ceil(args.xi + std::abs(c0) * args.seed_sim_t + 20));
    LatticeState x0(-span, span, model.n);
    x0.set_tails(from, to);
    for (int j = -span; j <= span; ++j) x0.set_site(j, j < 0 ? from : to);
    IntegratorConfig ic;
    ic.rtol = 1e-8;
    ic.atol = 1e-10;
    ic.t1 = args.seed_sim_t;
    Trajectory tr = integrate(model, x0, ic);
    const LatticeState& snap = tr.states.back();
    const double level = 0.5 * (from[0] + to[0]);
    double center = 0.0;
    for (int j = snap.window_lo(); j < snap.window_hi(); ++j) {
      const double a = snap.site_comp(j, 0) - level, b = snap.site_comp(j + 1, 0) - level;
      if (a == 0.0 || a * b < 0.0) {
        center = j + a / (a - b);
        break;
      }
    }
    seed = make_seed_from_state(model, snap, center, c0, args.xi, args.m);
    mf.param("seed", "simulation-snapshot");
    mf.param("seed_sim_t", args.seed_sim_t);
  } else {
    seed = make_seed_front(model, from, to, args.width, c0, args.xi, args.m);
    mf.param("seed", "tanh-front");
  }

  PhaseCondition pc;
  pc.kind = args.phase == "integral" ? PhaseCondition::Kind::integral
                                     : PhaseCondition::Kind::value;

  const fs::path dir = resolve_outdir(args.out);

  if (!args.cont.empty()) {
    // param:from:to[:step]
    std::vector<std::string> parts;
    std::stringstream ss(args.cont);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() < 3) throw std::invalid_argument("--continue expects param:from:to[:step]");
    const std::string pname = parts[0];
    const double p0 = io::parse_double(parts[1]);
    const double p1 = io::parse_double(parts[2]);
    ContinuationOptions co;
    co.phase = pc;
    if (parts.size() > 3) co.step0 = co.step_max = io::parse_double(parts[3]);
    mf.param("continue", args.cont);

    const std::string fam_name = args.model_file.empty() ? args.family : model.name;
    auto base_params = model.params;
    base_params.erase("truncation_mass");
    auto model_of = [&](double p) {
      auto ps = base_params;
      ps[pname] = p;
      return make_model(fam_name, ps);
    };
    ContinuationRun run = continue_branch(model_of, pname, seed, p0, p1, co);
    write_output(mf, dir, "branch.csv", io::branch_csv(run));
    for (auto it = run.points.rbegin(); it != run.points.rend(); ++it)
      if (it->profile) {
        write_output(mf, dir, "profile.profile", io::profile_to_text(*it->profile));
        break;
      }
    write_output(mf, dir, "manifest.txt", mf.text());
    std::cout << "solve-wave continuation: " << run.message << " (" << run.points.size()
              << " points)\n";
    bool any_profile = false;
    for (const auto& bp : run.points) any_profile = any_profile || bp.profile != nullptr;
    if (!any_profile) return run.hit_pinning ? exit_pinned : exit_solver;
    return exit_ok;
  }

  SolveResult res = solve_profile(model, seed, pc);
  std::cout << "solve-wave: " << to_string(res.status) << " c=" << io::fmt(res.c) << " ("
            << res.message << ")\n";
  if (res.status == SolveStatus::pinned) return exit_pinned;
  if (res.status != SolveStatus::converged) return exit_solver;

  DecayFit df = certify_decay(res.profile);
  if (!df.ok) {
    std::cerr << "decay certification failed: " << df.message << "\n";
    return exit_solver;
  }
  res.profile.model.default_b = res.profile.default_b;
  mf.param("c", res.profile.c);
  mf.param("decay_left", res.profile.decay_left);
  mf.param("decay_right", res.profile.decay_right);
  mf.param("default_b", res.profile.default_b);
  write_output(mf, dir, "profile.profile", io::profile_to_text(res.profile));
  write_output(mf, dir, "manifest.txt", mf.text());
  return exit_ok;
}

struct FloquetArgs {
  std::string profile;
  double b = std::numeric_limits<double>::quiet_NaN();
  std::string window;  // lo:hi
  std::string b_sweep;
  int steps = 1000;
  std::string out = "out";
};

int cmd_floquet(const FloquetArgs& args) {
  io::Manifest mf;
  mf.command = "floquet";
  mf.version = version_string;

  const std::string ptext = io::read_file(args.profile);
  WaveProfile prof = io::profile_from_text(ptext);
  mf.input(args.profile, ptext);

  const double b = std::isfinite(args.b) ? args.b : prof.default_b;
  int lo = static_cast<int>(std::floor(prof.xi_min)) - 10;
  int hi = static_cast<int>(std::ceil(prof.xi_max())) + 10;
  if (!args.window.empty()) {
    const auto colon = args.window.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("--window expects lo:hi");
    lo = static_cast<int>(io::parse_double(args.window.substr(0, colon)));
    hi = static_cast<int>(io::parse_double(args.window.substr(colon + 1)));
  }
  mf.param("b", b);
  mf.param("window_lo", static_cast<double>(lo));
  mf.param("window_hi", static_cast<double>(hi));
  mf.param("steps_per_period", static_cast<double>(args.steps));

  FloquetOptions fopt;
  fopt.steps_per_period = args.steps;
  VerdictTolerances tol;

  MonodromyMatrix M = build_monodromy(prof.model, prof, lo, hi, fopt);
  const fs::path dir = resolve_outdir(args.out);

  if (!args.b_sweep.empty()) {
    std::ostringstream csv;
    csv << "b,re,im,modulus,artifact\n";
    std::stringstream ss(args.b_sweep);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const double bs = io::parse_double(item);
      FloquetReport r = spectrum(conjugate_weight(M, bs));
      const size_t top = std::min<size_t>(r.eigenvalues.size(), 20);
      for (size_t i = 0; i < top; ++i)
        csv << io::fmt(bs) << "," << io::fmt(r.eigenvalues[i].real()) << ","
            << io::fmt(r.eigenvalues[i].imag()) << "," << io::fmt(std::abs(r.eigenvalues[i]))
            << "," << (r.artifact[i] ? 1 : 0) << "\n";
    }
    write_output(mf, dir, "spectrum_vs_b.csv", csv.str());
    mf.param("b_sweep", args.b_sweep);
  }

  FloquetReport rep = spectrum(conjugate_weight(M, b));
  stability_verdict(rep, prof, tol);
  write_output(mf, dir, "report.txt", io::floquet_report_text(rep, tol));
  write_output(mf, dir, "spectrum.csv", io::spectrum_csv(rep));
  write_output(mf, dir, "manifest.txt", mf.text());
  std::cout << "floquet: verdict=" << to_string(rep.verdict)
            << " leading=" << io::fmt(rep.leading.real()) << "+" << io::fmt(rep.leading.imag())
            << "i gap=" << io::fmt(rep.spectral_gap) << " lambda=" << io::fmt(rep.lambda_decay)
            << "\n";
  for (const auto& r : rep.reasons) std::cout << "  reason: " << r << "\n";
  if (rep.verdict == FloquetReport::Verdict::pass) return exit_ok;
  if (rep.verdict == FloquetReport::Verdict::indeterminate) return exit_indeterminate;
  return exit_verdict_fail;
}

struct ExitArgs {
  std::string config;
  std::string out = "out";
  int jobs = 1;
  bool allow_uncertified = false;
};

struct ExitFileConfig {
  std::string profile_minus, profile_plus;
  ExitConfig cfg;
  bool sweep_mode = false;
  std::vector<double> sweep_delta, sweep_tau_star;
  std::vector<uint64_t> sweep_seeds{1};
  bool lambda_given = false;
};

ExitFileConfig parse_exit_config(const std::string& text) {
  ExitFileConfig out;
  io::detail::LineReader rd(text);
  std::string line;
  if (!rd.next(line) || line != "latwave-exit v1")
    throw std::invalid_argument("exit config: bad header (want 'latwave-exit v1')");
  while (rd.next(line)) {
    auto tk = io::detail::tokens(line);
    const std::string& key = tk[0];
    auto num = [&](size_t i) { return io::parse_double(tk.at(i)); };
    if (key == "profile_minus") {
      out.profile_minus = tk.at(1);
    } else if (key == "profile_plus") {
      out.profile_plus = tk.at(1);
    } else if (key == "tau_minus") {
      out.cfg.tau_minus = num(1);
    } else if (key == "tau_plus") {
      out.cfg.tau_plus = num(1);
    } else if (key == "tau_star") {
      out.cfg.tau_star = num(1);
    } else if (key == "delta") {
      out.cfg.delta = num(1);
    } else if (key == "perturbation") {
      out.cfg.pert.shape = perturbation_shape_from(tk.at(1));
    } else if (key == "perturb_site") {
      out.cfg.pert.site = num(1);
    } else if (key == "perturb_width") {
      out.cfg.pert.width = num(1);
    } else if (key == "seed") {
      out.cfg.pert.seed = static_cast<uint64_t>(num(1));
    } else if (key == "t_end") {
      out.cfg.t_end = num(1);
    } else if (key == "b") {
      if (tk.at(1) != "auto") out.cfg.b = num(1);
    } else if (key == "window") {
      if (tk.at(1) != "auto") {
        out.cfg.window_lo = static_cast<int>(num(1));
        out.cfg.window_hi = static_cast<int>(num(2));
      }
    } else if (key == "rtol") {
      out.cfg.rtol = num(1);
    } else if (key == "atol") {
      out.cfg.atol = num(1);
    } else if (key == "sample_every") {
      if (tk.at(1) != "auto") out.cfg.sample_every = num(1);
    } else if (key == "lambda") {
      if (tk.at(1) != "auto") {
        out.cfg.lambda = num(1);
        out.lambda_given = true;
      }
    } else if (key == "sweep_delta") {
      out.sweep_mode = true;
      for (size_t i = 1; i < tk.size(); ++i) out.sweep_delta.push_back(num(i));
    } else if (key == "sweep_tau_star") {
      out.sweep_mode = true;
      for (size_t i = 1; i < tk.size(); ++i) out.sweep_tau_star.push_back(num(i));
    } else if (key == "sweep_seeds") {
      out.sweep_seeds.clear();
      for (size_t i = 1; i < tk.size(); ++i)
        out.sweep_seeds.push_back(static_cast<uint64_t>(num(i)));
    } else {
      throw std::invalid_argument("exit config: unknown key '" + key + "'");
    }
  }
  return out;
}

int cmd_exit_run(const ExitArgs& args) {
  io::Manifest mf;
  mf.command = "exit";
  mf.version = version_string;

  const std::string ctext = io::read_file(args.config);
  mf.input(args.config, ctext);
  ExitFileConfig fc = parse_exit_config(ctext);
  const std::string pm_text = io::read_file(fc.profile_minus);
  const std::string pp_text = io::read_file(fc.profile_plus);
  mf.input(fc.profile_minus, pm_text);
  mf.input(fc.profile_plus, pp_text);
  fc.cfg.pm = io::profile_from_text(pm_text);
  fc.cfg.pp = io::profile_from_text(pp_text);

  // Stability gate: both waves must carry a passing spectral verdict before
  // an exit experiment is meaningful (override recorded in the manifest).
  mf.param("certification", args.allow_uncertified ? "skipped" : "enforced");
  if (!args.allow_uncertified) {
    double lambda_min = std::numeric_limits<double>::infinity();
    for (WaveProfile* p : {&fc.cfg.pm, &fc.cfg.pp}) {
      const int lo = static_cast<int>(std::floor(p->xi_min)) - 10;
      const int hi = static_cast<int>(std::ceil(p->xi_max())) + 10;
      FloquetReport rep = analyze_wave(p->model, *p, lo, hi, p->default_b);
      if (rep.verdict != FloquetReport::Verdict::pass) {
        std::cerr << "exit: profile failed the stability verdict (" << to_string(rep.verdict)
                  << ")\n";
        for (const auto& r : rep.reasons) std::cerr << "  reason: " << r << "\n";
        return exit_verdict_fail;
      }
      lambda_min = std::min(lambda_min, rep.lambda_decay);
      if (p == &fc.cfg.pm) {
        fc.cfg.nu_minus = rep.leading_left;
        fc.cfg.nu_lo_minus = lo;
      } else {
        fc.cfg.nu_plus = rep.leading_left;
        fc.cfg.nu_lo_plus = lo;
      }
    }
    if (!fc.lambda_given) fc.cfg.lambda = lambda_min;
  }

  fc.cfg.validate();
  auto [wlo, whi] = fc.cfg.window();
  mf.param("tau_minus", fc.cfg.tau_minus);
  mf.param("tau_plus", fc.cfg.tau_plus);
  mf.param("tau_star", fc.cfg.tau_star);
  mf.param("delta", fc.cfg.delta);
  mf.param("t_end", fc.cfg.t_end);
  mf.param("b", fc.cfg.b_eff());
  mf.param("window_lo", static_cast<double>(wlo));
  mf.param("window_hi", static_cast<double>(whi));
  mf.param("rtol", fc.cfg.rtol);
  mf.param("atol", fc.cfg.atol);
  mf.param("sample_every", fc.cfg.cadence());
  mf.param("lambda", fc.cfg.lambda);
  mf.param("seed", static_cast<double>(fc.cfg.pert.seed));

  const fs::path dir = resolve_outdir(args.out);

  if (fc.sweep_mode) {
    if (fc.sweep_delta.empty()) fc.sweep_delta = {fc.cfg.delta};
    if (fc.sweep_tau_star.empty()) fc.sweep_tau_star = {fc.cfg.tau_plus - fc.cfg.tau_minus};
    mf.param("jobs", static_cast<double>(args.jobs));
    auto cells = sweep(fc.cfg, fc.sweep_delta, fc.sweep_tau_star, fc.sweep_seeds, args.jobs);
    write_output(mf, dir, "sweep.csv", io::sweep_csv(cells));
    write_output(mf, dir, "manifest.txt", mf.text());
    int failures = 0;
    for (const auto& c : cells) failures += c.ok ? 0 : 1;
    std::cout << "sweep: " << cells.size() - failures << "/" << cells.size() << " cells ok\n";
    return failures == 0 ? exit_ok : exit_solver;
  }

  ExitRunReport direct = run_direct(fc.cfg);
  ExitRunReport embedded = run_embedded(fc.cfg, &direct);
  ExitRunReport merged = merge_reports(direct, embedded);
  write_output(mf, dir, "report.csv", io::exit_csv(merged));
  write_output(mf, dir, "embedded.csv", io::embedded_csv(embedded));
  write_output(mf, dir, "summary.txt", io::exit_summary(merged));
  write_output(mf, dir, "plot.gnuplot", io::exit_plot_script("report.csv", merged));
  write_output(mf, dir, "manifest.txt", mf.text());
  std::cout << "exit: fitted_rate_a=" << io::fmt(merged.fitted_rate_a)
            << " r2=" << io::fmt(merged.fit_r2)
            << " embed=" << io::fmt(merged.embed_consistency)
            << " crossterm_rate=" << io::fmt(merged.crossterm_rate) << "\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latwave: traveling waves, spectral stability, and two-wave exit experiments "
               "on one-dimensional lattices"};
  app.require_subcommand(1);

  bool models_json = false;
  auto* models_cmd = app.add_subcommand("models", "list built-in model families");
  models_cmd->add_flag("--json", models_json, "machine-readable listing");

  SolveWaveArgs sw;
  auto* solve_cmd = app.add_subcommand("solve-wave", "solve a traveling-wave profile");
  solve_cmd->add_option("--model", sw.family, "model family name");
  solve_cmd->add_option("--model-file", sw.model_file, "explicit model definition file");
  solve_cmd->add_option("--param,-p", sw.params, "model parameter key=value");
  solve_cmd->add_option("--from", sw.from, "left limit (comma-separated components)");
  solve_cmd->add_option("--to", sw.to, "right limit");
  solve_cmd->add_option("--xi", sw.xi, "half-width of the profile domain");
  solve_cmd->add_option("--m", sw.m, "grid points per lattice spacing");
  solve_cmd->add_option("--c0", sw.c0, "initial speed guess");
  solve_cmd->add_option("--width", sw.width, "seed front width");
  solve_cmd->add_option("--phase", sw.phase, "phase condition: value | integral");
  solve_cmd->add_option("--seed-sim", sw.seed_sim_t,
                        "seed from a direct-simulation snapshot at this time");
  solve_cmd->add_option("--continue", sw.cont, "continuation range param:from:to[:step]");
  solve_cmd->add_option("--out,-o", sw.out, "output directory");

  FloquetArgs fa;
  auto* floq_cmd = app.add_subcommand("floquet", "spectral stability of a solved wave");
  floq_cmd->add_option("--profile", fa.profile, "profile file")->required();
  floq_cmd->add_option("--b", fa.b, "weight exponent (default: profile default_b)");
  floq_cmd->add_option("--window", fa.window, "lattice window lo:hi");
  floq_cmd->add_option("--b-sweep", fa.b_sweep, "comma-separated weights for a spectrum sweep");
  floq_cmd->add_option("--steps", fa.steps, "integration substeps per period");
  floq_cmd->add_option("--out,-o", fa.out, "output directory");

  ExitArgs ea;
  auto* exit_cmd = app.add_subcommand("exit", "two-wave exit experiment from a config file");
  exit_cmd->add_option("--config", ea.config, "run configuration file")->required();
  exit_cmd->add_option("--jobs", ea.jobs, "parallel sweep cells");
  exit_cmd->add_flag("--allow-uncertified", ea.allow_uncertified,
                     "skip the per-profile stability gate (recorded in the manifest)");
  exit_cmd->add_option("--out,-o", ea.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_validation;
  }

  try {
    if (models_cmd->parsed()) return cmd_models(models_json);
    if (solve_cmd->parsed()) return cmd_solve_wave(sw);
    if (floq_cmd->parsed()) return cmd_floquet(fa);
    if (exit_cmd->parsed()) return cmd_exit_run(ea);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_solver;
  }
  return exit_validation;
}
