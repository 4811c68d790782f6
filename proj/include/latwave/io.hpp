#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "latwave/continuation.hpp"
#include "latwave/exit_lab.hpp"
#include "latwave/floquet.hpp"
#include "latwave/models.hpp"
#include "latwave/stepper.hpp"
#include "latwave/weighted_norm.hpp"

namespace latwave::io {

/// Shortest representation that round-trips a double exactly.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("malformed number '" + s + "'");
  }
  if (pos != s.size()) throw std::runtime_error("malformed number '" + s + "'");
  return v;
}

inline uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Write-temp-then-rename so partially written outputs never appear.
inline void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "'");
}

inline std::string digest_hex(const std::string& content) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(content)));
  return buf;
}

namespace detail {

inline std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string t;
  while (ss >> t) out.push_back(t);
  return out;
}

class LineReader {
public:
  explicit LineReader(const std::string& text) : ss_(text) {}
  bool next(std::string& line) {
    while (std::getline(ss_, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      return true;
    }
    return false;
  }

private:
  std::istringstream ss_;
};

}  // namespace detail

// ---------------------------------------------------------------- models

inline std::string model_to_text(const ModelSpec& m) {
  std::ostringstream out;
  out << "latwave-model v1\n";
  out << "name " << m.name << "\n";
  out << "n " << m.n << "\n";
  out << "g " << m.g.family;
  for (const auto& [k, v] : m.g.params) out << " " << k << "=" << fmt(v);
  out << "\n";
  for (const auto& [k, v] : m.params) out << "param " << k << " " << fmt(v) << "\n";
  auto emit_stencil = [&](const std::string& head, const Stencil& s) {
    out << head << "\n";
    for (const auto& e : s) {
      out << e.offset;
      for (int r = 0; r < e.A.rows(); ++r)
        for (int c = 0; c < e.A.cols(); ++c) out << " " << fmt(e.A(r, c));
      out << "\n";
    }
    out << "end\n";
  };
  emit_stencil("stencil", m.L);
  for (const auto& f : m.functionals) emit_stencil("functional", f);
  out << "equilibria\n";
  for (const auto& e : m.equilibria) {
    for (int k = 0; k < e.size(); ++k) out << (k ? " " : "") << fmt(e[k]);
    out << "\n";
  }
  out << "end\n";
  out << "default_b " << fmt(m.default_b) << "\n";
  return out.str();
}

inline ModelSpec model_from_reader(detail::LineReader& rd) {
  ModelSpec m;
  std::map<std::string, double> gparams;
  std::string gfamily;
  std::string line;
  if (!rd.next(line) || line != "latwave-model v1")
    throw std::runtime_error("model file: bad header");
  bool have_stencil = false;
  while (rd.next(line)) {
    if (line == "end-model") break;
    auto tk = detail::tokens(line);
    if (tk.empty()) continue;
    if (tk[0] == "name" && tk.size() == 2) {
      m.name = tk[1];
    } else if (tk[0] == "n" && tk.size() == 2) {
      m.n = static_cast<int>(parse_double(tk[1]));
    } else if (tk[0] == "g") {
      gfamily = tk.at(1);
      for (size_t i = 2; i < tk.size(); ++i) {
        auto eq = tk[i].find('=');
        if (eq == std::string::npos) throw std::runtime_error("model file: bad g parameter");
        gparams[tk[i].substr(0, eq)] = parse_double(tk[i].substr(eq + 1));
      }
    } else if (tk[0] == "param" && tk.size() == 3) {
      m.params[tk[1]] = parse_double(tk[2]);
    } else if (tk[0] == "stencil" || tk[0] == "functional") {
      Stencil s;
      while (rd.next(line) && line != "end") {
        auto st = detail::tokens(line);
        if (static_cast<int>(st.size()) != 1 + m.n * m.n)
          throw std::runtime_error("model file: stencil row has wrong entry count");
        StencilEntry e;
        e.offset = static_cast<int>(parse_double(st[0]));
        e.A.resize(m.n, m.n);
        for (int r = 0; r < m.n; ++r)
          for (int c = 0; c < m.n; ++c) e.A(r, c) = parse_double(st[1 + r * m.n + c]);
        s.push_back(std::move(e));
      }
      if (tk[0] == "stencil") {
        m.L = std::move(s);
        have_stencil = true;
      } else {
        m.functionals.push_back(std::move(s));
      }
    } else if (tk[0] == "equilibria") {
      while (rd.next(line) && line != "end") {
        auto et = detail::tokens(line);
        if (static_cast<int>(et.size()) != m.n)
          throw std::runtime_error("model file: equilibrium has wrong component count");
        Vec e(m.n);
        for (int k = 0; k < m.n; ++k) e[k] = parse_double(et[k]);
        m.equilibria.push_back(e);
      }
    } else if (tk[0] == "default_b" && tk.size() == 2) {
      m.default_b = parse_double(tk[1]);
      break;  // last field of the block
    } else {
      throw std::runtime_error("model file: unknown line '" + line + "'");
    }
  }
  if (!have_stencil) throw std::runtime_error("model file: missing stencil");
  m.g = make_pointwise(gfamily, gparams);
  m.validate();
  return m;
}

inline ModelSpec model_from_text(const std::string& text) {
  detail::LineReader rd(text);
  return model_from_reader(rd);
}

// ---------------------------------------------------------------- states

inline std::string state_to_text(const LatticeState& x) {
  std::ostringstream out;
  out << "latwave-state v1\n";
  out << "n " << x.comps() << "\n";
  out << "window " << x.window_lo() << " " << x.window_hi() << "\n";
  out << "tail_left";
  for (int k = 0; k < x.comps(); ++k) out << " " << fmt(x.tail_left()[k]);
  out << "\ntail_right";
  for (int k = 0; k < x.comps(); ++k) out << " " << fmt(x.tail_right()[k]);
  out << "\n";
  for (int j = x.window_lo(); j <= x.window_hi(); ++j) {
    out << j;
    for (int k = 0; k < x.comps(); ++k) out << " " << fmt(x.site_comp(j, k));
    out << "\n";
  }
  return out.str();
}

inline LatticeState state_from_text(const std::string& text) {
  detail::LineReader rd(text);
  std::string line;
  if (!rd.next(line) || line != "latwave-state v1")
    throw std::runtime_error("state file: bad header");
  int n = 0, lo = 0, hi = 0;
  Vec tl, tr;
  if (!rd.next(line)) throw std::runtime_error("state file: truncated");
  {
    auto tk = detail::tokens(line);
    if (tk.size() != 2 || tk[0] != "n") throw std::runtime_error("state file: expected n");
    n = static_cast<int>(parse_double(tk[1]));
  }
  if (!rd.next(line)) throw std::runtime_error("state file: truncated");
  {
    auto tk = detail::tokens(line);
    if (tk.size() != 3 || tk[0] != "window")
      throw std::runtime_error("state file: expected window");
    lo = static_cast<int>(parse_double(tk[1]));
    hi = static_cast<int>(parse_double(tk[2]));
  }
  LatticeState x(lo, hi, n);
  auto read_tail = [&](const char* key) {
    if (!rd.next(line)) throw std::runtime_error("state file: truncated");
    auto tk = detail::tokens(line);
    if (tk.size() != static_cast<size_t>(n) + 1 || tk[0] != key)
      throw std::runtime_error(std::string("state file: expected ") + key);
    Vec t(n);
    for (int k = 0; k < n; ++k) t[k] = parse_double(tk[k + 1]);
    return t;
  };
  tl = read_tail("tail_left");
  tr = read_tail("tail_right");
  x.set_tails(tl, tr);
  for (int j = lo; j <= hi; ++j) {
    if (!rd.next(line)) throw std::runtime_error("state file: missing site rows");
    auto tk = detail::tokens(line);
    if (tk.size() != static_cast<size_t>(n) + 1)
      throw std::runtime_error("state file: bad site row");
    if (static_cast<int>(parse_double(tk[0])) != j)
      throw std::runtime_error("state file: site rows out of order");
    for (int k = 0; k < n; ++k) x.at(j)[k] = parse_double(tk[k + 1]);
  }
  return x;
}

// ---------------------------------------------------------------- profiles

inline std::string profile_to_text(const WaveProfile& p) {
  std::ostringstream out;
  out << "latwave-profile v1\n";
  out << "begin-model\n" << model_to_text(p.model) << "end-model\n";
  out << "c " << fmt(p.c) << "\n";
  out << "alpha";
  for (int k = 0; k < p.comps(); ++k) out << " " << fmt(p.alpha[k]);
  out << "\nomega";
  for (int k = 0; k < p.comps(); ++k) out << " " << fmt(p.omega[k]);
  out << "\n";
  out << "xi_min " << fmt(p.xi_min) << "\n";
  out << "m " << p.m << "\n";
  out << "decay_left " << fmt(p.decay_left) << "\n";
  out << "decay_right " << fmt(p.decay_right) << "\n";
  out << "default_b " << fmt(p.default_b) << "\n";
  out << "residual_sup " << fmt(p.residual_sup) << "\n";
  out << "points " << p.points() << "\n";
  for (int i = 0; i < p.points(); ++i) {
    out << fmt(p.xi(i));
    for (int k = 0; k < p.comps(); ++k) out << " " << fmt(p.phi(i, k));
    out << "\n";
  }
  return out.str();
}

inline WaveProfile profile_from_text(const std::string& text) {
  detail::LineReader rd(text);
  std::string line;
  if (!rd.next(line) || line != "latwave-profile v1")
    throw std::runtime_error("profile file: bad header");
  if (!rd.next(line) || line != "begin-model")
    throw std::runtime_error("profile file: expected model block");
  WaveProfile p;
  p.model = model_from_reader(rd);
  // model_from_reader consumed up to default_b; the closing tag follows
  if (!rd.next(line) || line != "end-model")
    throw std::runtime_error("profile file: unterminated model block");
  int points = -1;
  while (rd.next(line)) {
    auto tk = detail::tokens(line);
    if (tk[0] == "c") {
      p.c = parse_double(tk.at(1));
    } else if (tk[0] == "alpha") {
      p.alpha.resize(p.model.n);
      for (int k = 0; k < p.model.n; ++k) p.alpha[k] = parse_double(tk.at(k + 1));
    } else if (tk[0] == "omega") {
      p.omega.resize(p.model.n);
      for (int k = 0; k < p.model.n; ++k) p.omega[k] = parse_double(tk.at(k + 1));
    } else if (tk[0] == "xi_min") {
      p.xi_min = parse_double(tk.at(1));
    } else if (tk[0] == "m") {
      p.m = static_cast<int>(parse_double(tk.at(1)));
    } else if (tk[0] == "decay_left") {
      p.decay_left = parse_double(tk.at(1));
    } else if (tk[0] == "decay_right") {
      p.decay_right = parse_double(tk.at(1));
    } else if (tk[0] == "default_b") {
      p.default_b = parse_double(tk.at(1));
    } else if (tk[0] == "residual_sup") {
      p.residual_sup = parse_double(tk.at(1));
    } else if (tk[0] == "points") {
      points = static_cast<int>(parse_double(tk.at(1)));
      break;
    } else {
      throw std::runtime_error("profile file: unknown line '" + line + "'");
    }
  }
  if (points <= 0) throw std::runtime_error("profile file: missing points");
  p.phi.resize(points, p.model.n);
  for (int i = 0; i < points; ++i) {
    if (!rd.next(line)) throw std::runtime_error("profile file: missing data rows");
    auto tk = detail::tokens(line);
    if (tk.size() != static_cast<size_t>(p.model.n) + 1)
      throw std::runtime_error("profile file: bad data row");
    for (int k = 0; k < p.model.n; ++k) p.phi(i, k) = parse_double(tk[k + 1]);
  }
  p.refresh_derivative();
  return p;
}

// ---------------------------------------------------------------- reports

inline std::string spectrum_csv(const FloquetReport& rep) {
  std::ostringstream out;
  out << "re,im,modulus,artifact\n";
  for (size_t i = 0; i < rep.eigenvalues.size(); ++i)
    out << fmt(rep.eigenvalues[i].real()) << "," << fmt(rep.eigenvalues[i].imag()) << ","
        << fmt(std::abs(rep.eigenvalues[i])) << "," << (rep.artifact[i] ? 1 : 0) << "\n";
  return out.str();
}

inline std::string floquet_report_text(const FloquetReport& rep, const VerdictTolerances& tol) {
  std::ostringstream out;
  out << "latwave-floquet v1\n";
  out << "verdict " << to_string(rep.verdict) << "\n";
  out << "window " << rep.lo << " " << rep.hi << "\n";
  out << "weight_b " << fmt(rep.b) << "\n";
  out << "wave_speed " << fmt(rep.c) << "\n";
  out << "leading_re " << fmt(rep.leading.real()) << "\n";
  out << "leading_im " << fmt(rep.leading.imag()) << "\n";
  out << "unit_eig_error " << fmt(rep.unit_eig_error) << "\n";
  out << "eigvec_alignment " << fmt(rep.eigvec_alignment) << "\n";
  out << "spectral_gap " << fmt(rep.spectral_gap) << "\n";
  out << "lambda_decay " << fmt(rep.lambda_decay) << "\n";
  out << "artifact_count " << rep.artifact_count << "\n";
  out << "tol_eig " << fmt(tol.tol_eig) << "\n";
  out << "tol_vec " << fmt(tol.tol_vec) << "\n";
  out << "gap_min " << fmt(tol.gap_min) << "\n";
  for (const auto& r : rep.reasons) out << "reason " << r << "\n";
  return out.str();
}

inline std::string exit_csv(const ExitRunReport& rep) {
  std::ostringstream out;
  out << "t,gamma_minus,gamma_plus,residual,crossterm_left,crossterm_right,manifold_distance,"
         "embed_consistency\n";
  auto col = [&](const std::vector<double>& v, size_t i) {
    return i < v.size() ? fmt(v[i]) : std::string("nan");
  };
  for (size_t i = 0; i < rep.times.size(); ++i)
    out << fmt(rep.times[i]) << "," << col(rep.gamma_minus, i) << "," << col(rep.gamma_plus, i)
        << "," << col(rep.residual, i) << "," << col(rep.cross_left, i) << ","
        << col(rep.cross_right, i) << "," << col(rep.manifold_dist, i) << ","
        << col(rep.embed_err, i) << "\n";
  return out.str();
}

inline std::string embedded_csv(const ExitRunReport& rep) {
  std::ostringstream out;
  out << "t,dev_minus_weighted,dev_plus_weighted,crossterm_left,crossterm_right,embed_err\n";
  auto col = [&](const std::vector<double>& v, size_t i) {
    return i < v.size() ? fmt(v[i]) : std::string("nan");
  };
  for (size_t i = 0; i < rep.times.size(); ++i)
    out << fmt(rep.times[i]) << "," << col(rep.dev_minus_b, i) << "," << col(rep.dev_plus_mb, i)
        << "," << col(rep.cross_left, i) << "," << col(rep.cross_right, i) << ","
        << col(rep.embed_err, i) << "\n";
  return out.str();
}

inline std::string exit_summary(const ExitRunReport& rep) {
  std::ostringstream out;
  out << "latwave-exit-summary v1\n";
  out << "fitted_rate_a " << fmt(rep.fitted_rate_a) << "\n";
  out << "fit_r2 " << fmt(rep.fit_r2) << "\n";
  out << "a_pred " << fmt(rep.a_pred) << "\n";
  out << "b_star " << fmt(rep.b_star) << "\n";
  out << "b_used " << fmt(rep.b_used) << "\n";
  out << "lambda_used " << fmt(rep.lambda_used) << "\n";
  out << "gamma_lim_minus " << fmt(rep.gamma_lim_minus) << "\n";
  out << "gamma_lim_plus " << fmt(rep.gamma_lim_plus) << "\n";
  out << "gamma_tv_minus " << fmt(rep.gamma_tv_minus) << "\n";
  out << "gamma_tv_plus " << fmt(rep.gamma_tv_plus) << "\n";
  out << "gamma_proj_offset " << fmt(rep.gamma_proj_offset) << "\n";
  out << "crossterm_rate " << fmt(rep.crossterm_rate) << "\n";
  out << "embed_consistency " << fmt(rep.embed_consistency) << "\n";
  out << "steps_accepted " << rep.stats.accepted << "\n";
  out << "steps_rejected " << rep.stats.rejected << "\n";
  auto verdict = [&](const char* name, bool ok) {
    out << "check " << name << " " << (ok ? "pass" : "fail") << "\n";
  };
  verdict("residual_decays", std::isfinite(rep.fitted_rate_a) && rep.fitted_rate_a > 0.0);
  if (std::isfinite(rep.a_pred))
    verdict("rate_at_least_half_predicted", rep.fitted_rate_a >= 0.5 * rep.a_pred);
  if (std::isfinite(rep.crossterm_rate))
    verdict("crossterm_rate_at_least_80pct", rep.crossterm_rate >= 1.6 * rep.b_star);
  if (std::isfinite(rep.embed_consistency))
    verdict("embedding_identity", rep.embed_consistency < 1e-8);
  verdict("gamma_converged", rep.gamma_tv_minus < 1e-4 && rep.gamma_tv_plus < 1e-4);
  return out.str();
}

inline std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  out << "delta,tau_star,seed,status,peak_residual,fitted_rate_a,fit_r2,gamma_lim_minus,"
         "gamma_lim_plus,message\n";
  for (const auto& c : cells)
    out << fmt(c.delta) << "," << fmt(c.tau_star) << "," << c.seed << ","
        << (c.ok ? "ok" : "failed") << "," << fmt(c.peak_residual) << ","
        << fmt(c.fitted_rate_a) << "," << fmt(c.fit_r2) << "," << fmt(c.gamma_lim_minus) << ","
        << fmt(c.gamma_lim_plus) << "," << c.message << "\n";
  return out.str();
}

/// Per-run trajectory export: time, sup norm, and weighted norms of the
/// sampled states.
inline std::string trajectory_csv(const Trajectory& traj, const std::vector<double>& weights) {
  std::ostringstream out;
  out << "t,sup_norm";
  for (double b : weights) out << ",norm_b_" << fmt(b);
  out << "\n";
  for (size_t i = 0; i < traj.times.size(); ++i) {
    out << fmt(traj.times[i]) << "," << fmt(sup_norm(traj.states[i]));
    for (double b : weights) out << "," << fmt(WeightedNorm{b}(traj.states[i]));
    out << "\n";
  }
  return out.str();
}

inline std::string branch_csv(const ContinuationRun& run) {
  std::ostringstream out;
  out << run.parameter << ",c,status\n";
  for (const auto& bp : run.points)
    out << fmt(bp.param) << "," << fmt(bp.c) << "," << to_string(bp.status) << "\n";
  return out.str();
}

/// Gnuplot script drawing log residual vs t with the predicted-rate line.
inline std::string exit_plot_script(const std::string& csv_name, const ExitRunReport& rep) {
  std::ostringstream out;
  out << "# gnuplot script\n";
  out << "set datafile separator ','\n";
  out << "set logscale y\n";
  out << "set xlabel 't'\n";
  out << "set ylabel 'sup-norm residual'\n";
  double c0 = 1e-3;
  for (size_t i = 0; i < rep.times.size(); ++i)
    if (rep.times[i] >= rep.times.back() / 3.0) {
      c0 = rep.residual[i] * std::exp(rep.a_pred * rep.times[i]);
      break;
    }
  out << "aref(x) = " << fmt(c0) << " * exp(-" << fmt(rep.a_pred) << " * x)\n";
  out << "plot '" << csv_name << "' using 1:4 skip 1 with lines title 'residual', \\\n";
  out << "     '" << csv_name << "' using 1:7 skip 1 with lines title 'manifold distance', \\\n";
  out << "     aref(x) with lines dashtype 2 title 'predicted rate'\n";
  return out.str();
}

// ---------------------------------------------------------------- manifest

struct Manifest {
  std::string command;
  std::string version;
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> outputs;

  void param(const std::string& k, const std::string& v) { params.push_back({k, v}); }
  void param(const std::string& k, double v) { params.push_back({k, fmt(v)}); }
  void input(const std::string& path, const std::string& content) {
    inputs.push_back({path, digest_hex(content)});
  }

  std::string text() const {
    std::ostringstream out;
    out << "latwave-manifest v1\n";
    out << "command " << command << "\n";
    out << "version " << version << "\n";
    for (const auto& [k, v] : params) out << "param " << k << " " << v << "\n";
    for (const auto& [p, d] : inputs) out << "input " << p << " fnv64=" << d << "\n";
    for (const auto& o : outputs) out << "output " << o << "\n";
    return out.str();
  }
};

}  // namespace latwave::io
