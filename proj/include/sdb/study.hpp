#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "sdb/analysis.hpp"
#include "sdb/assembly.hpp"
#include "sdb/error.hpp"
#include "sdb/problem.hpp"
#include "sdb/space.hpp"
#include "sdb/stabilization.hpp"
#include "sdb/timestepper.hpp"

namespace sdb {

inline constexpr const char* kReportVersion = "sdb-report v1";

/// Time step as a function of the mesh diameter.
struct DtRule {
  enum class Kind { fixed, proportional_h, proportional_h2 };
  Kind kind = Kind::proportional_h;
  double value = 1.0;  // dt, or the factor multiplying h or h^2

  double resolve(double h) const {
    switch (kind) {
      case Kind::fixed: return value;
      case Kind::proportional_h: return value * h;
      case Kind::proportional_h2: return value * h * h;
    }
    return value;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& text) {
  const auto s = trim(text);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

inline long parse_long(const std::string& key, const std::string& text) {
  const auto s = trim(text);
  long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const auto s = trim(text);
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw ConfigError(key + ": expected on/off, got '" + text + "'");
}

}  // namespace detail

inline DtRule parse_dt_rule(const std::string& text) {
  const auto s = detail::trim(text);
  const auto colon = s.find(':');
  const std::string name = s.substr(0, colon);
  DtRule r;
  if (name == "fixed") {
    r.kind = DtRule::Kind::fixed;
    if (colon == std::string::npos) throw ConfigError("dt_rule fixed needs a value (fixed:<dt>)");
  } else if (name == "proportional_h") {
    r.kind = DtRule::Kind::proportional_h;
    r.value = 1.0;
  } else if (name == "proportional_h2") {
    r.kind = DtRule::Kind::proportional_h2;
    r.value = 0.5;
  } else {
    throw ConfigError("unknown dt_rule '" + s + "'");
  }
  if (colon != std::string::npos) r.value = detail::parse_double("dt_rule", s.substr(colon + 1));
  if (!(r.value > 0.0)) throw ConfigError("dt_rule value must be positive");
  return r;
}

inline std::string to_string(const DtRule& r) {
  const char* name = r.kind == DtRule::Kind::fixed            ? "fixed"
                     : r.kind == DtRule::Kind::proportional_h ? "proportional_h"
                                                              : "proportional_h2";
  return std::string(name) + ":" + detail::format_double(r.value);
}

/// Resolved run configuration. Every field has a textual key; to_text()
/// emits all of them and parse_config() reads them back.
struct RunConfig {
  DiffusionCase diffusion = DiffusionCase::nonzero;
  Method method = Method::asgs;
  std::vector<std::size_t> mesh_sizes{10, 20, 40};
  double theta = 0.0;
  DtRule dt_rule;
  double t_final = 1.0;
  std::string output;      // convergence CSV; empty = none
  std::string step_csv;    // per-step errors; empty = none
  std::string indicators;  // per-element estimator dump; empty = none
  double sigma = 1.0;
  double alpha = 0.01;
  TauConstants tau;
  std::optional<double> d_scale;  // defaults by case: 1 nonzero, 0 zero diffusion
  double u_scale = 1.0;
  SubscaleSeries series = SubscaleSeries::closed_form;
  int quad_degree = 5;
  unsigned workers = 1;
  unsigned jobs = 1;
  bool timing = true;  // off writes wall_ms = 0 so reports are byte-reproducible

  double resolved_d_scale() const {
    return d_scale ? *d_scale : (diffusion == DiffusionCase::zero ? 0.0 : 1.0);
  }

  void validate() const {
    if (mesh_sizes.empty()) throw ConfigError("mesh_sizes must not be empty");
    for (std::size_t i = 0; i < mesh_sizes.size(); ++i) {
      if (mesh_sizes[i] == 0) throw ConfigError("mesh sizes must be positive");
      if (i > 0 && mesh_sizes[i] <= mesh_sizes[i - 1])
        throw ConfigError("mesh_sizes must be strictly increasing");
    }
    if (theta != 0.0 && theta != 1.0) throw ConfigError("theta must be 0 or 1");
    if (!(t_final >= 0.0)) throw ConfigError("t_final must be nonnegative");
    if (!(dt_rule.value > 0.0)) throw ConfigError("dt_rule value must be positive");
    if (!(sigma > 0.0) || !(alpha > 0.0)) throw ConfigError("sigma and alpha must be positive");
    if (d_scale && *d_scale < 0.0) throw ConfigError("d_scale must be nonnegative");
    if (u_scale < 0.0) throw ConfigError("u_scale must be nonnegative");
    if (jobs == 0 || workers == 0) throw ConfigError("jobs and workers must be at least 1");
    const auto& k = tau;
    for (double v : {k.c1u, k.c2u, k.c_sigma_h, k.c_mu, k.c1p, k.c2p, k.c_diff, k.c_adv})
      if (v < 0.0) throw ConfigError("tau constants must be nonnegative");
    try {
      (void)quadrature_rule(quad_degree);
    } catch (const InputError& e) {
      throw ConfigError(std::string("quad_degree: ") + e.what());
    }
  }

  std::string to_text() const {
    std::ostringstream o;
    const auto num = detail::format_double;
    o << "case = " << to_string(diffusion) << "\n";
    o << "method = " << to_string(method) << "\n";
    o << "mesh_sizes = ";
    for (std::size_t i = 0; i < mesh_sizes.size(); ++i) o << (i ? "," : "") << mesh_sizes[i];
    o << "\n";
    o << "theta = " << num(theta) << "\n";
    o << "dt_rule = " << to_string(dt_rule) << "\n";
    o << "t_final = " << num(t_final) << "\n";
    o << "output = " << output << "\n";
    o << "step_csv = " << step_csv << "\n";
    o << "indicators = " << indicators << "\n";
    o << "sigma = " << num(sigma) << "\n";
    o << "alpha = " << num(alpha) << "\n";
    o << "c1u = " << num(tau.c1u) << "\n";
    o << "c2u = " << num(tau.c2u) << "\n";
    o << "tau2_form = "
      << (tau.tau2_form == TauConstants::Tau2Form::experiment ? "experiment" : "generic") << "\n";
    o << "c_sigma_h = " << num(tau.c_sigma_h) << "\n";
    o << "c_mu = " << num(tau.c_mu) << "\n";
    o << "c1p = " << num(tau.c1p) << "\n";
    o << "c2p = " << num(tau.c2p) << "\n";
    o << "c_diff = " << num(tau.c_diff) << "\n";
    o << "c_adv = " << num(tau.c_adv) << "\n";
    o << "d_scale = " << (d_scale ? num(*d_scale) : std::string("auto")) << "\n";
    o << "u_scale = " << num(u_scale) << "\n";
    o << "series = " << (series == SubscaleSeries::closed_form ? "closed_form" : "truncated")
      << "\n";
    o << "quad_degree = " << quad_degree << "\n";
    o << "workers = " << workers << "\n";
    o << "jobs = " << jobs << "\n";
    o << "timing = " << (timing ? "on" : "off") << "\n";
    return o.str();
  }

  bool operator==(const RunConfig& o) const { return to_text() == o.to_text(); }
};

/// Applies one key = value setting.
inline void set_config_value(RunConfig& c, const std::string& key_in, const std::string& val_in) {
  using detail::parse_double;
  const auto key = detail::trim(key_in);
  const auto val = detail::trim(val_in);
  const auto unsigned_value = [&](long lo) {
    const long v = detail::parse_long(key, val);
    if (v < lo) throw ConfigError(key + " must be at least " + std::to_string(lo));
    return static_cast<unsigned>(v);
  };
  if (key == "case") {
    try {
      c.diffusion = parse_diffusion_case(val);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "method") {
    c.method = parse_method(val);
  } else if (key == "mesh_sizes") {
    c.mesh_sizes.clear();
    std::stringstream ss(val);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const long n = detail::parse_long(key, item);
      if (n <= 0) throw ConfigError("mesh sizes must be positive");
      c.mesh_sizes.push_back(static_cast<std::size_t>(n));
    }
  } else if (key == "theta") {
    c.theta = parse_double(key, val);
  } else if (key == "dt_rule") {
    c.dt_rule = parse_dt_rule(val);
  } else if (key == "dt") {
    c.dt_rule = {DtRule::Kind::fixed, parse_double(key, val)};
  } else if (key == "t_final") {
    c.t_final = parse_double(key, val);
  } else if (key == "output") {
    c.output = val;
  } else if (key == "step_csv") {
    c.step_csv = val;
  } else if (key == "indicators") {
    c.indicators = val;
  } else if (key == "sigma") {
    c.sigma = parse_double(key, val);
  } else if (key == "alpha") {
    c.alpha = parse_double(key, val);
  } else if (key == "c1u") {
    c.tau.c1u = parse_double(key, val);
  } else if (key == "c2u") {
    c.tau.c2u = parse_double(key, val);
  } else if (key == "tau2_form") {
    if (val == "experiment") c.tau.tau2_form = TauConstants::Tau2Form::experiment;
    else if (val == "generic") c.tau.tau2_form = TauConstants::Tau2Form::generic;
    else throw ConfigError("tau2_form must be experiment or generic");
  } else if (key == "c_sigma_h") {
    c.tau.c_sigma_h = parse_double(key, val);
  } else if (key == "c_mu") {
    c.tau.c_mu = parse_double(key, val);
  } else if (key == "c1p") {
    c.tau.c1p = parse_double(key, val);
  } else if (key == "c2p") {
    c.tau.c2p = parse_double(key, val);
  } else if (key == "c_diff") {
    c.tau.c_diff = parse_double(key, val);
  } else if (key == "c_adv") {
    c.tau.c_adv = parse_double(key, val);
  } else if (key == "tau_constants") {
    if (val == "linear") c.tau = TauConstants::linear_element_values();
    else if (val == "default") c.tau = TauConstants{};
    else throw ConfigError("tau_constants must be linear or default");
  } else if (key == "d_scale") {
    if (val == "auto") c.d_scale.reset();
    else c.d_scale = parse_double(key, val);
  } else if (key == "u_scale") {
    c.u_scale = parse_double(key, val);
  } else if (key == "series") {
    if (val == "closed_form") c.series = SubscaleSeries::closed_form;
    else if (val == "truncated") c.series = SubscaleSeries::truncated;
    else throw ConfigError("series must be closed_form or truncated");
  } else if (key == "quad_degree") {
    c.quad_degree = static_cast<int>(unsigned_value(1));
  } else if (key == "workers") {
    c.workers = unsigned_value(1);
  } else if (key == "jobs") {
    c.jobs = unsigned_value(1);
  } else if (key == "timing") {
    c.timing = detail::parse_bool(key, val);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Flat "key = value" text; '#' starts a comment. Later keys override
/// earlier ones.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(base, line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

/// Writes `content` to `path` through a temporary file in the same
/// directory and a rename, so readers never see a partial file.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write '" + tmp.string() + "'");
    f << content;
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw ConfigError("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ConfigError("cannot rename onto '" + path + "'");
  }
}

/// Per-mesh options derived from a config.
struct MeshSetup {
  double h = 0.0;
  TimeScheme scheme;
  CoefficientSet coeffs;
  TauValues tau;
};

inline MeshSetup resolve_mesh(const RunConfig& c, const Discretization& d) {
  MeshSetup m;
  m.h = d.h_max();
  m.scheme = TimeScheme::fitted(c.theta, c.dt_rule.resolve(m.h), c.t_final);
  m.coeffs = default_coefficients(c.diffusion);
  m.coeffs.sigma = c.sigma;
  m.coeffs.alpha = c.alpha;
  m.tau = tau_params(m.h, m.coeffs.mu_stab, c.sigma, c.alpha, c.resolved_d_scale(), c.u_scale,
                     c.tau);
  return m;
}

struct ReportRow {
  std::size_t n_side = 0;
  double h = 0.0;
  double dt = 0.0;
  std::size_t n_steps = 0;
  FieldErrors errors;
  TimeNorms c_time, u_time, p_time;
  std::optional<double> order_c_h1;
  double wall_ms = 0.0;
  std::optional<double> estimator;
};

struct ConvergenceReport {
  RunConfig config;
  std::vector<ReportRow> rows;

  double headline(std::size_t i) const { return rows[i].errors.c.h1; }
};

/// Side effects of one mesh run that go to separate files.
struct MeshArtifacts {
  std::string step_rows;       // per-step CSV body
  std::string indicator_rows;  // per-element CSV body
};

inline ReportRow run_mesh(const RunConfig& c, std::size_t n_side, bool verbose,
                          MeshArtifacts* art = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = build_discretization(n_side);
  const auto m = resolve_mesh(c, d);
  TransientConfig tc;
  tc.n_side = n_side;
  tc.scheme = m.scheme;
  tc.stepper.method = c.method;
  tc.stepper.coeffs = m.coeffs;
  tc.stepper.taus = make_stabilization(m.tau, m.scheme.dt, c.series);
  tc.stepper.quad_degree = c.quad_degree;
  tc.stepper.workers = c.workers;
  tc.verbose = verbose;
  const auto num = detail::format_double;
  std::ostringstream steps;
  if (art && !c.step_csv.empty()) {
    tc.on_step = [&](const StepRecord& r) {
      steps << n_side << "," << r.step << "," << num(r.t) << "," << num(r.errors.u1.h1) << ","
            << num(r.errors.u2.h1) << "," << num(r.errors.p.l2) << "," << num(r.errors.c.l2)
            << "," << num(r.errors.c.h1) << "," << num(r.residual) << "\n";
    };
  }

  ReportRow row;
  try {
    const auto res = run_transient(d, tc);
    row.n_side = n_side;
    row.h = m.h;
    row.dt = m.scheme.dt;
    row.n_steps = m.scheme.n_steps;
    row.errors = res.final_errors;
    row.c_time = time_series_norms(res.c_series, m.scheme.dt);
    row.u_time = time_series_norms(res.u_series, m.scheme.dt);
    row.p_time = time_series_norms(res.p_series, m.scheme.dt);
    if (m.scheme.n_steps > 0) {
      EstimatorInput ei;
      ei.state_n = &res.previous_state;
      ei.state_np1 = &res.final_state;
      ei.coeffs = m.coeffs;
      ei.forcing = manufactured_forcing(m.coeffs);
      ei.dt = m.scheme.dt;
      ei.theta = m.scheme.theta;
      ei.taus = c.method == Method::asgs ? &*tc.stepper.taus : nullptr;
      const auto ind = aposteriori_estimator(d, ei);
      row.estimator = ind.global;
      if (art && !c.indicators.empty()) {
        std::ostringstream o;
        for (std::size_t k = 0; k < ind.element.size(); ++k) {
          const auto& g = d.geometry[k];
          const auto cx = g.map(1.0 / 3.0, 1.0 / 3.0);
          o << n_side << "," << k << "," << num(cx.x) << "," << num(cx.y) << "," << num(ind.h[k]);
          for (double r : ind.element[k]) o << "," << num(r);
          o << "," << num(std::sqrt(ind.element_eta_sq(k))) << "\n";
        }
        art->indicator_rows = o.str();
      }
    }
  } catch (const SolverError& e) {
    throw SolverError("n_side=" + std::to_string(n_side) + ": " + e.what());
  }
  if (art) art->step_rows = steps.str();
  row.wall_ms = c.timing ? std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count()
                         : 0.0;
  return row;
}

inline void fill_orders(std::vector<ReportRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double e0 = rows[i - 1].errors.c.h1, e1 = rows[i].errors.c.h1;
    if (e0 > 0.0 && e1 > 0.0)
      rows[i].order_c_h1 = convergence_order({e0, e1}, {rows[i - 1].h, rows[i].h})[0];
  }
}

inline std::string report_csv(const ConvergenceReport& r) {
  const auto num = detail::format_double;
  std::ostringstream o;
  o << "# " << kReportVersion << "\n";
  std::istringstream cfg(r.config.to_text());
  for (std::string line; std::getline(cfg, line);) o << "# " << line << "\n";
  o << "n_side,h,err_u1_h1,err_u2_h1,err_p_l2,err_c_l2,err_c_h1,order_c_h1,wall_ms\n";
  for (const auto& row : r.rows) {
    o << row.n_side << "," << num(row.h) << "," << num(row.errors.u1.h1) << ","
      << num(row.errors.u2.h1) << "," << num(row.errors.p.l2) << "," << num(row.errors.c.l2)
      << "," << num(row.errors.c.h1) << ","
      << (row.order_c_h1 ? num(*row.order_c_h1) : std::string()) << ","
      << num(std::round(row.wall_ms)) << "\n";
  }
  return o.str();
}

/// Recovers the config echoed in the comment block of a report.
inline RunConfig parse_report_metadata(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, text;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) != 0) break;
    if (first) {
      if (line != std::string("# ") + kReportVersion)
        throw ConfigError("unsupported report version: " + line);
      first = false;
      continue;
    }
    text += line.substr(2) + "\n";
  }
  return parse_config(text);
}

/// Runs every mesh size, up to `jobs` at a time; rows come back in
/// mesh-size order regardless of completion order.
inline ConvergenceReport run_study(const RunConfig& config, bool verbose = false) {
  config.validate();
  ConvergenceReport rep;
  rep.config = config;
  const auto& sizes = config.mesh_sizes;
  std::vector<ReportRow> rows(sizes.size());
  std::vector<MeshArtifacts> arts(sizes.size());
  for (std::size_t start = 0; start < sizes.size(); start += config.jobs) {
    const std::size_t stop = std::min(sizes.size(), start + config.jobs);
    if (stop - start == 1) {
      if (verbose) std::cerr << "mesh " << sizes[start] << "\n";
      rows[start] = run_mesh(config, sizes[start], verbose, &arts[start]);
      continue;
    }
    std::vector<std::future<ReportRow>> fut;
    for (std::size_t i = start; i < stop; ++i)
      fut.push_back(std::async(std::launch::async, [&, i] {
        return run_mesh(config, sizes[i], false, &arts[i]);
      }));
    for (std::size_t i = start; i < stop; ++i) rows[i] = fut[i - start].get();
  }
  rep.rows = std::move(rows);
  fill_orders(rep.rows);

  if (!config.output.empty()) write_atomic(config.output, report_csv(rep));
  if (!config.step_csv.empty()) {
    std::string body = "n_side,step,t,err_u1_h1,err_u2_h1,err_p_l2,err_c_l2,err_c_h1,residual\n";
    for (const auto& a : arts) body += a.step_rows;
    write_atomic(config.step_csv, body);
  }
  if (!config.indicators.empty()) {
    std::string body = "n_side,element,x,y,h,r1,r2,r3,r4,eta\n";
    for (const auto& a : arts) body += a.indicator_rows;
    write_atomic(config.indicators, body);
  }
  return rep;
}

struct ComparisonReport {
  ConvergenceReport galerkin;
  ConvergenceReport asgs;
};

inline std::string comparison_csv(const ComparisonReport& r) {
  const auto num = detail::format_double;
  auto cfg = r.asgs.config;
  std::ostringstream o;
  o << "# " << kReportVersion << " comparison\n";
  std::istringstream in(cfg.to_text());
  for (std::string line; std::getline(in, line);)
    if (line.rfind("method", 0) != 0) o << "# " << line << "\n";
  o << "n_side,h,err_c_h1_galerkin,err_c_h1_asgs,ratio_asgs_over_galerkin,order_galerkin,"
       "order_asgs\n";
  for (std::size_t i = 0; i < r.asgs.rows.size(); ++i) {
    const auto& g = r.galerkin.rows[i];
    const auto& a = r.asgs.rows[i];
    o << a.n_side << "," << num(a.h) << "," << num(g.errors.c.h1) << "," << num(a.errors.c.h1)
      << "," << num(a.errors.c.h1 / g.errors.c.h1) << ","
      << (g.order_c_h1 ? num(*g.order_c_h1) : std::string()) << ","
      << (a.order_c_h1 ? num(*a.order_c_h1) : std::string()) << "\n";
  }
  return o.str();
}

/// Both methods on identical meshes and schemes. Per-method side files are
/// suppressed; the paired CSV goes to config.output.
inline ComparisonReport compare_methods(RunConfig config, bool verbose = false) {
  const std::string out = config.output;
  config.output.clear();
  config.step_csv.clear();
  config.indicators.clear();
  ComparisonReport r;
  config.method = Method::galerkin;
  r.galerkin = run_study(config, verbose);
  config.method = Method::asgs;
  r.asgs = run_study(config, verbose);
  r.galerkin.config.output = r.asgs.config.output = out;
  if (!out.empty()) write_atomic(out, comparison_csv(r));
  return r;
}

}  // namespace sdb
