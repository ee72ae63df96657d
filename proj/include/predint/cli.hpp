#pragma once

// Declarative run configuration and the fit / predict / coverage tasks
// behind the command-line tool.
//
// Config document (JSON):
//   task            "fit" | "predict" | "coverage"      (or given by the verb)
//   family          kernel family of the data / truth
//   method          continuous: plugin, calibration, calibration_smoothed,
//                   direct_bootstrap, gpq, normal_exact, fiducial, order_stat,
//                   conformal, oracle (coverage only);
//                   binomial/poisson: conservative, nelson, kp, wang,
//                   jeffreys, fiducial, hinkley
//   data            {"values": [...], "status": [...]} or
//                   {"csv": path, "column": name, "status_column": name}
//   r               Type-II event count (fit/predict from inline values or
//                   coverage); order-statistic lower index for order_stat
//   s               order-statistic upper index
//   x, n, m         discrete problem (predict); n, m sizes (coverage)
//   alpha, side     side: lower | upper | two_sided
//   B, fiducial_B, discrete_fiducial_B, N_sim, seed, threads
//   calibration_quantile  empirical | smoothed
//   kp_substitute_candidate, measure (mean | median), randomize
//   truth           {"family": name, "params": [...]}   (coverage)
//   exact           also enumerate exact coverage (discrete coverage)
//   cdf_grid        {"lower": a, "upper": b, "points": k}  (predict)
//   output          {"path": file, "format": "csv" | "json"}

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "predint/boot.hpp"
#include "predint/coverage.hpp"
#include "predint/dist.hpp"
#include "predint/errors.hpp"
#include "predint/fit.hpp"
#include "predint/npar.hpp"
#include "predint/predict_core.hpp"
#include "predint/predict_disc.hpp"
#include "predint/predict_fid.hpp"
#include "predint/predict_ls.hpp"
#include "predint/sample.hpp"

namespace predint::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitInternal = 1;

enum class Task { fit, predict, coverage };

inline std::string_view task_name(Task t) {
  switch (t) {
    case Task::fit: return "fit";
    case Task::predict: return "predict";
    case Task::coverage: return "coverage";
  }
  return "unknown";
}

inline Task parse_task(std::string_view s) {
  if (s == "fit") return Task::fit;
  if (s == "predict") return Task::predict;
  if (s == "coverage") return Task::coverage;
  throw invalid_parameter("field 'task': expected fit, predict or coverage, got '" + std::string(s) + "'");
}

/// A configuration problem tied to a field.
class config_error : public invalid_parameter {
 public:
  config_error(const std::string& field, const std::string& what)
      : invalid_parameter("field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct CdfGrid {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t points = 0;
};

/// Parsed and validated configuration; `resolved` echoes every field with
/// defaults filled in and is sufficient to reproduce the run.
struct RunConfig {
  Task task = Task::predict;
  std::string family;
  std::string method;
  std::optional<Sample> sample;
  std::optional<std::size_t> r;
  std::optional<std::size_t> s;
  double x = 0, n = 0, m = 1, alpha = 0.05;
  std::string side = "upper";
  std::size_t B = 0, fiducial_B = kDefaultFiducialB, discrete_fiducial_B = 100000;
  std::size_t n_sim = kDefaultCoverageNsim;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string calibration_quantile = "empirical";
  bool kp_substitute_candidate = true;
  std::string measure = "mean";
  bool randomize = false;
  std::vector<double> truth_params;
  bool exact = false;
  std::optional<CdfGrid> cdf_grid;
  std::string out_path;
  std::string format = "csv";
  json resolved;

  bool discrete_family() const { return family == "binomial" || family == "poisson"; }
};

namespace detail {

// Typed field access with field-named diagnostics; every value read (or
// defaulted) is recorded in `resolved`.
class Fields {
 public:
  Fields(const json& j, json& resolved) : j_(j), resolved_(resolved) {}

  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }

  template <class T>
  T required(const std::string& k) {
    if (!has(k)) throw config_error(k, "missing required field");
    return get<T>(k);
  }

  template <class T>
  T optional(const std::string& k, T fallback) {
    if (!has(k)) {
      resolved_[k] = fallback;
      return fallback;
    }
    return get<T>(k);
  }

  template <class T>
  std::optional<T> maybe(const std::string& k) {
    if (!has(k)) return std::nullopt;
    return get<T>(k);
  }

 private:
  template <class T>
  T get(const std::string& k) {
    try {
      T v = j_.at(k).get<T>();
      resolved_[k] = v;
      return v;
    } catch (const json::exception&) {
      throw config_error(k, "has the wrong type");
    }
  }

  const json& j_;
  json& resolved_;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t\r\"");
    const auto e = cur.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  try {
    const double v = std::stod(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

struct CsvData {
  std::vector<double> values;
  std::vector<double> status;
};

// One value column (optionally selected by header name) plus an optional
// status column; the first row is a header when it is not numeric.
inline CsvData read_csv(const std::string& path, const std::string& column, const std::string& status_column) {
  std::ifstream in(path);
  if (!in) throw config_error("data.csv", "cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw config_error("data.csv", "'" + path + "' has no rows");
  std::size_t vcol = 0;
  std::optional<std::size_t> scol;
  std::size_t first = 0;
  if (!parse_number(rows[0].at(0))) {
    first = 1;
    const auto& h = rows[0];
    auto find = [&](const std::string& name, const std::string& field) {
      for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i] == name) return i;
      }
      throw config_error(field, "column '" + name + "' not found in '" + path + "'");
    };
    if (!column.empty()) vcol = find(column, "data.column");
    if (!status_column.empty()) {
      scol = find(status_column, "data.status_column");
    } else {
      for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i] == "status") scol = i;
      }
    }
  } else {
    if (!column.empty()) throw config_error("data.column", "'" + path + "' has no header row");
    if (rows[0].size() >= 2) scol = 1;
  }
  CsvData out;
  for (std::size_t i = first; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::string where = "'" + path + "' line " + std::to_string(i + 1);
    if (vcol >= row.size()) throw config_error("data.csv", where + ": missing value column");
    const auto v = parse_number(row[vcol]);
    if (!v) throw config_error("data.csv", where + ": '" + row[vcol] + "' is not a number");
    out.values.push_back(*v);
    if (scol) {
      if (*scol >= row.size()) throw config_error("data.csv", where + ": missing status column");
      const auto st = parse_number(row[*scol]);
      if (!st) throw config_error("data.csv", where + ": status '" + row[*scol] + "' is not a number");
      out.status.push_back(*st);
    }
  }
  return out;
}

// Status 1 = event, 0 = censored; censored units must be exactly the
// largest values (Type-II).
inline Sample build_sample(const std::vector<double>& values, const std::vector<double>& status,
                           const std::string& field) {
  if (values.empty()) throw config_error(field, "no observations");
  if (status.empty()) return Sample::complete(values);
  if (status.size() != values.size()) throw config_error(field, "status and values differ in length");
  double max_event = -std::numeric_limits<double>::infinity();
  double min_censored = std::numeric_limits<double>::infinity();
  std::size_t r = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (status[i] == 1.0) {
      ++r;
      max_event = std::max(max_event, values[i]);
    } else if (status[i] == 0.0) {
      min_censored = std::min(min_censored, values[i]);
    } else {
      throw config_error(field, "status must be 0 (censored) or 1 (event)");
    }
  }
  if (r == values.size()) return Sample::complete(values);
  if (min_censored < max_event) {
    throw config_error(field, "censoring is not Type-II: a censored value lies below an event value");
  }
  if (r < 2) throw config_error(field, "Type-II censoring needs at least 2 events");
  return Sample::type2(values, r);
}

}  // namespace detail

/// Parses and validates a config document. `task_override` comes from the
/// command-line verb; `seed_override` from --seed.
inline RunConfig parse_run_config(const json& j, std::optional<Task> task_override = std::nullopt,
                                  std::optional<std::uint64_t> seed_override = std::nullopt) {
  if (!j.is_object()) throw config_error("<root>", "config must be a JSON object");
  RunConfig c;
  json& res = c.resolved;
  res = json::object();
  detail::Fields f(j, res);

  if (f.has("task")) {
    c.task = parse_task(f.required<std::string>("task"));
    if (task_override && *task_override != c.task) {
      throw config_error("task", "config task '" + std::string(task_name(c.task)) + "' does not match verb '" +
                                     std::string(task_name(*task_override)) + "'");
    }
  } else if (task_override) {
    c.task = *task_override;
    res["task"] = std::string(task_name(c.task));
  } else {
    throw config_error("task", "missing required field");
  }

  // family: from `family` or truth.family
  std::optional<std::string> fam = f.maybe<std::string>("family");
  if (c.task == Task::coverage) {
    if (!f.has("truth")) throw config_error("truth", "missing required field");
    const json& t = j.at("truth");
    if (!t.is_object() || !t.contains("family") || !t.contains("params")) {
      throw config_error("truth", "expected {\"family\": name, \"params\": [...]}");
    }
    try {
      const auto tf = t.at("family").get<std::string>();
      c.truth_params = t.at("params").get<std::vector<double>>();
      if (fam && *fam != tf) throw config_error("family", "differs from truth.family");
      fam = tf;
    } catch (const json::exception&) {
      throw config_error("truth", "has the wrong type");
    }
    res["truth"] = {{"family", *fam}, {"params", c.truth_params}};
    res["family"] = *fam;
  }
  if (!fam) throw config_error("family", "missing required field");
  try {
    parse_family(*fam);
  } catch (const invalid_parameter& e) {
    throw config_error("family", e.what());
  }
  c.family = *fam;

  c.seed = f.optional<std::uint64_t>("seed", 1);
  if (seed_override) {
    c.seed = *seed_override;
    res["seed"] = c.seed;
  }
  c.threads = f.optional<unsigned>("threads", 0);

  auto check_alpha_field = [&] {
    c.alpha = f.required<double>("alpha");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw config_error("alpha", "must lie in (0, 1)");
  };
  auto check_side_field = [&] {
    c.side = f.required<std::string>("side");
    try {
      parse_coverage_side(c.side);
    } catch (const invalid_parameter& e) {
      throw config_error("side", e.what());
    }
  };

  // data
  auto read_data = [&] {
    if (!f.has("data")) throw config_error("data", "missing required field");
    const json& d = j.at("data");
    std::vector<double> values, status;
    if (d.is_array()) {
      try {
        values = d.get<std::vector<double>>();
      } catch (const json::exception&) {
        throw config_error("data", "inline data must be numbers");
      }
      res["data"] = {{"values", values}};
    } else if (d.is_object() && d.contains("values")) {
      try {
        values = d.at("values").get<std::vector<double>>();
        if (d.contains("status")) status = d.at("status").get<std::vector<double>>();
      } catch (const json::exception&) {
        throw config_error("data.values", "inline data must be numbers");
      }
      res["data"] = d;
    } else if (d.is_object() && d.contains("csv")) {
      std::string path, column, status_column;
      try {
        path = d.at("csv").get<std::string>();
        column = d.value("column", std::string());
        status_column = d.value("status_column", std::string());
      } catch (const json::exception&) {
        throw config_error("data", "csv, column and status_column must be strings");
      }
      const auto csv = detail::read_csv(path, column, status_column);
      values = csv.values;
      status = csv.status;
      res["data"] = d;
    } else {
      throw config_error("data", "expected an array, {\"values\": [...]} or {\"csv\": path}");
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw config_error("data", "observations must be finite");
    }
    if (auto r = f.maybe<std::size_t>("r"); r && c.method != "order_stat") {
      if (!status.empty()) throw config_error("r", "give either r or a status column, not both");
      if (*r < 2 || *r > values.size()) throw config_error("r", "Type-II censoring needs 2 <= r <= n");
      c.sample = Sample::type2(values, *r);
      c.r = r;
    } else {
      c.sample = detail::build_sample(values, status, "data");
    }
  };

  auto read_output = [&] {
    json out = json::object();
    if (f.has("output")) {
      const json& o = j.at("output");
      if (!o.is_object()) throw config_error("output", "expected an object");
      c.out_path = o.value("path", std::string());
      c.format = o.value("format", std::string("csv"));
    }
    if (c.format != "csv" && c.format != "json") throw config_error("output.format", "must be csv or json");
    out["path"] = c.out_path;
    out["format"] = c.format;
    res["output"] = out;
  };

  const bool disc = c.discrete_family();
  if (c.task == Task::fit) {
    if (disc) throw config_error("family", "fit supports continuous families only");
    read_data();
    read_output();
    return c;
  }

  c.method = f.required<std::string>("method");
  if (disc) {
    try {
      const DiscreteMethod dm = parse_discrete_method(c.method);
      const DiscreteKind kind = c.family == "binomial" ? DiscreteKind::binomial : DiscreteKind::poisson;
      if (!method_applies(kind, dm)) throw config_error("method", c.method + " does not apply to poisson");
    } catch (const config_error&) {
      throw;
    } catch (const invalid_parameter& e) {
      throw config_error("method", e.what());
    }
  } else {
    try {
      const MethodKind k = parse_method_kind(c.method);
      if (k == MethodKind::discrete) throw config_error("method", "give the discrete method name directly");
      if (k == MethodKind::oracle && c.task != Task::coverage) {
        throw config_error("method", "oracle is available for coverage only");
      }
    } catch (const config_error&) {
      throw;
    } catch (const invalid_parameter& e) {
      throw config_error("method", e.what());
    }
  }
  check_alpha_field();
  check_side_field();
  c.calibration_quantile = f.optional<std::string>("calibration_quantile", "empirical");
  if (c.calibration_quantile != "empirical" && c.calibration_quantile != "smoothed") {
    throw config_error("calibration_quantile", "must be empirical or smoothed");
  }
  c.B = f.optional<std::size_t>("B", c.task == Task::coverage ? kDefaultCoverageB : kDefaultIntervalB);
  c.fiducial_B = f.optional<std::size_t>("fiducial_B", kDefaultFiducialB);
  c.discrete_fiducial_B = f.optional<std::size_t>("discrete_fiducial_B", 100000);
  c.kp_substitute_candidate = f.optional<bool>("kp_substitute_candidate", true);
  c.measure = f.optional<std::string>("measure", "mean");
  c.randomize = f.optional<bool>("randomize", false);
  if (c.method == "order_stat") {
    c.r = f.required<std::size_t>("r");
    c.s = f.maybe<std::size_t>("s");
  }

  if (c.task == Task::predict) {
    if (disc) {
      c.x = f.required<double>("x");
      c.n = f.required<double>("n");
      c.m = f.required<double>("m");
    } else {
      read_data();
    }
    if (f.has("cdf_grid")) {
      const json& g = j.at("cdf_grid");
      try {
        c.cdf_grid = CdfGrid{g.at("lower").get<double>(), g.at("upper").get<double>(),
                             g.at("points").get<std::size_t>()};
      } catch (const json::exception&) {
        throw config_error("cdf_grid", "expected {\"lower\": a, \"upper\": b, \"points\": k}");
      }
      if (!(c.cdf_grid->upper > c.cdf_grid->lower) || c.cdf_grid->points < 2) {
        throw config_error("cdf_grid", "needs lower < upper and points >= 2");
      }
      res["cdf_grid"] = g;
    }
  } else {
    c.n = f.required<double>("n");
    c.m = f.optional<double>("m", 1.0);
    c.n_sim = f.optional<std::size_t>("N_sim", kDefaultCoverageNsim);
    c.exact = f.optional<bool>("exact", false);
    if (!disc) {
      if (auto r = f.maybe<std::size_t>("r"); r && c.method != "order_stat") c.r = r;
    }
  }
  read_output();
  return c;
}

// ---------------------------------------------------------------------------
// Tasks

namespace detail {

inline std::string fmt(double v) { return predint::detail::fmt17(v); }

inline CalibrationQuantile calibration_mode(const RunConfig& c) {
  return c.calibration_quantile == "smoothed" ? CalibrationQuantile::smoothed : CalibrationQuantile::empirical;
}

inline CoverageConfig coverage_config(const RunConfig& c) {
  CoverageConfig cc;
  const Family family = parse_family(c.family);
  cc.truth = Kernel::make(family, std::span<const double>(c.truth_params));
  if (c.discrete_family()) {
    cc.method.kind = MethodKind::discrete;
    cc.method.discrete = parse_discrete_method(c.method);
  } else {
    cc.method.kind = parse_method_kind(c.method);
    if (cc.method.kind == MethodKind::calibration && c.calibration_quantile == "smoothed") {
      cc.method.kind = MethodKind::calibration_smoothed;
    }
  }
  cc.method.B = c.B;
  cc.method.fiducial_B = c.fiducial_B;
  cc.method.discrete_fiducial_B = c.discrete_fiducial_B;
  cc.method.kp_substitute_candidate = c.kp_substitute_candidate;
  if (c.method == "order_stat") {
    cc.method.r = *c.r;
    cc.method.s = c.s.value_or(0);
  } else {
    cc.r = c.r;
  }
  cc.method.measure = c.measure;
  cc.method.randomize = c.randomize;
  cc.n = c.n;
  cc.m = c.m;
  cc.alpha = c.alpha;
  cc.side = parse_coverage_side(c.side);
  cc.n_sim = c.n_sim;
  cc.seed = c.seed;
  cc.threads = c.threads;
  return cc;
}

struct Output {
  std::string csv;
  json body = json::object();
};

inline Output run_fit(const RunConfig& c) {
  const FitResult fit = fit_ml(parse_family(c.family), *c.sample);
  const auto p = fit.estimate.params();
  Output o;
  std::ostringstream os;
  os << "family,n,r";
  for (std::size_t i = 0; i < p.size(); ++i) os << ",param" << i;
  os << ",loglik,converged,iterations,gradient_norm\n";
  os << c.family << ',' << c.sample->n() << ',' << c.sample->r();
  for (double v : p) os << ',' << fmt(v);
  os << ',' << fmt(fit.loglik) << ',' << (fit.converged ? 1 : 0) << ',' << fit.iterations << ','
     << fmt(fit.gradient_norm) << '\n';
  o.csv = os.str();
  o.body["fit"] = {{"family", c.family},
                   {"n", c.sample->n()},
                   {"r", c.sample->r()},
                   {"params", std::vector<double>(p.begin(), p.end())},
                   {"loglik", fit.loglik},
                   {"converged", fit.converged},
                   {"iterations", fit.iterations},
                   {"gradient_norm", fit.gradient_norm}};
  return o;
}

inline std::string opt_num(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline void add_bound(Output& o, std::ostringstream& os, const PredictionBound& b) {
  const auto& d = b.diagnostics;
  os << b.method << ',' << side_name(b.side) << ',' << fmt(b.level) << ',' << fmt(b.endpoint) << ','
     << (d ? std::to_string(d->B) : "") << ',' << (d ? std::to_string(d->failures) : "") << ','
     << (d ? opt_num(d->u_tilde) : "") << '\n';
  json jb{{"method", b.method}, {"side", side_name(b.side)}, {"level", b.level}, {"endpoint", b.endpoint}};
  if (d) {
    jb["B"] = d->B;
    jb["failures"] = d->failures;
    if (d->u_tilde) jb["u_tilde"] = *d->u_tilde;
  }
  o.body["bounds"].push_back(jb);
}

inline Output run_predict_discrete(const RunConfig& c) {
  const DiscreteKind kind = c.family == "binomial" ? DiscreteKind::binomial : DiscreteKind::poisson;
  const CoverageSide side = parse_coverage_side(c.side);
  const double a = side == CoverageSide::two_sided ? 0.5 * c.alpha : c.alpha;
  DiscretePredictionProblem pr{kind, c.x, c.n, c.m, a};
  DiscreteOptions opt;
  opt.fiducial_B = c.discrete_fiducial_B;
  opt.policy = RngPolicy{c.seed};
  opt.threads = c.threads;
  opt.kp_substitute_candidate = c.kp_substitute_candidate;
  const DiscreteBound b = discrete_bounds(pr, parse_discrete_method(c.method), opt);
  Output o;
  std::ostringstream os;
  os << "method,side,level,endpoint\n";
  o.body["bounds"] = json::array();
  auto emit = [&](const char* s, std::int64_t v) {
    os << c.method << ',' << s << ',' << fmt(1.0 - a) << ',' << v << '\n';
    o.body["bounds"].push_back({{"method", c.method}, {"side", s}, {"level", 1.0 - a}, {"endpoint", v}});
  };
  if (side != CoverageSide::upper) emit("lower", b.lower);
  if (side != CoverageSide::lower) emit("upper", b.upper);
  o.csv = os.str();
  return o;
}

inline Output run_predict(const RunConfig& c) {
  if (c.discrete_family()) return run_predict_discrete(c);
  const Family family = parse_family(c.family);
  const Sample& sample = *c.sample;
  const MethodKind kind = parse_method_kind(c.method);
  const CoverageSide side = parse_coverage_side(c.side);
  const RngPolicy policy{c.seed};
  Output o;
  std::ostringstream os;

  if (kind == MethodKind::order_stat) {
    const auto iv = order_stat_interval(sample, *c.r, c.s.value_or(sample.n()));
    os << "method,r,s,lower,upper,coverage,ties\n"
       << "order_stat," << iv.r << ',' << iv.s << ',' << fmt(iv.lower) << ',' << fmt(iv.upper) << ','
       << fmt(iv.coverage) << ',' << (iv.ties ? 1 : 0) << '\n';
    o.csv = os.str();
    o.body["interval"] = {{"method", "order_stat"}, {"r", iv.r},         {"s", iv.s},
                          {"lower", iv.lower},      {"upper", iv.upper}, {"coverage", iv.coverage},
                          {"ties", iv.ties}};
    return o;
  }
  if (kind == MethodKind::conformal) {
    if (sample.censored()) throw invalid_parameter("conformal prediction needs complete data");
    Rng rng = policy.substream(0, StreamPurpose::randomization);
    const auto region = conformal_region(sample.values(), NonconformityMeasure::by_name(c.measure), c.alpha,
                                         c.randomize, rng);
    os << "method,piece,lower,upper,lower_closed,upper_closed,u\n";
    o.body["region"] = {{"method", "conformal"},
                        {"measure", c.measure},
                        {"window", {region.window_lower, region.window_upper}},
                        {"pieces", json::array()}};
    if (region.u) o.body["region"]["u"] = *region.u;
    for (std::size_t i = 0; i < region.pieces.size(); ++i) {
      const auto& p = region.pieces[i];
      os << "conformal," << i << ',' << fmt(p.lower) << ',' << fmt(p.upper) << ',' << (p.lower_closed ? 1 : 0)
         << ',' << (p.upper_closed ? 1 : 0) << ',' << opt_num(region.u) << '\n';
      o.body["region"]["pieces"].push_back({{"lower", p.lower},
                                            {"upper", p.upper},
                                            {"lower_closed", p.lower_closed},
                                            {"upper_closed", p.upper_closed}});
    }
    o.csv = os.str();
    return o;
  }

  const bool two = side == CoverageSide::two_sided;
  const double a = two ? 0.5 * c.alpha : c.alpha;
  std::vector<Side> sides;
  if (side != CoverageSide::upper) sides.push_back(Side::lower);
  if (side != CoverageSide::lower) sides.push_back(Side::upper);

  std::vector<PredictionBound> bounds;
  std::optional<PredictiveCdf> F;
  std::optional<BoundDiagnostics> diag;
  if (kind == MethodKind::normal_exact) {
    for (Side s : sides) bounds.push_back(normal_exact_bound(sample, a, s));
  } else if (kind == MethodKind::fiducial) {
    const auto draws = fiducial_draws(family, sample, c.fiducial_B, policy, c.threads);
    F = fiducial_predictive_cdf(draws);
    diag = BoundDiagnostics{draws.size(), 0, std::nullopt};
  } else {
    const FitResult fit = fit_ml(family, sample);
    if (kind == MethodKind::plugin) {
      for (Side s : sides) bounds.push_back(plugin_bound(fit, a, s));
      F = plugin_cdf(fit);
    } else {
      const auto batch = parametric_bootstrap(fit, sample.shape(), c.B, policy, c.threads);
      diag = BoundDiagnostics{batch.B, batch.failures, std::nullopt};
      if (kind == MethodKind::calibration) {
        for (Side s : sides) {
          bounds.push_back(calibration_bound_from_batch(fit, batch, a, s, policy, calibration_mode(c)));
        }
        if (c.cdf_grid) F = calibration_predictive_cdf(fit, batch);
      } else if (kind == MethodKind::direct_bootstrap) {
        F = direct_bootstrap_cdf(fit, batch);
      } else if (kind == MethodKind::gpq) {
        F = gpq_predictive_cdf(fit, batch);
      } else {
        throw invalid_parameter("method " + c.method + " is not available for predict");
      }
    }
  }
  if (bounds.empty()) {
    for (Side s : sides) {
      auto b = bound_from_cdf(*F, a, s, c.method);
      b.diagnostics = diag;
      bounds.push_back(b);
    }
  }
  os << "method,side,level,endpoint,B,failures,u_tilde\n";
  o.body["bounds"] = json::array();
  for (const auto& b : bounds) add_bound(o, os, b);
  o.csv = os.str();
  if (c.cdf_grid) {
    if (!F) throw invalid_parameter("method " + c.method + " has no predictive cdf table");
    json table = json::array();
    const auto& g = *c.cdf_grid;
    std::ostringstream ts;
    ts << "y,F\n";
    for (std::size_t k = 0; k < g.points; ++k) {
      const double y = g.lower + (g.upper - g.lower) * static_cast<double>(k) / static_cast<double>(g.points - 1);
      const double v = F->cdf(y);
      table.push_back({y, v});
      ts << fmt(y) << ',' << fmt(v) << '\n';
    }
    o.body["predictive_cdf"] = table;
    o.body["predictive_cdf_csv"] = ts.str();
  }
  return o;
}

inline Output run_coverage(const RunConfig& c) {
  const CoverageConfig cc = coverage_config(c);
  const CoverageReport rep = estimate_coverage(cc);
  Output o;
  o.csv = coverage_csv_header() + "\n" + coverage_csv_row(rep) + "\n";
  o.body["report"] = coverage_json(rep);
  if (c.exact) {
    if (!cc.discrete()) throw invalid_parameter("exact coverage is available for binomial/poisson methods only");
    const auto ex = exact_discrete_coverage(cc);
    o.body["exact"] = {{"coverage", ex.coverage},
                       {"excluded_mass", ex.excluded_mass},
                       {"truncation_point", ex.truncation_point}};
    o.csv += "\nexact_coverage,excluded_mass,truncation_point\n" + fmt(ex.coverage) + ',' +
             fmt(ex.excluded_mass) + ',' + fmt(ex.truncation_point) + "\n";
  }
  return o;
}

}  // namespace detail

/// Runs the configured task and returns the rendered artifact (CSV or JSON).
/// The predictive-cdf table, when requested, is appended to CSV output
/// after a blank line.
inline std::string run(const RunConfig& c) {
  detail::Output o;
  switch (c.task) {
    case Task::fit: o = detail::run_fit(c); break;
    case Task::predict: o = detail::run_predict(c); break;
    case Task::coverage: o = detail::run_coverage(c); break;
  }
  if (c.format == "json") {
    json doc = o.body;
    doc.erase("predictive_cdf_csv");
    doc["config"] = c.resolved;
    return doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
  }
  std::string out = o.csv;
  if (o.body.contains("predictive_cdf_csv")) out += "\n" + o.body["predictive_cdf_csv"].get<std::string>();
  return out;
}

struct Invocation {
  std::optional<Task> verb;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  std::string format;  // empty: from config
};

/// Full CLI pipeline with exit-code mapping: 0 success, 2 configuration or
/// validation error, 3 numerical failure.
inline int execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
  std::string context;
  try {
    std::ifstream in(inv.config_path);
    if (!in) throw config_error("--config", "cannot open '" + inv.config_path + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      err << "predint: config error: " << inv.config_path << ": invalid JSON at byte " << e.byte << ": "
          << e.what() << '\n';
      return kExitConfig;
    }
    RunConfig c = parse_run_config(j, inv.verb, inv.seed);
    context = std::string(task_name(c.task)) + (c.method.empty() ? "" : " " + c.method) + " (" + c.family + "): ";
    if (!inv.out_path.empty()) {
      c.out_path = inv.out_path;
      c.resolved["output"]["path"] = c.out_path;
    }
    if (!inv.format.empty()) {
      if (inv.format != "csv" && inv.format != "json") throw config_error("--format", "must be csv or json");
      c.format = inv.format;
      c.resolved["output"]["format"] = c.format;
    }
    const std::string text = run(c);
    if (c.out_path.empty()) {
      out << text;
    } else {
      std::ofstream f(c.out_path, std::ios::binary);
      if (!f) throw config_error("output.path", "cannot write '" + c.out_path + "'");
      f << text;
    }
    return kExitOk;
  } catch (const invalid_parameter& e) {
    err << "predint: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const numerical_failure& e) {
    err << "predint: numerical failure: " << context << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "predint: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace predint::cli
