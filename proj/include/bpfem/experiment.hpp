#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bpfem/analysis.hpp"
#include "bpfem/stepper.hpp"

namespace bpfem {

class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& key, int line, const std::string& message)
      : InvalidArgument("config error at line " + std::to_string(line) + " (key '" + key + "'): " + message),
        key_(key),
        line_(line) {}
  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }

 private:
  std::string key_;
  int line_;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what) {}
};

/// Everything one experiment needs; parsed from `key = value` text.
struct RunConfig {
  std::string problem;
  std::string mesh;  // triangular | triangular_nondelaunay | quadrilateral
  int n{0};
  std::string element;  // P1 | P2 | Q1
  std::string scheme;   // bp | cip
  double theta{1.0};
  double dt{0.0};
  double T{0.0};
  double gamma{0.0};
  double alpha{1.0};
  double omega{0.1};
  double tol{1e-8};
  int max_iter{500};
  std::string output{"output"};
  int snapshot_stride{1};
  std::string stab_dt_factor{"dt"};

  bool operator==(const RunConfig&) const = default;
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double default_gamma(const std::string& problem) { return problem == "rotation" ? 0.001 : 0.05; }

inline double default_omega(const std::string& problem, const std::string& element) {
  if (problem == "rotation") return element == "Q1" ? 0.07 : 0.12;
  return 0.1;
}

}  // namespace detail

inline const std::vector<std::string>& required_config_keys() {
  static const std::vector<std::string> keys{"problem", "mesh", "n", "element", "scheme", "theta", "dt", "T"};
  return keys;
}

/// Parses and validates the line-oriented `key = value` format (`#` starts
/// a comment). Defaults: gamma and omega per problem, alpha 1, tol 1e-8,
/// max_iter 500, output "output", snapshot_stride 1, stab_dt_factor dt.
inline RunConfig parse_config(const std::string& text) {
  std::map<std::string, std::pair<std::string, int>> entries;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, line_no, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(key, line_no, "empty key");
    if (entries.count(key)) throw ConfigError(key, line_no, "duplicate key");
    entries[key] = {value, line_no};
  }

  static const std::vector<std::string> known{"problem", "mesh",  "n",     "element", "scheme",   "theta",
                                              "dt",      "T",     "gamma", "alpha",   "omega",    "tol",
                                              "max_iter", "output", "snapshot_stride", "stab_dt_factor"};
  for (const auto& [key, entry] : entries)
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(key, entry.second, "unknown key");
  for (const auto& key : required_config_keys())
    if (!entries.count(key)) throw ConfigError(key, 0, "missing required key");

  auto as_double = [&](const std::string& key) {
    const auto& [value, line] = entries.at(key);
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &pos);
    } catch (const std::exception&) {
      throw ConfigError(key, line, "not a number: '" + value + "'");
    }
    if (pos != value.size() || !std::isfinite(v)) throw ConfigError(key, line, "not a number: '" + value + "'");
    return v;
  };
  auto as_int = [&](const std::string& key) {
    const auto& [value, line] = entries.at(key);
    std::size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(value, &pos);
    } catch (const std::exception&) {
      throw ConfigError(key, line, "not an integer: '" + value + "'");
    }
    if (pos != value.size()) throw ConfigError(key, line, "not an integer: '" + value + "'");
    return static_cast<int>(v);
  };
  auto as_choice = [&](const std::string& key, std::initializer_list<const char*> choices) {
    const auto& [value, line] = entries.at(key);
    for (const char* c : choices)
      if (value == c) return value;
    throw ConfigError(key, line, "unsupported value '" + value + "'");
  };
  auto check = [&](const std::string& key, bool ok, const std::string& message) {
    if (!ok) throw ConfigError(key, entries.count(key) ? entries.at(key).second : 0, message);
  };

  RunConfig cfg;
  cfg.problem = as_choice("problem", {"smooth", "rotation"});
  cfg.mesh = as_choice("mesh", {"triangular", "triangular_nondelaunay", "quadrilateral"});
  cfg.n = as_int("n");
  check("n", cfg.n >= 2, "must be >= 2");
  cfg.element = as_choice("element", {"P1", "P2", "Q1"});
  check("element", (cfg.element == "Q1") == (cfg.mesh == "quadrilateral"), "incompatible with the mesh kind");
  cfg.scheme = as_choice("scheme", {"bp", "cip"});
  cfg.theta = as_double("theta");
  check("theta", cfg.theta >= 0.5 && cfg.theta <= 1.0, "must lie in [1/2, 1]");
  cfg.dt = as_double("dt");
  check("dt", cfg.dt > 0.0, "must be positive");
  cfg.T = as_double("T");
  check("T", cfg.T > 0.0, "must be positive");
  check("T", std::abs(cfg.T / cfg.dt - std::round(cfg.T / cfg.dt)) <= 1e-9, "must be an integer multiple of dt");

  cfg.gamma = entries.count("gamma") ? as_double("gamma") : detail::default_gamma(cfg.problem);
  check("gamma", cfg.gamma >= 0.0, "must be nonnegative");
  cfg.alpha = entries.count("alpha") ? as_double("alpha") : 1.0;
  check("alpha", cfg.alpha >= 0.0, "must be nonnegative");
  cfg.omega = entries.count("omega") ? as_double("omega") : detail::default_omega(cfg.problem, cfg.element);
  check("omega", cfg.omega > 0.0 && cfg.omega <= 1.0, "must lie in (0, 1]");
  cfg.tol = entries.count("tol") ? as_double("tol") : 1e-8;
  check("tol", cfg.tol > 0.0, "must be positive");
  cfg.max_iter = entries.count("max_iter") ? as_int("max_iter") : 500;
  check("max_iter", cfg.max_iter >= 1, "must be positive");
  if (entries.count("output")) cfg.output = entries.at("output").first;
  check("output", !cfg.output.empty(), "must not be empty");
  cfg.snapshot_stride = entries.count("snapshot_stride") ? as_int("snapshot_stride") : 1;
  check("snapshot_stride", cfg.snapshot_stride >= 0, "must be nonnegative (0 disables VTK output)");
  if (entries.count("stab_dt_factor")) cfg.stab_dt_factor = as_choice("stab_dt_factor", {"dt", "one"});
  return cfg;
}

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "problem = " << c.problem << "\n"
      << "mesh = " << c.mesh << "\n"
      << "n = " << c.n << "\n"
      << "element = " << c.element << "\n"
      << "scheme = " << c.scheme << "\n"
      << "theta = " << format_double(c.theta) << "\n"
      << "dt = " << format_double(c.dt) << "\n"
      << "T = " << format_double(c.T) << "\n"
      << "gamma = " << format_double(c.gamma) << "\n"
      << "alpha = " << format_double(c.alpha) << "\n"
      << "omega = " << format_double(c.omega) << "\n"
      << "tol = " << format_double(c.tol) << "\n"
      << "max_iter = " << c.max_iter << "\n"
      << "output = " << c.output << "\n"
      << "snapshot_stride = " << c.snapshot_stride << "\n"
      << "stab_dt_factor = " << c.stab_dt_factor << "\n";
  return out.str();
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

inline SchemeConfig to_scheme_config(const RunConfig& c) {
  SchemeConfig s;
  s.theta = c.theta;
  s.dt = c.dt;
  s.final_time = c.T;
  s.gamma = c.gamma;
  s.alpha = c.alpha;
  s.omega = c.omega;
  s.tol = c.tol;
  s.max_iter = c.max_iter;
  s.scheme = c.scheme == "cip" ? Scheme::cip_only : Scheme::bound_preserving;
  s.stab_dt_factor = c.stab_dt_factor == "one" ? StabDtFactor::one : StabDtFactor::dt;
  return s;
}

inline ElementKind to_element_kind(const std::string& e) {
  if (e == "P1") return ElementKind::P1;
  if (e == "P2") return ElementKind::P2;
  if (e == "Q1") return ElementKind::Q1;
  throw InvalidArgument("unknown element kind '" + e + "'");
}

inline Mesh build_mesh(const RunConfig& c) {
  if (c.mesh == "quadrilateral") return build_structured_quadrilateral(c.n);
  if (c.mesh == "triangular_nondelaunay") return build_structured_triangular(c.n, TriangulationVariant::non_delaunay);
  if (c.mesh == "triangular") return build_structured_triangular(c.n, TriangulationVariant::delaunay);
  throw InvalidArgument("unknown mesh kind '" + c.mesh + "'");
}

/// Legacy ASCII VTK with point data "u_plus". P2 fields are written on the
/// once-refined P1 mesh whose vertices are the P2 nodes.
inline void write_vtk(const std::filesystem::path& path, const FeFunction& u, const std::string& name = "u_plus") {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  const FeSpace& space = *u.space;
  const Mesh& mesh = *space.mesh;
  std::vector<std::vector<int>> cells;
  if (space.kind == ElementKind::P2) {
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      const auto d = space.dofs_of(c);
      cells.push_back({d[0], d[3], d[5]});
      cells.push_back({d[3], d[1], d[4]});
      cells.push_back({d[5], d[4], d[2]});
      cells.push_back({d[3], d[4], d[5]});
    }
  } else {
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      const auto d = space.dofs_of(c);
      cells.emplace_back(d.begin(), d.end());
    }
  }
  std::size_t list_size = 0;
  for (const auto& c : cells) list_size += c.size() + 1;

  out << "# vtk DataFile Version 3.0\n" << name << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << space.num_dofs() << " double\n";
  for (const Point& p : space.dof_coords) out << format_double(p.x) << ' ' << format_double(p.y) << " 0\n";
  out << "CELLS " << cells.size() << ' ' << list_size << '\n';
  for (const auto& c : cells) {
    out << c.size();
    for (int v : c) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << cells.size() << '\n';
  for (const auto& c : cells) out << (c.size() == 3 ? 5 : 9) << '\n';
  out << "POINT_DATA " << space.num_dofs() << "\nSCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < u.size(); ++i) out << format_double(u[i]) << '\n';
  if (!out) throw IoError(path, "write failed");
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
    if (!out_) throw IoError(path, "cannot open for writing");
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
  template <class... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(values), first = false), ...);
    out_ << '\n';
    if (!out_) throw IoError(path_, "write failed");
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  std::filesystem::path path_;
  std::ofstream out_;
};

struct SectionRequest {
  double y{0.75};
  int npoints{10000};
};

struct ExperimentOptions {
  std::optional<SectionRequest> section;
  bool write_errors{true};
  bool write_iterations{true};
  bool write_mass{true};
  bool write_fields{true};
};

struct ExperimentResult {
  int n{0};
  double h{0.0};
  double dt{0.0};
  double l2_error_final{0.0};
  double energy_error{0.0};
  double mean_iterations{0.0};
  int max_iterations{0};
  double min_value{0.0};  // extremes of the reported approximation over all steps
  double max_value{0.0};
  bool admissible_every_step{true};
  double final_relative_mass{1.0};
};

/// Runs one configuration and writes errors.csv, iterations.csv, mass.csv,
/// summary.csv, field_<step>.vtk and (on request) section.csv into cfg.output.
inline ExperimentResult run_experiment(const RunConfig& cfg, const ExperimentOptions& options = {}) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create output directory: " + ec.message());

  const ProblemSpec problem = preset(cfg.problem);
  const SchemeConfig scheme = to_scheme_config(cfg);
  const auto mesh = std::make_shared<const Mesh>(build_mesh(cfg));
  const SpacePtr space = build_space(mesh, to_element_kind(cfg.element));

  ExperimentResult result;
  result.n = cfg.n;
  result.h = mesh->max_cell_diameter();
  result.dt = cfg.dt;
  result.min_value = std::numeric_limits<double>::infinity();
  result.max_value = -std::numeric_limits<double>::infinity();

  std::optional<CsvWriter> mass_csv;
  if (options.write_mass) mass_csv.emplace(dir / "mass.csv", std::vector<std::string>{"t", "M", "M_r"});
  ErrorAccumulator errors;
  double initial_mass = 0.0;
  const int steps = scheme.num_steps();

  auto observer = [&](const Snapshot& s) {
    const FeFunction& u = s.approximation;
    result.min_value = std::min(result.min_value, u.coefficients.minCoeff());
    result.max_value = std::max(result.max_value, u.coefficients.maxCoeff());
    if (s.report && !s.report->admissible && scheme.scheme == Scheme::bound_preserving)
      result.admissible_every_step = false;
    const double m = total_mass(u);
    if (s.step == 0) initial_mass = m;
    const double mr = initial_mass != 0.0 ? m / initial_mass : 1.0;
    result.final_relative_mass = mr;
    if (mass_csv) mass_csv->row(s.time, m, mr);
    if (problem.exact) {
      if (problem.exact_gradient) {
        accumulate_energy_error_exact(errors, u, *problem.exact, *problem.exact_gradient, s.time, problem.epsilon,
                                      problem.mu, cfg.dt, s.forms);
      } else {
        const double e = l2_error(u, *problem.exact, s.time);
        errors.add(cfg.dt * (problem.mu * e * e + std::max(0.0, u.coefficients.dot(s.forms.cip * u.coefficients))));
      }
      if (s.step == steps) errors.final_l2 = l2_error(u, *problem.exact, s.time);
    }
    if (options.write_fields && cfg.snapshot_stride > 0 && (s.step % cfg.snapshot_stride == 0 || s.step == steps))
      write_vtk(dir / ("field_" + std::to_string(s.step) + ".vtk"), u);
  };

  const RunResult run_result = run(problem, space, scheme, observer);

  double total_iterations = 0.0;
  for (const auto& r : run_result.reports) {
    total_iterations += r.iterations;
    result.max_iterations = std::max(result.max_iterations, r.iterations);
  }
  result.mean_iterations = run_result.reports.empty() ? 0.0 : total_iterations / run_result.reports.size();
  result.l2_error_final = errors.final_l2;
  result.energy_error = errors.energy_norm();

  if (options.write_errors && problem.exact) {
    CsvWriter csv(dir / "errors.csv", {"n", "h", "dt", "l2_error_final", "energy_error"});
    csv.row(cfg.n, result.h, cfg.dt, result.l2_error_final, result.energy_error);
  }
  if (options.write_iterations) {
    CsvWriter csv(dir / "iterations.csv", {"step", "iterations", "residual"});
    for (const auto& r : run_result.reports) csv.row(r.step, r.iterations, r.residual);
    CsvWriter summary(dir / "summary.csv", {"key", "value"});
    summary.row("steps", static_cast<int>(run_result.reports.size()));
    summary.row("mean_iterations", result.mean_iterations);
    summary.row("max_iterations", result.max_iterations);
    summary.row("factorizations", run_result.factorizations);
    summary.row("min_value", result.min_value);
    summary.row("max_value", result.max_value);
    summary.row("final_relative_mass", result.final_relative_mass);
  }
  if (options.section) {
    const FeFunction& final_field = scheme.scheme == Scheme::bound_preserving ? run_result.plus : run_result.solution;
    CsvWriter csv(dir / "section.csv", {"x", "value"});
    for (const auto& s : cross_section(final_field, options.section->y, options.section->npoints)) csv.row(s.x, s.value);
  }
  return result;
}

enum class StudyAxis { space, time };

struct StudyResult {
  std::vector<ExperimentResult> levels;
  double l2_slope{0.0};
  double energy_slope{0.0};
};

/// Runs cfg at each level (mesh divisions n for the space axis, dt for the
/// time axis) into <output>/level_<i>/ and writes <output>/rates.csv with
/// the least-squares slopes against h or dt.
inline StudyResult convergence_study(const RunConfig& base, StudyAxis axis, const std::vector<double>& levels,
                                     const ExperimentOptions& options = {}) {
  if (levels.size() < 2) throw InvalidArgument("convergence_study: need at least two levels");
  for (std::size_t i = 0; i < levels.size(); ++i)
    for (std::size_t j = i + 1; j < levels.size(); ++j)
      if (levels[i] == levels[j]) throw InvalidArgument("convergence_study: degenerate study (repeated level)");

  namespace fs = std::filesystem;
  const fs::path dir(base.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create output directory: " + ec.message());

  StudyResult study;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    RunConfig cfg = base;
    if (axis == StudyAxis::space) {
      cfg.n = static_cast<int>(std::lround(levels[i]));
      if (cfg.n < 2 || std::abs(levels[i] - cfg.n) > 1e-12)
        throw InvalidArgument("convergence_study: space levels must be integers >= 2");
    } else {
      cfg.dt = levels[i];
    }
    cfg.output = (dir / ("level_" + std::to_string(i))).string();
    try {
      parse_config(serialize_config(cfg));
      study.levels.push_back(run_experiment(cfg, options));
    } catch (const std::exception& e) {
      throw std::runtime_error("convergence_study: level " + std::to_string(i) + " (" + format_double(levels[i]) +
                               "): " + e.what());
    }
  }
  std::vector<std::pair<double, double>> l2, energy;
  for (const auto& r : study.levels) {
    const double p = axis == StudyAxis::space ? r.h : r.dt;
    l2.emplace_back(p, r.l2_error_final);
    energy.emplace_back(p, r.energy_error);
  }
  study.l2_slope = convergence_slope(l2);
  study.energy_slope = convergence_slope(energy);

  CsvWriter csv(dir / "rates.csv",
                {"level", "n", "h", "dt", "l2_error_final", "energy_error", "l2_slope", "energy_slope"});
  for (std::size_t i = 0; i < study.levels.size(); ++i) {
    const auto& r = study.levels[i];
    csv.row(static_cast<int>(i), r.n, r.h, r.dt, r.l2_error_final, r.energy_error, study.l2_slope, study.energy_slope);
  }
  return study;
}

}  // namespace bpfem
