#include "wassdyn/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "wassdyn/dynamics.hpp"
#include "wassdyn/error.hpp"
#include "wassdyn/invariant.hpp"
#include "wassdyn/transport.hpp"

namespace wassdyn {

using nlohmann::json;

namespace {

const std::vector<std::pair<std::string, ExperimentKind>>& kind_table() {
  static const std::vector<std::pair<std::string, ExperimentKind>> t{
      {"collapse", ExperimentKind::Collapse},
      {"pitchfork_gaussian", ExperimentKind::PitchforkGaussian},
      {"noise_to_zero", ExperimentKind::NoiseToZero},
      {"discontinuity", ExperimentKind::Discontinuity},
      {"local_compactness", ExperimentKind::LocalCompactness},
      {"custom", ExperimentKind::Custom},
  };
  return t;
}

[[noreturn]] void invalid(const std::string& msg) { throw ValidationError("config: " + msg); }

double number_at(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) invalid(std::string("'") + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) invalid(std::string("'") + key + "' must be finite");
  return x;
}

std::size_t count_at(const json& obj, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) invalid(std::string("'") + key + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

std::vector<double> numbers_at(const json& obj, const char* key, std::vector<double> fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array()) invalid(std::string("'") + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) invalid(std::string("'") + key + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) invalid("unknown key '" + it.key() + "' in " + where);
  }
}

Point point_from_json(const json& v) {
  if (v.is_number()) return Point({v.get<double>()});
  if (v.is_array()) {
    std::vector<double> c;
    for (const json& e : v) {
      if (!e.is_number()) invalid("point coordinates must be numbers");
      c.push_back(e.get<double>());
    }
    return Point(std::move(c));
  }
  invalid("a point is a number or an array of numbers");
}

std::vector<Point> default_pitchfork_anchors() { return {Point({-1.0}), Point({0.0}), Point({1.0})}; }

std::vector<DiscreteMeasure> default_mu0(ExperimentKind k) {
  std::vector<DiscreteMeasure> out;
  const std::filesystem::path here = ".";
  switch (k) {
    case ExperimentKind::Collapse:
      for (const char* ref : {"dirac:2", "dirac:-2", "uniform:-3,3,10"}) out.push_back(resolve_measure(ref, here));
      break;
    case ExperimentKind::PitchforkGaussian:
    case ExperimentKind::NoiseToZero:
    case ExperimentKind::Custom:
      out.push_back(resolve_measure("uniform:-2,2,9", here));
      break;
    default:
      break;
  }
  return out;
}

double natural_order(const KernelSpec& k) {
  if (const auto* c = std::get_if<CollapseKernel>(&k.variant())) return c->p;
  return 1.0;
}

MWOperator make_op(const ExperimentConfig& cfg, const KernelSpec& k) {
  return MWOperator{k, cfg.compression_cap, cfg.p.value_or(natural_order(k))};
}

double noise_parameter(const KernelSpec& k) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GaussianKernel>) return v.sigma;
        if constexpr (std::is_same_v<T, BallKernel>) return v.radius;
        if constexpr (std::is_same_v<T, CollapseKernel>) return v.epsilon;
        if constexpr (std::is_same_v<T, DeterministicKernel>) return 0.0;
        invalid("mixture kernels have no single noise parameter");
      },
      k.variant());
}

std::optional<MapSpec> base_map(const KernelSpec& k) {
  return std::visit(
      [](const auto& v) -> std::optional<MapSpec> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MixtureKernel>) {
          std::optional<MapSpec> common;
          for (const auto& [component, w] : v.components) {
            (void)w;
            std::optional<MapSpec> m = base_map(component);
            if (!m) return std::nullopt;
            if (common && common->describe() != m->describe()) return std::nullopt;
            common = std::move(m);
          }
          return common;
        } else {
          return v.map;
        }
      },
      k.variant());
}

std::vector<Point> noise_samples(const ExperimentConfig& cfg, std::size_t dim) {
  const std::size_t count = count_at(cfg.params, "noise_samples", 401);
  const double radius = number_at(cfg.params, "noise_radius", 10.0);
  if (count == 0 || !(radius > 0.0)) invalid("noise_samples must be >= 1 and noise_radius positive");
  return ball_probe_points(Point(std::vector<double>(dim, 0.0)), radius, count);
}

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json measure_to_json(const DiscreteMeasure& mu) {
  json atoms = json::array();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    json x = json::array();
    for (double c : mu.location(i)) x.push_back(c);
    atoms.push_back({{"x", x}, {"w", mu.weight(i)}});
  }
  return {{"dim", mu.dim()}, {"atoms", atoms}};
}

namespace {

Verdict verdict_le(std::string id, std::string criterion, double value, double threshold, std::string detail = {}) {
  return Verdict{std::move(id), std::move(criterion), std::isfinite(value) && value <= threshold, value, threshold,
                 std::move(detail)};
}

std::string indexed(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

ExperimentReport start_report(const ExperimentConfig& cfg) {
  ExperimentReport r;
  r.config = cfg.raw;
  r.name = cfg.name;
  r.kind = kind_name(cfg.kind);
  return r;
}

std::vector<double> tail_radii_from(const DiscreteMeasure& mu, std::span<const Point> anchors, double r0, double ratio) {
  double far = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) far = std::max(far, distance_to_set(mu.location(i), anchors));
  std::vector<double> radii{r0};
  while (radii.back() < far && radii.size() < 256) radii.push_back(radii.back() * ratio);
  if (radii.size() < 2) radii.push_back(r0 * ratio);
  return radii;
}

// Largest increase of tail_mass * R^p between consecutive rows; <= 0 means nonincreasing.
double max_normalized_increase(const std::vector<TailRow>& rows) {
  double worst = rows.size() < 2 ? 0.0 : -INFINITY;
  for (std::size_t k = 1; k < rows.size(); ++k) worst = std::max(worst, rows[k].normalized - rows[k - 1].normalized);
  return worst;
}

// Largest excess of tail mass over the Markov bound m_p / R^p.
double max_chebyshev_excess(const DiscreteMeasure& mu, std::span<const Point> anchors, const std::vector<TailRow>& rows, double p) {
  double mp = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) mp += mu.weight(i) * std::pow(distance_to_set(mu.location(i), anchors), p);
  double worst = -INFINITY;
  for (const TailRow& r : rows) worst = std::max(worst, r.tail_mass - mp / std::pow(r.radius, p));
  return worst;
}

json tail_json(const std::vector<TailRow>& rows) {
  json out = json::array();
  for (const TailRow& r : rows) out.push_back({{"radius", r.radius}, {"tail_mass", r.tail_mass}, {"normalized", r.normalized}});
  return out;
}

CsvTable tail_table(const std::vector<TailRow>& rows) {
  CsvTable t{"tail_profile", {"radius", "tail_mass", "normalized"}, {}};
  for (const TailRow& r : rows) t.rows.push_back({r.radius, r.tail_mass, r.normalized});
  return t;
}

json stationary_json(const StationaryResult& s) {
  return {{"residual", num(s.residual)},
          {"residual_p", num(s.residual_p)},
          {"iterations", s.iterations},
          {"converged", s.converged},
          {"compression_cost_total", num(s.compression_cost_total)},
          {"support_size", s.measure.size()}};
}

}  // namespace

std::string kind_name(ExperimentKind k) {
  for (const auto& [name, kind] : kind_table()) {
    if (kind == k) return name;
  }
  return "custom";
}

DiscreteMeasure resolve_measure(const json& ref, const std::filesystem::path& base_dir) {
  if (ref.is_object()) {
    check_keys(ref, {"atoms", "file"}, "measure reference");
    if (ref.contains("file")) return resolve_measure(ref.at("file"), base_dir);
    if (!ref.contains("atoms") || !ref.at("atoms").is_array() || ref.at("atoms").empty()) {
      invalid("inline measure needs a nonempty 'atoms' array");
    }
    std::vector<Atom> atoms;
    for (const json& a : ref.at("atoms")) {
      if (!a.is_array() || a.size() < 2) invalid("inline atoms are [w, x1, ..., xd]");
      std::vector<double> x;
      for (std::size_t c = 1; c < a.size(); ++c) {
        if (!a[c].is_number()) invalid("inline atom coordinates must be numbers");
        x.push_back(a[c].get<double>());
      }
      if (!a[0].is_number()) invalid("inline atom weight must be a number");
      atoms.push_back({Point(std::move(x)), a[0].get<double>()});
    }
    return DiscreteMeasure::from_atoms(atoms);
  }
  if (!ref.is_string()) invalid("a measure reference is a string or an object");
  const std::string s = ref.get<std::string>();
  if (s.rfind("dirac:", 0) == 0) {
    std::string body = s.substr(6);
    std::vector<double> c;
    if (!body.empty() && body.front() == '(') {
      if (body.back() != ')') invalid("bad dirac point '" + body + "'");
      body = body.substr(1, body.size() - 2);
    }
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      char* end = nullptr;
      const double v = std::strtod(item.c_str(), &end);
      if (end == item.c_str() || *end != '\0') invalid("bad dirac coordinate '" + item + "'");
      c.push_back(v);
    }
    if (c.empty()) invalid("dirac needs a point");
    return DiscreteMeasure::dirac(Point(std::move(c)));
  }
  if (s.rfind("uniform:", 0) == 0) {
    double a = 0.0, b = 0.0;
    long n = 0;
    char tail = 0;
    if (std::sscanf(s.c_str() + 8, "%lf,%lf,%ld%c", &a, &b, &n, &tail) != 3 || n < 1 || !(a <= b)) {
      invalid("uniform is 'uniform:A,B,N' with A <= B and N >= 1");
    }
    std::vector<Point> pts;
    for (long i = 0; i < n; ++i) pts.push_back(Point({n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1)}));
    return DiscreteMeasure::uniform(pts);
  }
  const std::filesystem::path path = std::filesystem::path(s).is_absolute() ? std::filesystem::path(s) : base_dir / s;
  if (!std::filesystem::exists(path)) invalid("measure file '" + path.string() + "' does not exist");
  return load_measure(path.string());
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) invalid("document must be a JSON object");
  check_keys(doc, {"name", "description", "kind", "kernel", "mu0", "p", "budgets", "seed", "anchors", "params", "expect", "outputs"},
             "the document");
  ExperimentConfig cfg;
  cfg.raw = doc;
  if (!doc.contains("name") || !doc.at("name").is_string() || doc.at("name").get<std::string>().empty()) {
    invalid("'name' must be a nonempty string");
  }
  cfg.name = doc.at("name").get<std::string>();
  if (!doc.contains("kind") || !doc.at("kind").is_string()) invalid("'kind' must be a string");
  {
    const std::string k = doc.at("kind").get<std::string>();
    bool found = false;
    for (const auto& [name, kind] : kind_table()) {
      if (name == k) {
        cfg.kind = kind;
        found = true;
      }
    }
    if (!found) invalid("unknown kind '" + k + "'");
  }

  if (doc.contains("kernel")) {
    const json& k = doc.at("kernel");
    if (k.is_string()) {
      cfg.kernels.push_back(parse_kernel(k.get<std::string>()));
    } else if (k.is_array() && !k.empty()) {
      for (const json& e : k) {
        if (!e.is_string()) invalid("'kernel' sweep entries must be strings");
        cfg.kernels.push_back(parse_kernel(e.get<std::string>()));
      }
    } else {
      invalid("'kernel' must be a kernel string or a nonempty array of them");
    }
  } else if (cfg.kind == ExperimentKind::PitchforkGaussian) {
    cfg.kernels.push_back(parse_kernel("gauss(pitchfork,sigma=0.1,n=64)"));
  }
  const bool needs_kernel = cfg.kind == ExperimentKind::Collapse || cfg.kind == ExperimentKind::NoiseToZero ||
                            cfg.kind == ExperimentKind::Custom || cfg.kind == ExperimentKind::PitchforkGaussian;
  if (needs_kernel && cfg.kernels.empty()) invalid("'kernel' is required for kind " + kind_name(cfg.kind));

  if (doc.contains("mu0")) {
    const json& m = doc.at("mu0");
    if (m.is_array()) {
      if (m.empty()) invalid("'mu0' must not be empty");
      for (const json& e : m) cfg.mu0.push_back(resolve_measure(e, base_dir));
    } else {
      cfg.mu0.push_back(resolve_measure(m, base_dir));
    }
  } else {
    cfg.mu0 = default_mu0(cfg.kind);
  }

  if (doc.contains("p")) {
    const double p = number_at(doc, "p", 1.0);
    if (!(p >= 1.0)) invalid("'p' must be >= 1");
    cfg.p = p;
  }
  if (doc.contains("budgets")) {
    const json& b = doc.at("budgets");
    if (!b.is_object()) invalid("'budgets' must be an object");
    check_keys(b, {"max_iter", "tol", "compression_cap"}, "budgets");
    cfg.max_iter = count_at(b, "max_iter", cfg.max_iter);
    cfg.tol = number_at(b, "tol", cfg.tol);
    cfg.compression_cap = count_at(b, "compression_cap", cfg.compression_cap);
  }
  if (cfg.max_iter == 0) invalid("'max_iter' must be >= 1");
  if (!(cfg.tol > 0.0)) invalid("'tol' must be positive");
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_integer() || doc.at("seed").get<long long>() < 0) invalid("'seed' must be a nonnegative integer");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("anchors")) {
    const json& a = doc.at("anchors");
    if (!a.is_array() || a.empty()) invalid("'anchors' must be a nonempty array");
    for (const json& e : a) cfg.anchors.push_back(point_from_json(e));
  } else if (cfg.kind == ExperimentKind::NoiseToZero || cfg.kind == ExperimentKind::PitchforkGaussian) {
    cfg.anchors = default_pitchfork_anchors();
  }
  for (const char* key : {"params", "expect"}) {
    if (doc.contains(key) && !doc.at(key).is_object()) invalid(std::string("'") + key + "' must be an object");
  }
  cfg.params = doc.value("params", json::object());
  cfg.expect = doc.value("expect", json::object());
  if (doc.contains("outputs")) {
    const json& o = doc.at("outputs");
    if (!o.is_object()) invalid("'outputs' must be an object");
    check_keys(o, {"report"}, "outputs");
    if (o.contains("report")) {
      if (!o.at("report").is_string() || o.at("report").get<std::string>().empty()) invalid("'outputs.report' must be a file name");
      cfg.report_name = o.at("report").get<std::string>();
    }
  }

  // Dimensional consistency across kernels, starting measures and anchors.
  std::optional<std::size_t> dim;
  auto agree = [&](std::size_t d, const char* what) {
    if (dim && *dim != d) throw DimensionError(std::string("config: ") + what + " dimension " + std::to_string(d) +
                                               " does not match " + std::to_string(*dim));
    dim = d;
  };
  for (const KernelSpec& k : cfg.kernels) agree(k.dim(), "kernel");
  for (const DiscreteMeasure& m : cfg.mu0) agree(m.dim(), "mu0");
  for (const Point& a : cfg.anchors) agree(a.dim(), "anchor");

  switch (cfg.kind) {
    case ExperimentKind::Collapse:
      for (const KernelSpec& k : cfg.kernels) {
        if (!std::holds_alternative<CollapseKernel>(k.variant())) invalid("collapse runs need collapse kernels");
      }
      break;
    case ExperimentKind::PitchforkGaussian:
      if (cfg.kernels.size() != 1 || !std::holds_alternative<GaussianKernel>(cfg.kernels[0].variant())) {
        invalid("pitchfork_gaussian runs need a single gaussian kernel");
      }
      break;
    case ExperimentKind::NoiseToZero:
      for (std::size_t i = 1; i < cfg.kernels.size(); ++i) {
        if (noise_parameter(cfg.kernels[i]) > noise_parameter(cfg.kernels[i - 1])) {
          invalid("noise_to_zero sweeps must list nonincreasing noise parameters");
        }
      }
      (void)noise_parameter(cfg.kernels[0]);
      break;
    case ExperimentKind::Custom: {
      if (cfg.kernels.size() != 1) invalid("custom runs take a single kernel");
      check_keys(cfg.expect,
                 {"noise_level_max", "converged", "max_iterations", "support_within", "invariance", "tail_nonincreasing_from",
                  "projection_max"},
                 "expect");
      if (cfg.expect.contains("invariance")) {
        if (!cfg.seed) invalid("'seed' is required when an invariance check is requested");
        if (cfg.anchors.empty()) invalid("'anchors' are required for an invariance check");
      }
      if ((cfg.expect.contains("projection_max") || cfg.expect.contains("tail_nonincreasing_from")) && cfg.anchors.empty()) {
        invalid("'anchors' are required for projection and tail expectations");
      }
      break;
    }
    case ExperimentKind::Discontinuity:
      if (count_at(cfg.params, "growth_samples", 0) > 0 && !cfg.seed) invalid("'seed' is required for random growth samples");
      break;
    case ExperimentKind::LocalCompactness:
      break;
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

bool ExperimentReport::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

json ExperimentReport::to_json() const {
  json vs = json::array();
  for (const Verdict& v : verdicts) {
    vs.push_back({{"id", v.id},
                  {"criterion", v.criterion},
                  {"pass", v.pass},
                  {"value", num(v.value)},
                  {"threshold", num(v.threshold)},
                  {"detail", v.detail}});
  }
  json tables_json = json::array();
  for (const CsvTable& t : tables) tables_json.push_back(t.name + ".csv");
  return {{"schema", kReportSchema},
          {"name", name},
          {"kind", kind},
          {"config", config},
          {"metrics", metrics},
          {"verdicts", vs},
          {"passed", passed()},
          {"tables", tables_json},
          {"wall_clock_seconds", wall_clock_seconds},
          {"version", version}};
}

json comparable_report(const ExperimentReport& report) {
  json j = report.to_json();
  j.erase("wall_clock_seconds");
  j.erase("version");
  return j;
}

std::string table_to_csv(const CsvTable& t) {
  std::string out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + t.columns[c];
  out += '\n';
  char buf[32];
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      if (!std::isfinite(row[c])) continue;
      std::snprintf(buf, sizeof buf, "%.17g", row[c]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir, const std::string& report_name) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / report_name);
    if (!out) throw ValidationError("cannot write report into '" + dir.string() + "'");
    out << report.to_json().dump(2) << '\n';
  }
  for (const CsvTable& t : report.tables) {
    std::ofstream out(dir / (t.name + ".csv"));
    if (!out) throw ValidationError("cannot write table '" + t.name + "'");
    out << table_to_csv(t);
  }
}

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("WASSDYN_THREADS"); env && *env) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (*end != '\0' || cap < 1) throw ValidationError("WASSDYN_THREADS must be a positive integer");
    n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(n, worker_count());
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

ExperimentReport run_collapse(const ExperimentConfig& cfg) {
  ExperimentReport rep = start_report(cfg);
  const std::size_t K = cfg.kernels.size(), S = cfg.mu0.size();

  struct Run {
    std::vector<double> curve;
    double compression = 0.0;
    std::size_t steps = 0;
  };
  std::vector<Run> runs(K * S);
  parallel_for(K * S, [&](std::size_t idx) {
    const MWOperator op = make_op(cfg, cfg.kernels[idx / S]);
    const auto& ck = std::get<CollapseKernel>(op.kernel.variant());
    const DiscreteMeasure target = DiscreteMeasure::dirac(ck.x0);
    Run& r = runs[idx];
    DiscreteMeasure state = cfg.mu0[idx % S];
    r.curve.push_back(wasserstein(state, target, 1.0));
    while (r.curve.back() > cfg.tol && r.steps < cfg.max_iter) {
      ApplyResult next = apply_kernel_with_bound(op, state);
      r.compression += next.compression_bound;
      state = std::move(next.measure);
      ++r.steps;
      r.curve.push_back(wasserstein(state, target, 1.0));
    }
  });

  json kernels = json::array();
  CsvTable curves{"collapse_curves", {"kernel", "start", "step", "w1_to_x0"}, {}};
  for (std::size_t k = 0; k < K; ++k) {
    const MWOperator op = make_op(cfg, cfg.kernels[k]);
    const auto& ck = std::get<CollapseKernel>(op.kernel.variant());
    const std::vector<Point> samples = noise_samples(cfg, op.kernel.dim());
    const NoiseLevel level = noise_level(op, ck.map, samples);
    double closed_gap = 0.0;
    for (const Point& x : samples) {
      const Point y = eval_map(ck.map, x);
      const double d = euclidean_distance(y.coords(), ck.x0.coords());
      const double a = std::min(1.0, std::pow(ck.epsilon, ck.p) / (1.0 + std::pow(d, ck.p)));
      const double closed = std::pow(a, 1.0 / op.p) * d;
      const double measured = noise_level(op, ck.map, std::span<const Point>(&x, 1)).estimate;
      closed_gap = std::max(closed_gap, std::abs(measured - closed));
    }
    rep.verdicts.push_back(verdict_le(indexed("collapse.noise_level", k), "AC7", level.estimate, ck.epsilon,
                                      "max over samples of w_p(kernel(x), delta_f(x))"));
    rep.verdicts.push_back(verdict_le(indexed("collapse.closed_form", k), "AC6", closed_gap, 1e-12,
                                      "measured pointwise level vs a(x)^(1/p) d(f(x), x0)"));
    json starts = json::array();
    for (std::size_t s = 0; s < S; ++s) {
      const Run& r = runs[k * S + s];
      const double best = *std::min_element(r.curve.begin(), r.curve.end());
      rep.verdicts.push_back(verdict_le("collapse.converged[" + std::to_string(k) + "][" + std::to_string(s) + "]", "AC7", best,
                                        cfg.tol, "steps=" + std::to_string(r.steps)));
      starts.push_back({{"start", s},
                        {"steps", r.steps},
                        {"final_w1", num(r.curve.back())},
                        {"converged", r.curve.back() <= cfg.tol},
                        {"compression_cost", num(r.compression)}});
      for (std::size_t i = 0; i < r.curve.size(); ++i) {
        curves.rows.push_back({static_cast<double>(k), static_cast<double>(s), static_cast<double>(i), r.curve[i]});
      }
    }
    kernels.push_back({{"kernel", op.kernel.describe()},
                       {"p", op.p},
                       {"noise_level", num(level.estimate)},
                       {"noise_bound", level.analytic_bound ? num(*level.analytic_bound) : json(nullptr)},
                       {"closed_form_gap", num(closed_gap)},
                       {"runs", starts}});
  }
  rep.metrics["kernels"] = kernels;
  rep.tables.push_back(std::move(curves));
  return rep;
}

ExperimentReport run_pitchfork_gaussian(const ExperimentConfig& cfg) {
  ExperimentReport rep = start_report(cfg);
  const MWOperator op = make_op(cfg, cfg.kernels.front());
  const auto& gk = std::get<GaussianKernel>(op.kernel.variant());

  const NoiseLevel level = noise_level(op, gk.map, noise_samples(cfg, op.kernel.dim()));
  const double analytic = level.analytic_bound.value_or(INFINITY);
  const double rel_tol = number_at(cfg.params, "noise_rel_tol", op.p == 1.0 ? 0.005 : 0.01);
  rep.verdicts.push_back(verdict_le("pitchfork_gaussian.noise_level", "AC9", std::abs(level.estimate / analytic - 1.0), rel_tol,
                                    "relative gap to sigma (E|Z|^p)^(1/p)"));

  const StationaryResult st = find_stationary(op, cfg.mu0.front(), cfg.tol, cfg.max_iter);
  rep.verdicts.push_back(verdict_le("pitchfork_gaussian.stationary", "AC12", st.residual, cfg.tol,
                                    "w_1(P mu*, mu*) after " + std::to_string(st.iterations) + " applications"));

  const double r0 = number_at(cfg.params, "tail_start_factor", 2.0) * level.estimate;
  const double ratio = number_at(cfg.params, "tail_ratio", 1.25);
  if (!(r0 > 0.0) || !(ratio > 1.0)) invalid("tail_start_factor must be positive and tail_ratio > 1");
  const std::vector<double> radii = cfg.params.contains("tail_radii") ? numbers_at(cfg.params, "tail_radii", {})
                                                                       : tail_radii_from(st.measure, cfg.anchors, r0, ratio);
  const std::vector<TailRow> tail = tail_decay_profile(st.measure, cfg.anchors, radii, op.p);
  rep.verdicts.push_back(verdict_le("pitchfork_gaussian.tail_nonincreasing", "AC12", max_normalized_increase(tail), 0.0,
                                    "largest step increase of tail_mass * R^p beyond R0"));
  rep.verdicts.push_back(verdict_le("pitchfork_gaussian.chebyshev", "AC12", max_chebyshev_excess(st.measure, cfg.anchors, tail, op.p),
                                    0.0, "tail mass minus m_p / R^p"));

  rep.metrics["kernel"] = op.kernel.describe();
  rep.metrics["p"] = op.p;
  rep.metrics["noise_level"] = {{"estimate", num(level.estimate)}, {"analytic_bound", num(analytic)}};
  rep.metrics["stationary"] = stationary_json(st);
  rep.metrics["projection_distance"] = num(projection_distance(st.measure, cfg.anchors, op.p));
  rep.metrics["tail_start"] = r0;
  rep.metrics["tail_profile"] = tail_json(tail);
  rep.metrics["stationary_measure"] = measure_to_json(st.measure);
  rep.tables.push_back(tail_table(tail));
  CsvTable hist{"residual_history", {"application", "residual"}, {}};
  for (std::size_t i = 0; i < st.residual_history.size(); ++i) hist.rows.push_back({static_cast<double>(i + 1), st.residual_history[i]});
  rep.tables.push_back(std::move(hist));
  return rep;
}

ExperimentReport run_noise_to_zero(const ExperimentConfig& cfg) {
  ExperimentReport rep = start_report(cfg);
  const std::size_t K = cfg.kernels.size();
  struct Member {
    std::optional<StationaryResult> st;
    double distance = 0.0;
  };
  std::vector<Member> members(K);
  parallel_for(K, [&](std::size_t k) {
    const MWOperator op = make_op(cfg, cfg.kernels[k]);
    members[k].st = find_stationary(op, cfg.mu0.front(), cfg.tol, cfg.max_iter);
    members[k].distance = projection_distance(members[k].st->measure, cfg.anchors, op.p);
  });

  const double slack = number_at(cfg.params, "monotone_slack", 0.1);
  for (std::size_t k = 1; k < K; ++k) {
    rep.verdicts.push_back(verdict_le(indexed("noise_to_zero.monotone", k), "AC11", members[k].distance,
                                      (1.0 + slack) * members[k - 1].distance, "d_k <= (1 + slack) d_{k-1}"));
  }
  const double s0 = noise_parameter(cfg.kernels.front()), sf = noise_parameter(cfg.kernels.back());
  if (s0 > 0.0) {
    const double C = members.front().distance / s0;
    rep.metrics["fitted_C"] = num(C);
    rep.verdicts.push_back(verdict_le("noise_to_zero.final_envelope", "AC11", members.back().distance, C * sf,
                                      "final distance <= C * noise, C fitted at the largest noise"));
  } else {
    rep.verdicts.push_back(verdict_le("noise_to_zero.final_envelope", "AC11", members.back().distance,
                                      number_at(cfg.params, "zero_noise_tol", 1e-6), "noise-free sweep enters the anchor set"));
  }

  json sweep = json::array();
  CsvTable table{"noise_sweep", {"index", "noise", "projection_distance", "residual", "iterations"}, {}};
  for (std::size_t k = 0; k < K; ++k) {
    const StationaryResult& st = *members[k].st;
    sweep.push_back({{"kernel", cfg.kernels[k].describe()},
                     {"noise", noise_parameter(cfg.kernels[k])},
                     {"projection_distance", num(members[k].distance)},
                     {"stationary", stationary_json(st)}});
    table.rows.push_back({static_cast<double>(k), noise_parameter(cfg.kernels[k]), members[k].distance, st.residual,
                          static_cast<double>(st.iterations)});
  }
  rep.metrics["sweep"] = sweep;
  rep.tables.push_back(std::move(table));
  return rep;
}

ExperimentReport run_discontinuity(const ExperimentConfig& cfg) {
  ExperimentReport rep = start_report(cfg);
  const double p = cfg.p.value_or(1.0);
  const std::vector<double> ns = numbers_at(cfg.params, "n_list", {10, 100, 1000});
  const double rel_tol = number_at(cfg.params, "rel_tol", 0.002);
  const double limit_tol = number_at(cfg.params, "limit_tol", 0.0011);
  if (ns.empty()) invalid("'n_list' must not be empty");
  const MapSpec sqneg = MapSpec::square_negative();
  const DiscreteMeasure origin = DiscreteMeasure::dirac(Point({0.0}));

  CsvTable table{"discontinuity", {"n", "c_n", "w_mu", "w_push", "formula_mu", "formula_push"}, {}};
  json rows = json::array();
  double worst_mu = 0.0, worst_push = 0.0, last_mu = 0.0, last_push = 0.0;
  for (double n : ns) {
    if (!(n >= 2.0)) invalid("discontinuity needs n >= 2");
    // x_n = -n: d(f(x_n), 0) / (1 + d(x_n, 0)) = n^2 / (1 + n), c_n its reciprocal.
    const double c = (1.0 + n) / (n * n);
    const double mass = std::pow(c / n, p);
    const DiscreteMeasure mu = mix(DiscreteMeasure::dirac(Point({-n})), origin, mass);
    const double w_mu = wasserstein(mu, origin, p);
    const double w_push = wasserstein(push_forward(mu, sqneg), origin, p);
    const double f_mu = c, f_push = (1.0 + n) / n;
    worst_mu = std::max(worst_mu, std::abs(w_mu / f_mu - 1.0));
    worst_push = std::max(worst_push, std::abs(w_push / f_push - 1.0));
    last_mu = w_mu;
    last_push = w_push;
    table.rows.push_back({n, c, w_mu, w_push, f_mu, f_push});
    rows.push_back({{"n", n}, {"c_n", c}, {"mass", mass}, {"w_mu", w_mu}, {"w_push", w_push}});
  }
  rep.verdicts.push_back(verdict_le("discontinuity.mu_formula", "AC8", worst_mu, rel_tol, "w_p(mu_n, delta_0) vs c_n"));
  rep.verdicts.push_back(verdict_le("discontinuity.push_formula", "AC8", worst_push, rel_tol, "w_p(f_* mu_n, delta_0) vs (1+n)/n"));
  rep.verdicts.push_back(verdict_le("discontinuity.mu_limit", "AC8", last_mu, limit_tol, "final w_p(mu_n, delta_0)"));
  rep.verdicts.push_back(verdict_le("discontinuity.push_limit", "AC8", std::abs(last_push - 1.0), limit_tol,
                                    "final |w_p(f_* mu_n, delta_0) - 1|"));

  const std::vector<double> radii = numbers_at(cfg.params, "growth_radii", {10, 100, 1000});
  const std::size_t gs = count_at(cfg.params, "growth_samples", 0);
  const GrowthProfile g_sq = growth_ratio_profile(sqneg, Point({0.0}), radii, gs, cfg.seed.value_or(0));
  const GrowthProfile g_pf = growth_ratio_profile(MapSpec::pitchfork(), Point({0.0}), radii, gs, cfg.seed.value_or(0));
  rep.verdicts.push_back(Verdict{"discontinuity.growth_sqneg", "AC8", g_sq.unbounded_suspect, g_sq.rows.back().max_ratio, 0.0,
                                 "square_negative must be flagged unbounded-suspect"});
  rep.verdicts.push_back(Verdict{"discontinuity.growth_pitchfork", "AC8", !g_pf.unbounded_suspect, g_pf.rows.back().max_ratio, 0.0,
                                 "pitchfork must not be flagged"});

  CsvTable growth{"growth", {"map", "radius", "max_ratio"}, {}};
  json gj = json::array();
  for (const auto& [idx, prof] : {std::pair<int, const GrowthProfile*>{0, &g_sq}, {1, &g_pf}}) {
    json profile = json::array();
    for (const GrowthRow& r : prof->rows) {
      growth.rows.push_back({static_cast<double>(idx), r.radius, r.max_ratio});
      profile.push_back({{"radius", r.radius}, {"max_ratio", r.max_ratio}});
    }
    gj.push_back({{"map", idx == 0 ? "sqneg" : "pitchfork"}, {"unbounded_suspect", prof->unbounded_suspect}, {"profile", profile}});
  }
  rep.metrics["p"] = p;
  rep.metrics["sequence"] = rows;
  rep.metrics["growth"] = gj;
  rep.tables.push_back(std::move(table));
  rep.tables.push_back(std::move(growth));
  return rep;
}

ExperimentReport run_local_compactness(const ExperimentConfig& cfg) {
  ExperimentReport rep = start_report(cfg);
  const double p = cfg.p.value_or(1.0);
  const double eps = number_at(cfg.params, "eps", 1.0);
  const std::vector<double> ns = numbers_at(cfg.params, "n_list", {1, 10, 100, 1000});
  if (!(eps > 0.0) || ns.empty()) invalid("local_compactness needs eps > 0 and a nonempty n_list");
  const DiscreteMeasure origin = DiscreteMeasure::dirac(Point({0.0}));
  const std::vector<Point> anchor{Point({0.0})};

  CsvTable table{"local_compactness", {"n", "mass", "distance", "tail_mass"}, {}};
  json rows = json::array();
  double prev_mass = INFINITY, worst_rise = -INFINITY;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double n = ns[i];
    const double mass = std::pow(eps, p) * std::pow(n, -p);
    if (!(n > 0.0) || mass > 1.0) invalid("local_compactness needs n > 0 and eps^p n^-p <= 1");
    const DiscreteMeasure mu = mix(DiscreteMeasure::dirac(Point({n})), origin, mass);
    const double w = wasserstein(mu, origin, p);
    const double tail = tail_mass(mu, anchor, n / 2.0);
    rep.verdicts.push_back(verdict_le(indexed("local_compactness.distance", i), "AC12", std::abs(w - eps), 1e-9, "|w_p(mu_n, delta_0) - eps|"));
    rep.verdicts.push_back(verdict_le(indexed("local_compactness.tail_mass", i), "AC12", std::abs(tail - mass), 1e-15,
                                      "|tail_mass(mu_n, {0}, n/2) - m_n|"));
    if (i > 0) worst_rise = std::max(worst_rise, mass - prev_mass);
    prev_mass = mass;
    table.rows.push_back({n, mass, w, tail});
    rows.push_back({{"n", n}, {"mass", mass}, {"distance", w}, {"tail_mass", tail}, {"support_size", mu.size()}});
  }
  if (ns.size() > 1) {
    rep.verdicts.push_back(verdict_le("local_compactness.mass_decreasing", "AC12", worst_rise, 0.0, "m_n nonincreasing along n_list"));
  }
  rep.metrics["p"] = p;
  rep.metrics["eps"] = eps;
  rep.metrics["sequence"] = rows;
  rep.tables.push_back(std::move(table));
  return rep;
}

ExperimentReport run_custom(const ExperimentConfig& cfg) {
  ExperimentReport rep = start_report(cfg);
  const MWOperator op = make_op(cfg, cfg.kernels.front());
  const json& ex = cfg.expect;

  if (const std::optional<MapSpec> f = base_map(op.kernel)) {
    const NoiseLevel level = noise_level(op, *f, noise_samples(cfg, op.kernel.dim()));
    rep.metrics["noise_level"] = {{"estimate", num(level.estimate)},
                                  {"analytic_bound", level.analytic_bound ? num(*level.analytic_bound) : json(nullptr)}};
    if (ex.contains("noise_level_max")) {
      rep.verdicts.push_back(verdict_le("custom.noise_level", "AC6", level.estimate, number_at(ex, "noise_level_max", 0.0)));
    }
  } else if (ex.contains("noise_level_max")) {
    invalid("noise_level_max needs a kernel with a single base map");
  }

  const StationaryResult st = find_stationary(op, cfg.mu0.front(), cfg.tol, cfg.max_iter);
  rep.metrics["kernel"] = op.kernel.describe();
  rep.metrics["p"] = op.p;
  rep.metrics["stationary"] = stationary_json(st);
  rep.metrics["stationary_measure"] = measure_to_json(st.measure);
  if (ex.contains("converged")) {
    if (!ex.at("converged").is_boolean()) invalid("'expect.converged' must be a boolean");
    if (ex.at("converged").get<bool>()) rep.verdicts.push_back(verdict_le("custom.stationary", "AC12", st.residual, cfg.tol));
  }
  if (ex.contains("max_iterations")) {
    rep.verdicts.push_back(verdict_le("custom.iterations", "AC12", static_cast<double>(st.iterations),
                                      static_cast<double>(count_at(ex, "max_iterations", 0))));
  }
  if (ex.contains("support_within")) {
    const std::vector<double> box = numbers_at(ex, "support_within", {});
    if (box.size() != 2 || !(box[0] <= box[1])) invalid("'support_within' is [lo, hi]");
    double excess = -INFINITY;
    for (std::size_t i = 0; i < st.measure.size(); ++i) {
      for (double c : st.measure.location(i)) excess = std::max({excess, box[0] - c, c - box[1]});
    }
    rep.verdicts.push_back(verdict_le("custom.support_within", "AC12", excess, 0.0, "largest coordinate outside [lo, hi]"));
  }
  if (!cfg.anchors.empty()) {
    const double d = projection_distance(st.measure, cfg.anchors, op.p);
    rep.metrics["projection_distance"] = num(d);
    if (ex.contains("projection_max")) {
      rep.verdicts.push_back(verdict_le("custom.projection", "AC11", d, number_at(ex, "projection_max", 0.0)));
    }
    const std::vector<double> radii = numbers_at(cfg.params, "tail_radii", {});
    if (!radii.empty() || ex.contains("tail_nonincreasing_from")) {
      const double r0 = number_at(ex, "tail_nonincreasing_from", radii.empty() ? 0.0 : radii.front());
      if (!(r0 > 0.0)) invalid("'tail_nonincreasing_from' must be positive");
      const std::vector<TailRow> tail = tail_decay_profile(
          st.measure, cfg.anchors, radii.empty() ? tail_radii_from(st.measure, cfg.anchors, r0, 1.25) : radii, op.p);
      rep.metrics["tail_profile"] = tail_json(tail);
      rep.tables.push_back(tail_table(tail));
      if (ex.contains("tail_nonincreasing_from")) {
        std::vector<TailRow> beyond;
        std::copy_if(tail.begin(), tail.end(), std::back_inserter(beyond), [&](const TailRow& r) { return r.radius >= r0; });
        rep.verdicts.push_back(verdict_le("custom.tail_nonincreasing", "AC12", max_normalized_increase(beyond), 0.0));
      }
    }
  }
  if (ex.contains("invariance")) {
    const json& inv = ex.at("invariance");
    if (!inv.is_object()) invalid("'expect.invariance' must be an object");
    check_keys(inv, {"delta", "delta_out", "probes"}, "expect.invariance");
    const double delta = number_at(inv, "delta", 0.0);
    const double delta_out = number_at(inv, "delta_out", delta);
    const InvarianceReport ir = invariance_check(op, cfg.anchors, delta, delta_out, count_at(inv, "probes", 100), *cfg.seed);
    json witnesses = json::array();
    for (std::size_t i = 0; i < ir.failures.size() && i < 5; ++i) {
      witnesses.push_back({{"probe", ir.failures[i].probe},
                           {"before", ir.failures[i].before},
                           {"after", ir.failures[i].after},
                           {"measure", measure_to_json(ir.failures[i].witness)}});
    }
    rep.metrics["invariance"] = {{"probes", ir.probes},
                                 {"failures", ir.failures.size()},
                                 {"max_before", ir.max_before},
                                 {"max_after", ir.max_after},
                                 {"witnesses", witnesses}};
    rep.verdicts.push_back(verdict_le("custom.invariance", "AC11", ir.max_after, delta_out,
                                      std::to_string(ir.failures.size()) + " of " + std::to_string(ir.probes) + " probes left"));
  }

  CsvTable hist{"residual_history", {"application", "residual"}, {}};
  for (std::size_t i = 0; i < st.residual_history.size(); ++i) hist.rows.push_back({static_cast<double>(i + 1), st.residual_history[i]});
  rep.tables.push_back(std::move(hist));
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep = [&] {
    switch (cfg.kind) {
      case ExperimentKind::Collapse: return run_collapse(cfg);
      case ExperimentKind::PitchforkGaussian: return run_pitchfork_gaussian(cfg);
      case ExperimentKind::NoiseToZero: return run_noise_to_zero(cfg);
      case ExperimentKind::Discontinuity: return run_discontinuity(cfg);
      case ExperimentKind::LocalCompactness: return run_local_compactness(cfg);
      case ExperimentKind::Custom: break;
    }
    return run_custom(cfg);
  }();
  rep.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace wassdyn
