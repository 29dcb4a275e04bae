#include "shrink/experiment.hpp"

#include "shrink/boundary_tree.hpp"
#include "shrink/diophantine.hpp"
#include "shrink/fourier_spectral.hpp"
#include "shrink/group_enum.hpp"
#include "shrink/matrix_core.hpp"
#include "shrink/random.hpp"
#include "shrink/torus_action.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>

#ifndef SHRINK_GIT_DESCRIBE
#define SHRINK_GIT_DESCRIBE "unknown"
#endif

namespace shrink {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --- parameter access ----------------------------------------------------------------

class Params {
 public:
  Params(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ManifestError(path_, "expected an object");
  }

  bool has(const std::string& name) const { return j_.contains(name); }
  std::string field(const std::string& name) const { return path_ + "." + name; }

  long long integer(const std::string& name, std::optional<long long> fallback,
                    long long min = std::numeric_limits<long long>::min(),
                    long long max = std::numeric_limits<long long>::max()) const {
    if (!has(name)) {
      if (!fallback) throw ManifestError(field(name), "required integer is missing");
      return *fallback;
    }
    return as_integer(j_.at(name), field(name), min, max);
  }

  std::uint64_t seed(const std::string& name) const {
    if (!has(name)) throw ManifestError(field(name), "seed must be given explicitly");
    const json& v = j_.at(name);
    const bool nonnegative = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    if (!nonnegative) throw ManifestError(field(name), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  double number(const std::string& name, std::optional<double> fallback) const {
    if (!has(name)) {
      if (!fallback) throw ManifestError(field(name), "required number is missing");
      return *fallback;
    }
    const json& v = j_.at(name);
    if (!v.is_number()) throw ManifestError(field(name), "expected a number");
    return v.get<double>();
  }

  bool boolean(const std::string& name, bool fallback) const {
    if (!has(name)) return fallback;
    const json& v = j_.at(name);
    if (!v.is_boolean()) throw ManifestError(field(name), "expected true or false");
    return v.get<bool>();
  }

  std::string choice(const std::string& name, const std::string& fallback,
                     const std::vector<std::string>& allowed) const {
    std::string s = fallback;
    if (has(name)) {
      if (!j_.at(name).is_string()) throw ManifestError(field(name), "expected a string");
      s = j_.at(name).get<std::string>();
    }
    for (const auto& a : allowed) {
      if (a == s) return s;
    }
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ManifestError(field(name), "\"" + s + "\" is not one of " + list);
  }

  std::vector<long long> integers(const std::string& name,
                                  std::optional<std::vector<long long>> fallback,
                                  long long min = std::numeric_limits<long long>::min()) const {
    if (!has(name)) {
      if (!fallback) throw ManifestError(field(name), "required integer list is missing");
      return *fallback;
    }
    const json& v = j_.at(name);
    if (!v.is_array() || v.empty()) throw ManifestError(field(name), "expected a nonempty list");
    std::vector<long long> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(as_integer(v[i], field(name) + "[" + std::to_string(i) + "]", min,
                               std::numeric_limits<long long>::max()));
    }
    return out;
  }

  std::vector<double> numbers(const std::string& name) const {
    if (!has(name)) throw ManifestError(field(name), "required number list is missing");
    const json& v = j_.at(name);
    if (!v.is_array() || v.empty()) throw ManifestError(field(name), "expected a nonempty list");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        throw ManifestError(field(name) + "[" + std::to_string(i) + "]", "expected a number");
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  /// Torus point from coordinate literals ("1/3", "sqrt2-1", "0.25").
  TorusPoint point(const std::string& name, std::optional<std::vector<std::string>> fallback) const {
    std::vector<std::string> lits;
    if (!has(name)) {
      if (!fallback) throw ManifestError(field(name), "required point is missing");
      lits = *fallback;
    } else {
      const json& v = j_.at(name);
      if (!v.is_array() || v.empty()) {
        throw ManifestError(field(name), "expected a list of coordinate literals");
      }
      for (const auto& c : v) {
        if (!c.is_string()) throw ManifestError(field(name), "coordinates must be strings");
        lits.push_back(c.get<std::string>());
      }
    }
    try {
      return parse_point(lits);
    } catch (const std::exception& e) {
      throw ManifestError(field(name), e.what());
    }
  }

  Params object(const std::string& name) const {
    static const json empty = json::object();
    return Params(has(name) ? j_.at(name) : empty, field(name));
  }

  const json& raw(const std::string& name) const { return j_.at(name); }

 private:
  static long long as_integer(const json& v, const std::string& path, long long min,
                              long long max) {
    if (!v.is_number_integer()) throw ManifestError(path, "expected an integer");
    const long long x = v.get<long long>();
    if (x < min || x > max) {
      throw ManifestError(path, "value " + std::to_string(x) + " outside [" +
                                    std::to_string(min) + ", " + std::to_string(max) + "]");
    }
    return x;
  }

  const json& j_;
  std::string path_;
};

// --- typed parameters per kind ---------------------------------------------------------

struct EnumerateParams {
  int radius = 0;
  std::size_t max_elements = 0;
  bool dump_elements = false;
};

struct ExponentParams {
  int radius = 0;
  std::vector<double> alphas;
  std::optional<TorusPoint> x;
  std::optional<TorusPoint> y;
  int samples = 0;
  std::uint64_t seed = 0;
  int fit_lo = 0;
  int fit_hi = 0;
  double borderline_tolerance = 1e-10;
  std::size_t max_elements = 0;
};

struct ShrinkParams {
  int radius = 0;
  std::optional<TorusPoint> x;
  TargetFamily target;
  PsiSpec psi;
  int shell_width = 2;
  std::size_t max_elements = 0;
};

struct SpectralParams {
  std::string measure;
  std::vector<int> windows;
  int steps = 8;
  NormConfig norm;
  std::size_t max_vectors = 0;
  std::optional<int> dump_window;
  std::vector<int> radii;
  int width = 0;
  std::size_t max_elements = 0;
};

struct BoundaryParams {
  int rank = 2;
  int census_depth = 0;
  std::vector<std::pair<int, int>> pairs;
  std::size_t dense_limit = 500;
  std::vector<int> radial_radii;
  int radial_steps = 8;
};

struct DiscrepancyParams {
  std::optional<TorusPoint> x;
  int steps = 0;
  int window = 50;
  std::size_t max_atoms = 0;
  std::int64_t cutoff = 0;
  DiscrepancyConfig discrepancy;
};

struct ErgodicParams {
  int radius = 0;
  std::vector<std::vector<BigInt>> frequencies;
  int width = 0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t max_elements = 0;
};

std::size_t max_elements_of(const Params& p) {
  return static_cast<std::size_t>(p.integer("max_elements", 10'000'000, 1));
}

EnumerateParams parse_enumerate(const Params& p) {
  EnumerateParams e;
  e.radius = static_cast<int>(p.integer("radius", std::nullopt, 0, 60));
  e.max_elements = max_elements_of(p);
  e.dump_elements = p.boolean("dump_elements", false);
  return e;
}

ExponentParams parse_exponent(const Params& p) {
  ExponentParams e;
  e.radius = static_cast<int>(p.integer("radius", std::nullopt, 1, 60));
  e.alphas = p.numbers("alphas");
  e.y = p.point("y", std::vector<std::string>{"0", "0"});
  if (p.has("x") == p.has("samples")) {
    throw ManifestError(p.field("x"), "give exactly one of \"x\" and \"samples\"");
  }
  if (p.has("x")) {
    e.x = p.point("x", std::nullopt);
  } else {
    e.samples = static_cast<int>(p.integer("samples", std::nullopt, 1, 1'000'000));
    e.seed = p.seed("seed");
  }
  const auto window = p.integers("fit_window", std::vector<long long>{(e.radius + 1) / 2, e.radius}, 0);
  if (window.size() != 2 || window[0] >= window[1] || window[1] > e.radius) {
    throw ManifestError(p.field("fit_window"), "expected [lo, hi] with lo < hi <= radius");
  }
  e.fit_lo = static_cast<int>(window[0]);
  e.fit_hi = static_cast<int>(window[1]);
  e.borderline_tolerance = p.number("borderline_tolerance", 1e-10);
  e.max_elements = max_elements_of(p);
  return e;
}

ShrinkParams parse_shrink(const Params& p) {
  ShrinkParams s;
  s.radius = static_cast<int>(p.integer("radius", std::nullopt, 1, 60));
  s.x = p.point("x", std::nullopt);
  const Params t = p.object("target");
  const std::string kind = t.choice("kind", "ball", {"ball", "box", "annulus"});
  s.target.kind = kind == "ball"  ? TargetKind::EuclideanBall
                  : kind == "box" ? TargetKind::SupBox
                                  : TargetKind::Annulus;
  s.target.center = t.point("center", std::vector<std::string>{"0", "0"});
  s.target.inner_radius = t.number("inner_radius", 0.0);
  s.target.comparable_to_ball = t.boolean("comparable_to_ball", false);
  const Params psi = p.object("psi");
  s.psi.a = psi.number("a", std::nullopt);
  s.psi.b = psi.number("b", 0.0);
  s.shell_width = static_cast<int>(p.integer("shell_width", 2, 1));
  s.max_elements = max_elements_of(p);
  return s;
}

std::vector<int> to_ints(const std::vector<long long>& v) {
  return {v.begin(), v.end()};
}

SpectralParams parse_spectral(const Params& p, MetricMode metric) {
  SpectralParams s;
  s.measure = p.choice("measure", "srw", {"srw", "shells"});
  s.steps = static_cast<int>(p.integer("steps", 8, 1, 64));
  if (s.measure == "srw") {
    s.windows = to_ints(p.integers("windows", std::nullopt, 1));
    s.norm.seed = p.seed("seed");
    s.norm.tolerance = p.number("tolerance", 1e-8);
    s.norm.max_iterations = static_cast<int>(p.integer("max_iterations", 10'000, 1));
    s.norm.method = p.choice("method", "lanczos", {"lanczos", "power"}) == "lanczos"
                        ? NormMethod::Lanczos
                        : NormMethod::PowerIteration;
    s.max_vectors = static_cast<std::size_t>(p.integer("max_vectors", 60'000'000, 1));
    if (p.has("dump_window")) s.dump_window = static_cast<int>(p.integer("dump_window", 0, 1, 200));
  } else {
    s.radii = to_ints(p.integers("radii", std::nullopt, 1));
    s.width = static_cast<int>(p.integer("width", default_shell_width(metric), 1));
    s.max_elements = max_elements_of(p);
  }
  return s;
}

BoundaryParams parse_boundary(const Params& p) {
  BoundaryParams b;
  b.rank = static_cast<int>(p.integer("rank", 2, 1, 16));
  b.census_depth = static_cast<int>(p.integer("census_depth", 0, 0, 30));
  if (p.has("matrixnorm")) {
    const json& v = p.raw("matrixnorm");
    if (!v.is_array()) throw ManifestError(p.field("matrixnorm"), "expected a list of [r, n] pairs");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string path = p.field("matrixnorm") + "[" + std::to_string(i) + "]";
      if (!v[i].is_array() || v[i].size() != 2 || !v[i][0].is_number_integer() ||
          !v[i][1].is_number_integer()) {
        throw ManifestError(path, "expected [r, n]");
      }
      const int r = v[i][0].get<int>(), n = v[i][1].get<int>();
      if (n < 1 || r <= n) throw ManifestError(path, "need r > n >= 1");
      b.pairs.emplace_back(r, n);
    }
  }
  b.dense_limit = static_cast<std::size_t>(p.integer("dense_limit", 500, 0));
  const Params radial = p.object("radial");
  if (radial.has("radii")) b.radial_radii = to_ints(radial.integers("radii", std::nullopt, 1));
  b.radial_steps = static_cast<int>(radial.integer("steps", 8, 1, 64));
  if (b.census_depth == 0 && b.pairs.empty() && b.radial_radii.empty()) {
    throw ManifestError(p.field("census_depth"),
                        "nothing to do: set census_depth, matrixnorm or radial.radii");
  }
  return b;
}

DiscrepancyParams parse_discrepancy(const Params& p) {
  DiscrepancyParams d;
  d.x = p.point("x", std::nullopt);
  if (d.x->dim() != 2) throw ManifestError(p.field("x"), "discrepancy runs on the 2-torus");
  d.steps = static_cast<int>(p.integer("steps", std::nullopt, 0, 64));
  d.window = static_cast<int>(p.integer("window", 50, 1, 2000));
  d.max_atoms = static_cast<std::size_t>(p.integer("max_atoms", 5'000'000, 1));
  d.cutoff = p.integer("diophantine_cutoff", 10'000, 2);
  d.discrepancy.max_exact_atoms = static_cast<std::size_t>(p.integer("max_exact_atoms", 5000, 0));
  d.discrepancy.grid_cells = static_cast<int>(p.integer("grid_cells", 256, 1, 1 << 14));
  return d;
}

ErgodicParams parse_ergodic(const Params& p, MetricMode metric) {
  ErgodicParams e;
  e.radius = static_cast<int>(p.integer("radius", std::nullopt, 1, 40));
  e.width = static_cast<int>(p.integer("width", default_shell_width(metric), 1));
  if (p.has("frequencies")) {
    const json& v = p.raw("frequencies");
    if (!v.is_array() || v.empty()) throw ManifestError(p.field("frequencies"), "expected a list");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string path = p.field("frequencies") + "[" + std::to_string(i) + "]";
      if (!v[i].is_array() || v[i].size() != 2) throw ManifestError(path, "expected [b1, b2]");
      std::vector<BigInt> b;
      for (const auto& c : v[i]) {
        if (!c.is_number_integer()) throw ManifestError(path, "expected integers");
        b.emplace_back(c.get<long long>());
      }
      if (b[0] == 0 && b[1] == 0) throw ManifestError(path, "frequency must be nonzero");
      e.frequencies.push_back(std::move(b));
    }
  } else {
    e.frequencies = {{1, 0}, {1, 1}};
  }
  e.samples = static_cast<std::uint64_t>(p.integer("samples", 0, 0));
  if (e.samples > 0) e.seed = p.seed("seed");
  e.max_elements = max_elements_of(p);
  return e;
}

// --- output ---------------------------------------------------------------------------

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json element_json(const GroupElement& g) {
  json rows = json::array();
  for (std::size_t i = 0; i < g.dim(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < g.dim(); ++j) row.push_back(g.at(i, j).str());
    rows.push_back(row);
  }
  json out = {{"matrix", rows}};
  if (g.word()) out["word"] = word_to_string(*g.word());
  return out;
}

class ArtifactWriter {
 public:
  ArtifactWriter(fs::path dir, std::string digest) : dir_(std::move(dir)), digest_(std::move(digest)) {
    fs::create_directories(dir_);
  }

  std::string provenance() const {
    return "# manifest_sha256=" + digest_ + " version=" + build_version() + "\n";
  }

  /// CSV with a provenance comment line and a column header.
  void csv(const std::string& name, const std::vector<std::string>& columns,
           const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream s;
    s << provenance();
    for (std::size_t i = 0; i < columns.size(); ++i) s << (i ? "," : "") << columns[i];
    s << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) s << (i ? "," : "") << r[i];
      s << "\n";
    }
    text(name, s.str());
  }

  void json_file(const std::string& name, json j) {
    j["manifest_sha256"] = digest_;
    j["version"] = build_version();
    text(name, j.dump(2) + "\n");
  }

  void text(const std::string& name, const std::string& content) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    files_.push_back(path);
  }

  const std::vector<fs::path>& files() const noexcept { return files_; }
  const std::string& digest() const noexcept { return digest_; }

 private:
  fs::path dir_;
  std::string digest_;
  std::vector<fs::path> files_;
};

// --- runners ------------------------------------------------------------------------------

struct RunContext {
  const ExperimentManifest& manifest;
  ArtifactWriter& out;
  json& results;
  json& budgets;
  unsigned threads;
};

GroupPresentation load_group(const ExperimentManifest& m) {
  try {
    return load_presentation(m.group_path());
  } catch (const std::exception& e) {
    throw ManifestError("group", e.what());
  }
}

std::optional<GrowthFit> try_fit(const std::vector<std::uint64_t>& counts) {
  try {
    return fit_critical_exponent(counts);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

void run_enumerate(RunContext& c, const GroupPresentation& g, const EnumerateParams& e) {
  c.budgets["max_elements"] = e.max_elements;
  const BallIndex ball = enumerate_ball(g, e.radius, {e.max_elements, c.threads, {}});
  std::vector<std::vector<std::string>> rows;
  json growth = {{"n", json::array()}, {"count", json::array()}};
  for (std::size_t n = 0; n < ball.counts().size(); ++n) {
    rows.push_back({std::to_string(n), std::to_string(ball.counts()[n])});
    growth["n"].push_back(n);
    growth["count"].push_back(ball.counts()[n]);
  }
  c.out.csv("counts.csv", {"radius", "count"}, rows);
  c.results["growth"] = growth;
  if (const auto fit = try_fit(ball.counts())) {
    c.results["delta_fit"] = {{"delta", fit->delta}, {"lo", fit->lo}, {"hi", fit->hi},
                              {"window", {fit->window_lo, fit->window_hi}},
                              {"increments", fit->used_increments}};
  }
  c.out.text("growth.dat", emit_plot_data(c.results, PlotKind::Growth));
  if (e.dump_elements) {
    json list = json::array();
    for (const auto& el : ball.elements()) {
      json item = element_json(el.element);
      item["radius"] = el.radius;
      item["displacement"] = {el.displacement.lo, el.displacement.hi};
      list.push_back(item);
    }
    c.out.json_file("elements.json", {{"elements", list}});
  }
}

double slope_of_logs(const std::vector<std::uint64_t>& counts, int lo, int hi) {
  std::vector<double> xs, ys;
  for (int n = lo; n <= hi; ++n) {
    if (counts[n] == 0) return std::numeric_limits<double>::quiet_NaN();
    xs.push_back(n);
    ys.push_back(static_cast<double>(counts[n]));
  }
  return log_linear_slope(xs, ys);
}

void run_exponent(RunContext& c, const GroupPresentation& g, const ExponentParams& e) {
  c.budgets["max_elements"] = e.max_elements;
  const BallIndex ball = enumerate_ball(g, e.radius, {e.max_elements, c.threads, {}});
  std::vector<ExponentScan> scans;
  if (e.x) {
    ShrinkConfig cfg;
    cfg.borderline_tolerance = e.borderline_tolerance;
    cfg.threads = c.threads;
    scans.push_back(exponent_scan(ball, *e.x, *e.y, e.alphas, cfg));
  } else {
    const FixedPointBall fixed(ball);
    for (int s = 0; s < e.samples; ++s) {
      CounterRng rng(e.seed, static_cast<std::uint64_t>(s));
      const TorusPoint x = TorusPoint::real({rng.bits128(), rng.bits128()});
      scans.push_back(fixed.scan(x, *e.y, e.alphas, e.borderline_tolerance));
    }
    c.results["seeds"] = {e.seed};
  }
  std::vector<std::vector<std::string>> rows;
  json slopes = json::array();
  for (std::size_t a = 0; a < e.alphas.size(); ++a) {
    double sum = 0.0;
    int used = 0;
    for (std::size_t s = 0; s < scans.size(); ++s) {
      const auto& counts = scans[s].counts[a];
      for (int n = 0; n <= e.radius; ++n) {
        const std::uint64_t prev = n > 0 ? counts[n - 1] : 0;
        rows.push_back({std::to_string(s), std::to_string(n), fmt(e.alphas[a]),
                        std::to_string(counts[n]), std::to_string(counts[n] - prev),
                        std::to_string(scans[s].borderline[a][n])});
      }
      const double slope = slope_of_logs(counts, e.fit_lo, e.fit_hi);
      if (std::isfinite(slope)) {
        sum += slope;
        ++used;
      }
    }
    slopes.push_back({{"alpha", e.alphas[a]},
                      {"mean_slope", used ? json(sum / used) : json(nullptr)},
                      {"samples_with_solutions", used}});
  }
  c.out.csv("exponent.csv", {"sample", "n", "alpha", "count", "newSolutionsInShell", "borderline"},
            rows);
  c.results["fit_window"] = {e.fit_lo, e.fit_hi};
  c.results["slopes"] = slopes;
  c.results["samples"] = scans.size();
  if (const auto fit = try_fit(ball.counts())) c.results["delta_fit"] = fit->delta;
}

json witness_json(const Witness& w) {
  json j = element_json(w.element);
  j["displacement"] = {w.displacement.lo, w.displacement.hi};
  j["distance"] = w.distance;
  j["target_radius"] = w.target_radius;
  return j;
}

void run_shrink(RunContext& c, const GroupPresentation& g, const ShrinkParams& s) {
  c.budgets["max_elements"] = s.max_elements;
  const BallIndex ball = enumerate_ball(g, s.radius, {s.max_elements, c.threads, {}});
  ShrinkConfig cfg;
  cfg.shell_width = s.shell_width;
  cfg.threads = c.threads;
  const ShrinkResult r = solve_shrinking_target(ball, *s.x, s.target, s.psi, cfg);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t n = 0; n < r.counts.size(); ++n) {
    rows.push_back({std::to_string(n), fmt(s.psi.a), std::to_string(r.counts[n]),
                    std::to_string(r.new_in_shell[n]),
                    r.has_solution_in_shell[n] ? "1" : "0"});
  }
  c.out.csv("shrink.csv", {"n", "alpha", "count", "newSolutionsInShell", "hasSolutionInShell"},
            rows);
  json wit = json::array(), border = json::array();
  for (const auto& w : r.witnesses) wit.push_back(witness_json(w));
  for (const auto& w : r.borderline) border.push_back(witness_json(w));
  c.out.json_file("witnesses.json", {{"witnesses", wit}, {"borderline", border}});
  const auto fit = try_fit(ball.counts());
  if (fit) {
    c.results["delta_fit"] = fit->delta;
    c.results["psi_regime"] = to_string(classify_psi(s.psi, fit->delta, 1e-3));
  }
  c.results["solutions"] = r.counts.back();
  c.results["borderline"] = r.borderline.size();
}

void run_spectral(RunContext& c, const GroupPresentation& g, const SpectralParams& s) {
  if (s.measure == "srw") {
    const AtomicMeasure mu = AtomicMeasure::uniform(g.symmetric_generators());
    c.budgets["max_vectors"] = s.max_vectors;
    c.results["seeds"] = {s.norm.seed};
    std::vector<std::vector<std::string>> rows;
    json lattice = json::array();
    for (int B : s.windows) {
      const TruncatedLatticeOperator op(mu, B, {s.max_vectors, c.threads});
      const NormEstimate est = operator_norm_estimate(op, s.norm);
      rows.push_back({std::to_string(B), fmt(est.value), fmt(est.residual),
                      std::to_string(est.iterations), est.converged ? "1" : "0",
                      fmt(op.dropped_mass())});
      lattice.push_back({{"window", B}, {"value", est.value}, {"residual", est.residual},
                         {"iterations", est.iterations}, {"converged", est.converged},
                         {"seed", est.seed}, {"method", to_string(est.method)},
                         {"dropped_mass", op.dropped_mass()}});
      if (s.dump_window && *s.dump_window == B) {
        std::ostringstream coo;
        coo << c.out.provenance();
        op.write_coo(coo, "simple random walk on the generators");
        c.out.text("operator_B" + std::to_string(B) + ".coo", coo.str());
      }
    }
    c.out.csv("lattice.csv",
              {"window", "value", "residual", "iterations", "converged", "dropped_mass"}, rows);
    const ReturnProbabilities rp = return_prob_norm_estimate(mu, s.steps);
    std::vector<std::vector<std::string>> rrows;
    for (std::size_t k = 0; k < rp.r.size(); ++k) {
      rrows.push_back({std::to_string(k + 1), fmt(rp.r[k]), rp.numerators[k].str(),
                       rp.denominators[k].str()});
    }
    c.out.csv("returns.csv", {"k", "r_k", "p_2k_numerator", "p_2k_denominator"}, rrows);
    c.results["lattice"] = lattice;
    c.results["return_estimate"] = rp.r.back();
    c.results["power_mean_monotone"] = is_power_mean_monotone(rp);
    if (g.rank() >= 1 && g.freeness_assumed()) {
      c.results["free_group_srw_norm"] = free_group_srw_norm(static_cast<int>(g.rank()));
    }
    return;
  }
  const int top = *std::max_element(s.radii.begin(), s.radii.end());
  c.budgets["max_elements"] = s.max_elements;
  const BallIndex ball = enumerate_ball(g, top, {s.max_elements, c.threads, {}});
  const auto fit = try_fit(ball.counts());
  const double delta = fit ? fit->delta : std::numeric_limits<double>::quiet_NaN();
  json spectral = {{"n", json::array()}, {"estimate", json::array()}, {"envelope", json::array()}};
  std::vector<std::vector<std::string>> rows;
  for (int n : s.radii) {
    const auto shell = shell_at(ball, n, s.width);
    if (!shell) continue;
    const ReturnProbabilities rp = return_prob_norm_estimate(shell->measure(), s.steps);
    const double est = rp.r.back();
    rows.push_back({std::to_string(n), std::to_string(shell->size()), fmt(est),
                    fmt(-2.0 * std::log(est)), fmt(delta * n)});
    spectral["n"].push_back(n);
    spectral["estimate"].push_back(est);
    spectral["envelope"].push_back(number_or_null(delta * n));
  }
  c.out.csv("spectral.csv", {"n", "shell_size", "estimate", "minus_2_log_estimate", "envelope"},
            rows);
  c.results["delta_fit"] = number_or_null(delta);
  c.results["spectral"] = spectral;
  c.out.text("spectral.dat", emit_plot_data(c.results, PlotKind::Spectral));
}

void run_boundary(RunContext& c, const BoundaryParams& b) {
  const tree::BoundaryModel model(b.rank);
  c.results["delta"] = model.delta();
  if (b.census_depth > 0) {
    const tree::SphereCensus census = tree::sphere_census(model, b.census_depth);
    std::vector<std::vector<std::string>> rows;
    json growth = {{"n", json::array()}, {"count", json::array()}};
    std::uint64_t ball = 0;
    for (std::size_t L = 0; L < census.counts.size(); ++L) {
      const std::string sum = L == 0 ? "1" : census.cylinder_sums[L].str();
      rows.push_back({std::to_string(L), std::to_string(census.counts[L]), sum});
      ball += census.counts[L];
      growth["n"].push_back(L);
      growth["count"].push_back(ball);
    }
    c.out.csv("census.csv", {"length", "sphere_count", "cylinder_sum"}, rows);
    c.results["growth"] = growth;
    c.out.text("growth.dat", emit_plot_data(c.results, PlotKind::Growth));
  }
  if (!b.pairs.empty()) {
    const tree::MatrixNormReport rep = tree::verify_matrixnorm(model, b.pairs, b.dense_limit);
    std::vector<std::vector<std::string>> rows;
    for (const auto& cs : rep.cases) {
      rows.push_back({std::to_string(cs.r), std::to_string(cs.n), std::to_string(cs.rows),
                      fmt(cs.gershgorin), fmt(cs.ratio),
                      cs.spectral_norm ? fmt(*cs.spectral_norm) : ""});
    }
    c.out.csv("matrixnorm.csv", {"r", "n", "rows", "gershgorin", "ratio", "spectral_norm"}, rows);
    c.results["matrixnorm"] = {{"fitted_constant", rep.fitted_constant},
                               {"spectral_below_gershgorin", rep.spectral_below_gershgorin}};
  }
  if (!b.radial_radii.empty()) {
    json spectral = {{"n", json::array()}, {"estimate", json::array()}, {"envelope", json::array()}};
    std::vector<std::vector<std::string>> rows;
    for (int n : b.radial_radii) {
      const ReturnProbabilities rp = tree::radial_return_probabilities(model, n, b.radial_steps);
      const double est = rp.r.back();
      rows.push_back({std::to_string(n), fmt(est), fmt(-2.0 * std::log(est)),
                      fmt(model.delta() * n)});
      spectral["n"].push_back(n);
      spectral["estimate"].push_back(est);
      spectral["envelope"].push_back(model.delta() * n);
    }
    c.out.csv("radial.csv", {"n", "estimate", "minus_2_log_estimate", "envelope"}, rows);
    c.results["spectral"] = spectral;
    c.out.text("spectral.dat", emit_plot_data(c.results, PlotKind::Spectral));
  }
}

void run_discrepancy(RunContext& c, const GroupPresentation& g, const DiscrepancyParams& d) {
  const AtomicMeasure mu = AtomicMeasure::uniform(g.symmetric_generators());
  c.budgets["max_atoms"] = d.max_atoms;
  c.budgets["max_exact_atoms"] = d.discrepancy.max_exact_atoms;
  DiscrepancyConfig dcfg = d.discrepancy;
  dcfg.threads = c.threads;
  json decay = {{"k", json::array()},
                {"max_fourier", json::array()},
                {"etk_bound", json::array()},
                {"discrepancy", json::array()}};
  std::vector<std::vector<std::string>> rows;
  std::vector<double> ks, maxima;
  double etk_constant = 0.0;
  for (int k = 0; k <= d.steps; ++k) {
    const TorusAtomicMeasure nu = walk_distribution(mu, *d.x, k, d.max_atoms);
    const FourierTable table = fourier_table(nu, d.window, c.threads);
    const MaxFourier mf = max_fourier(table);
    const EtkBound etk = etk_bound(table);
    const DiscrepancyResult disc = discrepancy(nu, dcfg);
    etk_constant = etk.constant;
    rows.push_back({std::to_string(k), std::to_string(nu.size()), fmt(mf.value), fmt(etk.value),
                    fmt(disc.value), disc.exact ? disc.exact->str() : "",
                    disc.attained ? "1" : "0", disc.approximate ? "1" : "0",
                    fmt(disc.error_bound)});
    decay["k"].push_back(k);
    decay["max_fourier"].push_back(mf.value);
    decay["etk_bound"].push_back(etk.value);
    decay["discrepancy"].push_back(disc.value);
    if (k >= 1 && mf.value > 0) {
      ks.push_back(k);
      maxima.push_back(mf.value);
    }
  }
  c.out.csv("decay.csv",
            {"k", "atoms", "maxFourier", "etkBound", "discrepancy", "discrepancy_exact",
             "attained", "approximate", "error_bound"},
            rows);
  c.results["decay"] = decay;
  c.results["etk_constant"] = etk_constant;
  c.results["window"] = d.window;
  if (ks.size() >= 2) {
    c.results["max_fourier_log_slope"] = log_linear_slope(ks, maxima);
    c.results["decay_rate_status"] = "fitted, not certified";
  }
  c.out.text("decay.dat", emit_plot_data(c.results, PlotKind::Decay));

  const DiophantineVerdict v = diophantine_type(*d.x, d.cutoff);
  json wit = json::array();
  for (const auto& w : v.witnesses) {
    wit.push_back({{"q", w.q}, {"distance", w.distance}, {"exponent", number_or_null(w.exponent)}});
  }
  json verdict = {{"point", d.x->to_string()},
                  {"cutoff", v.cutoff},
                  {"m_estimate", number_or_null(v.m_estimate)},
                  {"rational", v.rational_denominator.has_value() && std::isinf(v.m_estimate)},
                  {"resolution_limited", v.resolution_limited},
                  {"summary", v.summary()},
                  {"witnesses", wit}};
  if (v.rational_denominator) verdict["denominator"] = v.rational_denominator->str();
  c.out.json_file("verdict.json", verdict);
  c.results["verdict"] = v.summary();
}

void run_ergodic(RunContext& c, const GroupPresentation& g, const ErgodicParams& e) {
  c.budgets["max_elements"] = e.max_elements;
  const BallIndex ball = enumerate_ball(g, e.radius, {e.max_elements, c.threads, {}});
  const auto fit = try_fit(ball.counts());
  const double delta = fit ? fit->delta : std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<std::string>> rows;
  double constant = 0.0;
  for (int n = 1; n <= e.radius; ++n) {
    const auto shell = shell_at(ball, n, e.width);
    if (!shell) continue;
    for (const auto& b : e.frequencies) {
      const Rational exact = ergodic_character_error(*shell, b);
      const double norm = std::sqrt(static_cast<double>(exact));
      const double envelope = static_cast<double>(n) * n * std::exp(-delta * n / 2.0);
      if (std::isfinite(envelope)) constant = std::max(constant, norm / envelope);
      std::vector<std::string> row = {std::to_string(n), b[0].str(), b[1].str(),
                                      std::to_string(shell->size()), exact.str(), fmt(norm)};
      if (e.samples > 0) {
        const auto mc = ergodic_character_error_mc(*shell, b, e.samples,
                                                   e.seed + static_cast<std::uint64_t>(n));
        row.push_back(fmt(mc.estimate));
        row.push_back(fmt(mc.std_error));
      }
      rows.push_back(std::move(row));
    }
  }
  std::vector<std::string> cols = {"n", "b1", "b2", "shell_size", "norm_sq_exact", "norm"};
  if (e.samples > 0) {
    cols.push_back("mc_norm_sq");
    cols.push_back("mc_std_error");
    c.results["seeds"] = {e.seed};
  }
  c.out.csv("ergodic.csv", cols, rows);
  c.results["delta_fit"] = number_or_null(delta);
  c.results["envelope_constant"] = constant;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace

// --- manifest -------------------------------------------------------------------------

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Enumerate: return "enumerate";
    case ExperimentKind::Exponent: return "exponent";
    case ExperimentKind::Shrink: return "shrink";
    case ExperimentKind::Spectral: return "spectral";
    case ExperimentKind::Boundary: return "boundary";
    case ExperimentKind::Discrepancy: return "discrepancy";
    case ExperimentKind::Ergodic: return "ergodic";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::Enumerate, ExperimentKind::Exponent, ExperimentKind::Shrink,
                 ExperimentKind::Spectral, ExperimentKind::Boundary, ExperimentKind::Discrepancy,
                 ExperimentKind::Ergodic}) {
    if (to_string(k) == s) return k;
  }
  throw ManifestError("kind", "unknown experiment kind \"" + s + "\"");
}

ExperimentManifest ExperimentManifest::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ManifestError("(root)", "manifest must be a JSON object");
  ExperimentManifest m;
  m.base_dir = base_dir;
  if (!j.contains("kind") || !j["kind"].is_string()) {
    throw ManifestError("kind", "required string is missing");
  }
  m.kind = experiment_kind_from_string(j["kind"].get<std::string>());
  if (j.contains("group")) {
    if (!j["group"].is_string()) throw ManifestError("group", "expected a path string");
    m.group = j["group"].get<std::string>();
  } else if (m.kind != ExperimentKind::Boundary) {
    throw ManifestError("group", "required group file path is missing");
  }
  if (!j.contains("output") || !j["output"].is_string()) {
    throw ManifestError("output", "required output directory is missing");
  }
  m.output = j["output"].get<std::string>();
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw ManifestError("params", "expected an object");
    m.params = j["params"];
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "kind" && key != "group" && key != "output" && key != "params") {
      throw ManifestError(key, "unknown manifest field");
    }
  }
  return m;
}

ExperimentManifest ExperimentManifest::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ManifestError("(manifest)", "cannot open " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ManifestError("(manifest)", std::string("invalid JSON: ") + e.what());
  }
  return from_json(j, file.parent_path().empty() ? fs::path(".") : file.parent_path());
}

json ExperimentManifest::to_json() const {
  json j = {{"kind", shrink::to_string(kind)}, {"output", output.generic_string()}, {"params", params}};
  if (!group.empty()) j["group"] = group.generic_string();
  return j;
}

fs::path ExperimentManifest::group_path() const {
  return group.is_absolute() ? group : base_dir / group;
}

fs::path ExperimentManifest::output_path() const {
  return output.is_absolute() ? output : base_dir / output;
}

void ExperimentManifest::validate() const {
  std::optional<GroupPresentation> g;
  if (kind != ExperimentKind::Boundary || !group.empty()) {
    if (!fs::is_regular_file(group_path())) {
      throw ManifestError("group", "file not found: " + group_path().string());
    }
    g = load_group(*this);
  }
  const Params p(params, "params");
  switch (kind) {
    case ExperimentKind::Enumerate: parse_enumerate(p); break;
    case ExperimentKind::Exponent: parse_exponent(p); break;
    case ExperimentKind::Shrink: parse_shrink(p); break;
    case ExperimentKind::Spectral: parse_spectral(p, g->metric()); break;
    case ExperimentKind::Boundary: parse_boundary(p); break;
    case ExperimentKind::Discrepancy: parse_discrepancy(p); break;
    case ExperimentKind::Ergodic: parse_ergodic(p, g->metric()); break;
  }
}

std::string manifest_digest(const ExperimentManifest& m) {
  std::string data = m.to_json().dump();
  if (!m.group.empty()) {
    std::ifstream in(m.group_path(), std::ios::binary);
    if (!in) throw ManifestError("group", "file not found: " + m.group_path().string());
    data.append(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return sha256_hex(data);
}

std::string build_version() { return SHRINK_GIT_DESCRIBE; }

ExperimentOutcome run_experiment(const ExperimentManifest& m, unsigned threads) {
  m.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome outcome;
  outcome.digest = manifest_digest(m);
  ArtifactWriter out(m.output_path(), outcome.digest);
  json results = {{"kind", to_string(m.kind)},
                  {"manifest", m.to_json()},
                  {"manifest_sha256", outcome.digest},
                  {"version", build_version()},
                  {"seeds", json::array()}};
  json budgets = json::object();
  RunContext ctx{m, out, results, budgets, std::max(1u, threads)};
  const Params p(m.params, "params");
  std::optional<GroupPresentation> g;
  if (!m.group.empty()) g = load_group(m);
  switch (m.kind) {
    case ExperimentKind::Enumerate: run_enumerate(ctx, *g, parse_enumerate(p)); break;
    case ExperimentKind::Exponent: run_exponent(ctx, *g, parse_exponent(p)); break;
    case ExperimentKind::Shrink: run_shrink(ctx, *g, parse_shrink(p)); break;
    case ExperimentKind::Spectral: run_spectral(ctx, *g, parse_spectral(p, g->metric())); break;
    case ExperimentKind::Boundary: run_boundary(ctx, parse_boundary(p)); break;
    case ExperimentKind::Discrepancy: run_discrepancy(ctx, *g, parse_discrepancy(p)); break;
    case ExperimentKind::Ergodic: run_ergodic(ctx, *g, parse_ergodic(p, g->metric())); break;
  }
  results["budgets"] = budgets;
  out.json_file("results.json", results);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json files = json::array();
  for (const auto& f : out.files()) files.push_back(f.filename().generic_string());
  files.push_back("summary.json");
  json summary = {{"kind", to_string(m.kind)},
                  {"seeds", results["seeds"]},
                  {"budgets", budgets},
                  {"threads", ctx.threads},
                  {"wall_seconds", wall},
                  {"files", files}};
  out.json_file("summary.json", summary);
  summary["manifest_sha256"] = outcome.digest;
  summary["version"] = build_version();
  results["manifest_sha256"] = outcome.digest;
  outcome.results = std::move(results);
  outcome.summary = std::move(summary);
  outcome.files = out.files();
  return outcome;
}

// --- plot data ---------------------------------------------------------------------------

PlotKind plot_kind_from_string(const std::string& s) {
  if (s == "growth") return PlotKind::Growth;
  if (s == "spectral") return PlotKind::Spectral;
  if (s == "decay") return PlotKind::Decay;
  throw std::invalid_argument("unknown plot kind \"" + s + "\" (growth, spectral, decay)");
}

std::string emit_plot_data(const json& results, PlotKind kind) {
  const char* key = kind == PlotKind::Growth     ? "growth"
                    : kind == PlotKind::Spectral ? "spectral"
                                                 : "decay";
  if (!results.contains(key)) {
    throw std::invalid_argument(std::string("results have no \"") + key + "\" table");
  }
  const json& t = results.at(key);
  auto value = [](const json& v) {
    return v.is_null() ? std::string("nan") : fmt(v.get<double>());
  };
  std::ostringstream s;
  if (results.contains("manifest_sha256")) {
    s << "# manifest_sha256=" << results["manifest_sha256"].get<std::string>() << "\n";
  }
  switch (kind) {
    case PlotKind::Growth:
      s << "# n[radius] count[elements] log_count[nats]\n";
      for (std::size_t i = 0; i < t.at("n").size(); ++i) {
        const double count = t["count"][i].get<double>();
        s << t["n"][i].get<long long>() << " " << fmt(count) << " " << fmt(std::log(count)) << "\n";
      }
      break;
    case PlotKind::Spectral:
      s << "# n[radius] estimate[1] minus_2_log_estimate[nats] envelope[nats]\n";
      for (std::size_t i = 0; i < t.at("n").size(); ++i) {
        const double est = t["estimate"][i].get<double>();
        s << t["n"][i].get<long long>() << " " << fmt(est) << " " << fmt(-2.0 * std::log(est))
          << " " << value(t["envelope"][i]) << "\n";
      }
      break;
    case PlotKind::Decay:
      s << "# k[steps] max_fourier[1] etk_bound[1] discrepancy[1]\n";
      for (std::size_t i = 0; i < t.at("k").size(); ++i) {
        s << t["k"][i].get<long long>() << " " << value(t["max_fourier"][i]) << " "
          << value(t["etk_bound"][i]) << " " << value(t["discrepancy"][i]) << "\n";
      }
      break;
  }
  return s.str();
}

}  // namespace shrink
