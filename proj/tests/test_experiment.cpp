#include "shrink/experiment.hpp"
#include "shrink/group_enum.hpp"
#include "shrink/matrix_core.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("shrink_experiment_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "sanov.json")
        << shrink::presentation_to_json(
               shrink::sanov_presentation(shrink::MetricMode::HyperbolicDisplacement))
               .dump(2);
  }
  void TearDown() override { fs::remove_all(dir_); }

  shrink::ExperimentManifest manifest(const std::string& kind, json params,
                                      const std::string& out = "out") const {
    return shrink::ExperimentManifest::from_json(
        {{"kind", kind}, {"group", "sanov.json"}, {"output", out}, {"params", std::move(params)}},
        dir_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  std::string error_path(const std::function<void()>& fn) const {
    try {
      fn();
    } catch (const shrink::ManifestError& e) {
      return e.path();
    }
    return "<no error>";
  }

  fs::path dir_;
};

TEST_F(ExperimentTest, ValidationNamesTheOffendingField) {
  EXPECT_EQ(error_path([&] {
              shrink::ExperimentManifest::from_json({{"kind", "nope"}, {"output", "o"}}, dir_);
            }),
            "kind");
  EXPECT_EQ(error_path([&] {
              shrink::ExperimentManifest::from_json(
                  {{"kind", "enumerate"}, {"group", "missing.json"}, {"output", "o"}, {"params", {{"radius", 3}}}},
                  dir_)
                  .validate();
            }),
            "group");
  EXPECT_EQ(error_path([&] { manifest("enumerate", {{"radius", -1}}).validate(); }), "params.radius");
  EXPECT_EQ(error_path([&] { manifest("enumerate", json::object()).validate(); }), "params.radius");
  EXPECT_EQ(error_path([&] { manifest("spectral", {{"measure", "srw"}, {"windows", {5}}}).validate(); }),
            "params.seed");
  EXPECT_EQ(error_path([&] {
              manifest("discrepancy", {{"x", {"1/3", "1/5", "1/7"}}, {"steps", 2}}).validate();
            }),
            "params.x");
  EXPECT_NO_THROW(manifest("enumerate", {{"radius", 4}}).validate());
}

TEST_F(ExperimentTest, ManifestRoundTripsAndLoads) {
  const auto m = manifest("enumerate", {{"radius", 5}});
  std::ofstream(dir_ / "m.json") << m.to_json().dump(2);
  const auto loaded = shrink::ExperimentManifest::load(dir_ / "m.json");
  EXPECT_EQ(loaded.kind, shrink::ExperimentKind::Enumerate);
  EXPECT_EQ(loaded.params, m.params);
  EXPECT_EQ(loaded.group_path(), m.group_path());
  EXPECT_EQ(shrink::manifest_digest(loaded), shrink::manifest_digest(m));
  EXPECT_NE(shrink::manifest_digest(manifest("enumerate", {{"radius", 6}})), shrink::manifest_digest(m));
  EXPECT_EQ(shrink::manifest_digest(m).size(), 64u);
}

TEST_F(ExperimentTest, EnumerateWritesStampedArtifacts) {
  const auto m = manifest("enumerate", {{"radius", 8}});
  const auto outcome = shrink::run_experiment(m);
  const std::string csv = slurp(m.output_path() / "counts.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("# manifest_sha256=" + outcome.digest, 0), 0u);
  std::getline(lines, line);
  EXPECT_EQ(line, "radius,count");
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows.back(), "8,1473");
  EXPECT_EQ(outcome.results["growth"]["count"].back(), 1473);
  const auto summary = json::parse(slurp(m.output_path() / "summary.json"));
  EXPECT_EQ(summary["manifest_sha256"], outcome.digest);
  EXPECT_TRUE(summary.contains("wall_seconds"));
}

TEST_F(ExperimentTest, RerunsAreByteIdentical) {
  const auto a = manifest("spectral", {{"measure", "srw"}, {"windows", {5, 10}}, {"seed", 7}, {"steps", 4}}, "a");
  const auto b = manifest("spectral", {{"measure", "srw"}, {"windows", {5, 10}}, {"seed", 7}, {"steps", 4}}, "b");
  const auto ra = shrink::run_experiment(a);
  const auto rb = shrink::run_experiment(b, 2);
  // Output directories differ, so the digests differ; compare the bodies of
  // the tables here and the JSON results below.
  auto body = [](const std::string& s) { return s.substr(s.find('\n') + 1); };
  ASSERT_EQ(ra.files.size(), rb.files.size());
  for (const auto& f : ra.files) {
    if (f.extension() == ".json") continue;
    EXPECT_EQ(body(slurp(a.output_path() / f.filename())), body(slurp(b.output_path() / f.filename())))
        << f;
  }
  const auto first = slurp(a.output_path() / "results.json");
  shrink::run_experiment(a);
  EXPECT_EQ(slurp(a.output_path() / "results.json"), first);
  EXPECT_EQ(ra.results["lattice"], rb.results["lattice"]);
}

TEST_F(ExperimentTest, EveryKindRunsOnSmallInputs) {
  const std::vector<std::pair<std::string, json>> cases = {
      {"exponent", {{"radius", 6}, {"alphas", {0.5, 1.0}}, {"x", {"sqrt2-1", "sqrt3-1"}}}},
      {"shrink", {{"radius", 6}, {"x", {"sqrt2-1", "sqrt3-1"}}, {"psi", {{"a", 0.5}, {"b", 0}}}}},
      {"spectral", {{"measure", "shells"}, {"radii", {4, 6}}, {"steps", 3}}},
      {"boundary", {{"rank", 2}, {"census_depth", 6}, {"matrixnorm", {{4, 2}}}}},
      {"discrepancy", {{"x", {"1/3", "1/7"}}, {"steps", 3}}},
      {"ergodic", {{"radius", 6}, {"samples", 1000}, {"seed", 1}}},
  };
  for (const auto& [kind, params] : cases) {
    const auto m = manifest(kind, params, "out_" + kind);
    const auto outcome = shrink::run_experiment(m);
    EXPECT_FALSE(outcome.files.empty()) << kind;
    for (const auto& f : outcome.files) {
      const std::string text = slurp(m.output_path() / f.filename());
      EXPECT_NE(text.find(outcome.digest), std::string::npos) << kind << " " << f;
    }
  }
}

TEST_F(ExperimentTest, BudgetExceededPropagates) {
  const auto m = manifest("enumerate", {{"radius", 12}, {"max_elements", 1000}});
  EXPECT_THROW(shrink::run_experiment(m), shrink::BudgetExceeded);
}

TEST_F(ExperimentTest, PlotData) {
  const auto m = manifest("enumerate", {{"radius", 6}});
  const auto outcome = shrink::run_experiment(m);
  const std::string dat = shrink::emit_plot_data(outcome.results, shrink::PlotKind::Growth);
  EXPECT_EQ(dat.rfind("# manifest_sha256=", 0), 0u);
  EXPECT_NE(dat.find("\n6 221 "), std::string::npos);
  EXPECT_THROW(shrink::emit_plot_data(outcome.results, shrink::PlotKind::Decay), std::invalid_argument);
  EXPECT_THROW(shrink::plot_kind_from_string("histogram"), std::invalid_argument);
  EXPECT_EQ(shrink::plot_kind_from_string("decay"), shrink::PlotKind::Decay);
}

TEST(Experiment, KindNamesRoundTrip) {
  for (const auto k : {shrink::ExperimentKind::Enumerate, shrink::ExperimentKind::Exponent,
                       shrink::ExperimentKind::Shrink, shrink::ExperimentKind::Spectral,
                       shrink::ExperimentKind::Boundary, shrink::ExperimentKind::Discrepancy,
                       shrink::ExperimentKind::Ergodic}) {
    EXPECT_EQ(shrink::experiment_kind_from_string(shrink::to_string(k)), k);
  }
  EXPECT_FALSE(shrink::build_version().empty());
}

}  // namespace
