#include "shrink/boundary_tree.hpp"
#include "shrink/diophantine.hpp"
#include "shrink/fourier_spectral.hpp"
#include "shrink/group_enum.hpp"
#include "shrink/random.hpp"
#include "shrink/torus_action.hpp"

#include <benchmark/benchmark.h>

namespace {

const shrink::GroupPresentation& sanov() {
  static const auto p = shrink::sanov_presentation(shrink::MetricMode::HyperbolicDisplacement);
  return p;
}

shrink::AtomicMeasure sanov_srw() {
  return shrink::AtomicMeasure::uniform(sanov().symmetric_generators());
}

void BM_EnumerateBall(benchmark::State& state) {
  const int radius = static_cast<int>(state.range(0));
  std::size_t elements = 0;
  for (auto _ : state) {
    const auto ball = shrink::enumerate_ball(sanov(), radius);
    elements = ball.size();
    benchmark::DoNotOptimize(elements);
  }
  state.counters["elements"] = static_cast<double>(elements);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(elements));
}
BENCHMARK(BM_EnumerateBall)->Arg(8)->Arg(10)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_FixedPointScan(benchmark::State& state) {
  const auto ball = shrink::enumerate_ball(sanov(), static_cast<int>(state.range(0)));
  const shrink::FixedPointBall fpb(ball);
  shrink::CounterRng rng(3);
  const auto x = shrink::TorusPoint::real({rng.bits128(), rng.bits128()});
  const auto origin = shrink::TorusPoint::exact({0, 0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(fpb.scan(x, origin, {0.25, 0.5, 1.5}, 1e-10));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ball.size()));
}
BENCHMARK(BM_FixedPointScan)->Arg(10)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_LatticeApplyEven(benchmark::State& state) {
  const shrink::TruncatedLatticeOperator op(sanov_srw(), static_cast<int>(state.range(0)));
  std::vector<double> x(op.even_size(), 1.0), y(op.even_size());
  for (auto _ : state) {
    op.apply_even(x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(op.even_size()));
}
BENCHMARK(BM_LatticeApplyEven)->Arg(100)->Arg(400)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_FourierTable(benchmark::State& state) {
  const auto x = shrink::parse_point({"sqrt2-1", "sqrt3-1"});
  const auto nu = shrink::walk_distribution(sanov_srw(), x, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(shrink::fourier_table(nu, 50));
  }
  state.counters["atoms"] = static_cast<double>(nu.size());
}
BENCHMARK(BM_FourierTable)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Discrepancy(benchmark::State& state) {
  const auto x = shrink::parse_point({"1/3", "1/7"});
  const auto nu = shrink::walk_distribution(sanov_srw(), x, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(shrink::discrepancy(nu));
  }
  state.counters["atoms"] = static_cast<double>(nu.size());
}
BENCHMARK(BM_Discrepancy)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_PiMatrix(benchmark::State& state) {
  const shrink::tree::BoundaryModel model(2);
  const int n = static_cast<int>(state.range(0));
  const auto mu = shrink::tree::WordMeasure::uniform_sphere(model, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(shrink::tree::build_pi_matrix(model, n + 2, mu));
  }
}
BENCHMARK(BM_PiMatrix)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
