#include <benchmark/benchmark.h>

#include "hmamba/geometry.hpp"
#include "hmamba/rng.hpp"

using namespace hmamba;

namespace {

std::vector<TangentVector> random_tangents(int n, int d, Curvature k) {
  Rng rng(99);
  std::vector<TangentVector> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> e(d);
    for (auto& v : e) v = rng.normal();
    out.push_back(lift(e, k));
  }
  return out;
}

}  // namespace

static void BM_ExpMap(benchmark::State& state) {
  Curvature k(1.0);
  auto tangents = random_tangents(256, static_cast<int>(state.range(0)), k);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(exp_map_origin(tangents[i++ % tangents.size()]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ExpMap)->Arg(16)->Arg(64)->Arg(256);

static void BM_LogMap(benchmark::State& state) {
  Curvature k(1.0);
  auto tangents = random_tangents(256, static_cast<int>(state.range(0)), k);
  std::vector<LorentzPoint> pts;
  for (auto& v : tangents) pts.push_back(exp_map_origin(v));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_map_origin(pts[i++ % pts.size()]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_LogMap)->Arg(16)->Arg(64)->Arg(256);

static void BM_Distance(benchmark::State& state) {
  Curvature k(1.0);
  auto tangents = random_tangents(256, static_cast<int>(state.range(0)), k);
  std::vector<LorentzPoint> pts;
  for (auto& v : tangents) pts.push_back(exp_map_origin(v));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        hyperbolic_distance(pts[i % pts.size()], pts[(i + 7) % pts.size()]));
    ++i;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Distance)->Arg(16)->Arg(64)->Arg(256);

static void BM_ParallelTransport(benchmark::State& state) {
  Curvature k(1.0);
  int d = static_cast<int>(state.range(0));
  auto tangents = random_tangents(64, d, k);
  LorentzPoint o = LorentzPoint::origin(d, k);
  std::vector<LorentzPoint> pts;
  for (auto& v : tangents) pts.push_back(exp_map_origin(v));
  std::size_t i = 0;
  for (auto _ : state) {
    const LorentzPoint& y = pts[(i + 3) % pts.size()];
    benchmark::DoNotOptimize(parallel_transport(o, y, tangents[i % tangents.size()]));
    ++i;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ParallelTransport)->Arg(16)->Arg(64)->Arg(256);
