#include <benchmark/benchmark.h>

#include <cmath>

#include "hmamba/model.hpp"
#include "hmamba/rng.hpp"
#include "hmamba/ssm.hpp"

using namespace hmamba;

static void BM_SsmScan(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  const int S = 8, C = 32;
  Rng rng(3);
  std::vector<DiscretizedStep> steps(L);
  Tensor c(C, S), x(L, C);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = rng.normal();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  for (auto& s : steps) {
    for (int n = 0; n < S; ++n) {
      s.a_bar.push_back(std::exp(-0.01 * (n + 1)));
      s.b_bar_x.push_back(0.01 * rng.normal());
    }
    s.delta = 0.01;
  }
  std::vector<Tensor> cs(L, c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ssm_scan(steps, cs, x));
  }
  state.SetItemsProcessed(state.iterations() * L);
}
BENCHMARK(BM_SsmScan)->Arg(256)->Arg(1024)->Arg(4096)->Arg(8192);

static void BM_EncoderForward(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  ModelConfig mc;
  mc.variant = Variant::Full;
  mc.d = 32;
  mc.d_state = 8;
  mc.expand = 1;
  mc.conv_width = 2;
  mc.n_layers = 1;
  mc.k = 1.0;
  mc.dropout = 0.0;
  mc.max_seq_len = L;
  mc.vocab_size = 1000;
  ModelState s = ModelState::init(mc, 5);
  Rng rng(6);
  std::vector<int> ids(L);
  for (int i = 0; i < L; ++i) ids[i] = 1 + static_cast<int>(rng.uniform_int(999));
  for (auto _ : state) {
    Forward f(s);
    benchmark::DoNotOptimize(f.encode(ids));
  }
  state.SetItemsProcessed(state.iterations() * L);
}
BENCHMARK(BM_EncoderForward)->Arg(256)->Arg(1024)->Arg(4096);

BENCHMARK_MAIN();
