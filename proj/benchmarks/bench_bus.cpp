#include <benchmark/benchmark.h>

#include "emulab/bus.hpp"

using namespace emulab;

namespace {

void BM_Publish(benchmark::State& state) {
  bus::Bus b;
  b.register_topic("bench.t", bus::TopicKind::Telemetry);
  std::vector<std::unique_ptr<bus::Subscription>> subs;
  for (int i = 0; i < state.range(0); ++i) subs.push_back(b.subscribe("bench.t", bus::Mode::Latest));
  const std::vector<std::uint8_t> payload(static_cast<std::size_t>(state.range(1)), 0x5a);
  for (auto _ : state) benchmark::DoNotOptimize(b.publish("bench.t", payload));
  state.SetBytesProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Publish)->Args({0, 64})->Args({1, 64})->Args({4, 64})->Args({1, 4096})->Args({4, 65536});

}  // namespace
