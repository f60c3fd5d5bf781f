#include <benchmark/benchmark.h>

#include "emulab/phy/chain.hpp"
#include "emulab/phy/codec.hpp"
#include "emulab/phy/modem.hpp"
#include "emulab/rng.hpp"

using namespace emulab;

namespace {

std::vector<std::uint8_t> payload(std::size_t n) {
  Rng rng(1);
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = rng.byte();
  return out;
}

void BM_Viterbi(benchmark::State& state) {
  const scenario::CodeRate rate{1, 2};
  const auto bits = phy::bytes_to_bits(payload(512));
  const auto coded = phy::encode(bits, rate);
  std::vector<float> llr(coded.size());
  for (std::size_t i = 0; i < coded.size(); ++i) llr[i] = coded[i] ? -4.0F : 4.0F;
  for (auto _ : state) benchmark::DoNotOptimize(phy::viterbi_decode(llr, rate));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(bits.size()));
}
BENCHMARK(BM_Viterbi);

void BM_TxChain(benchmark::State& state) {
  const auto table = scenario::default_mcs_table();
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto p = payload(512);
  for (auto _ : state) benchmark::DoNotOptimize(phy::tx_chain(p, table[m], m, {4, 0.35}, 250e3));
}
BENCHMARK(BM_TxChain)->DenseRange(0, 4);

void BM_RxChain(benchmark::State& state) {
  const auto table = scenario::default_mcs_table();
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto tx = phy::tx_chain(payload(512), table[m], m, {4, 0.35}, 250e3);
  for (auto _ : state) benchmark::DoNotOptimize(phy::rx_chain(tx, table, {4, 0.35}, {{}, 250e3}));
}
BENCHMARK(BM_RxChain)->DenseRange(0, 4);

void BM_MeasureProbe(benchmark::State& state) {
  const auto table = scenario::default_mcs_table();
  const auto tx = phy::tx_chain(payload(16), table[0], 0, {4, 0.35}, 250e3);
  for (auto _ : state) benchmark::DoNotOptimize(phy::measure_probe(tx, {4, 0.35}, {{}, 250e3}));
}
BENCHMARK(BM_MeasureProbe);

}  // namespace
