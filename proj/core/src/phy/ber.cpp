#include "emulab/phy/ber.hpp"

#include <algorithm>
#include <cmath>

#include "emulab/error.hpp"
#include "emulab/phy/codec.hpp"
#include "emulab/phy/modem.hpp"
#include "emulab/rng.hpp"

namespace emulab::phy {

BerPoint simulate_ber(scenario::Modulation mod, std::optional<scenario::CodeRate> rate, double ebn0_db,
                      std::uint64_t info_bits, std::uint64_t seed, std::size_t block_bits) {
  if (info_bits == 0) throw Error(Errc::BadParams, "bits", "need at least one bit");
  if (block_bits == 0) throw Error(Errc::BadParams, "block_bits", "must be positive");
  const double r = rate ? rate->value() : 1.0;
  const double es_n0 = std::pow(10.0, ebn0_db / 10.0) * scenario::bits_per_symbol(mod) * r;
  const double noise_var = 1.0 / es_n0;

  BerPoint out{ebn0_db, 0, 0};
  const auto stream = "ber/" + std::string(scenario::to_string(mod)) + "/" + (rate ? rate->str() : "uncoded");
  for (std::uint64_t block = 0; out.bits < info_bits; ++block) {
    Rng rng(seed, stream, block);
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(block_bits, info_bits - out.bits));
    Bits info(n);
    for (auto& b : info) b = rng.bit();
    Bits coded = rate ? encode(info, *rate) : info;
    const int k = scenario::bits_per_symbol(mod);
    const std::size_t pad = (k - coded.size() % k) % k;
    coded.insert(coded.end(), pad, 0);

    auto symbols = modulate(coded, mod);
    for (auto& s : symbols) {
      const auto z = rng.complex_gaussian(noise_var);
      s += cf32(static_cast<float>(z.real()), static_cast<float>(z.imag()));
    }
    auto llrs = demodulate_soft(symbols, mod, noise_var);
    llrs.resize(llrs.size() - pad);
    const Bits decided = rate ? viterbi_decode(llrs, *rate) : hard_decision(llrs);
    for (std::size_t i = 0; i < n; ++i) out.errors += decided[i] != info[i];
    out.bits += n;
  }
  return out;
}

}  // namespace emulab::phy
