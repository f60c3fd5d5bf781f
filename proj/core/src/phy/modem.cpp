#include "emulab/phy/modem.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "emulab/error.hpp"

namespace emulab::phy {

namespace {

constexpr float kInvSqrt2 = static_cast<float>(1.0 / std::numbers::sqrt2);

constexpr std::array<cf32, 2> kBpsk{cf32{1.0F, 0.0F}, cf32{-1.0F, 0.0F}};

// First bit selects the sign of I, second the sign of Q (0 -> +).
constexpr std::array<cf32, 4> kQpsk{cf32{kInvSqrt2, kInvSqrt2}, cf32{kInvSqrt2, -kInvSqrt2},
                                cf32{-kInvSqrt2, kInvSqrt2}, cf32{-kInvSqrt2, -kInvSqrt2}};

// Label at angle k*pi/4 is gray(k) = k ^ (k >> 1).
std::array<cf32, 8> make_psk8() {
  std::array<cf32, 8> table{};
  for (unsigned k = 0; k < 8; ++k) {
    const unsigned label = k ^ (k >> 1);
    const double phi = k * std::numbers::pi / 4.0;
    table[label] = cf32{static_cast<float>(std::cos(phi)), static_cast<float>(std::sin(phi))};
  }
  return table;
}


}  // namespace

std::span<const cf32> constellation(Modulation m) {
  switch (m) {
    case Modulation::BPSK: return kBpsk;
    case Modulation::QPSK: return kQpsk;
    case Modulation::PSK8: {
      static const std::array<cf32, 8> psk8 = make_psk8();
      return psk8;
    }
  }
  throw Error(Errc::UnknownModulation, std::to_string(static_cast<int>(m)));
}

std::vector<cf32> modulate(std::span<const std::uint8_t> bits, Modulation m) {
  const auto table = constellation(m);
  const int bps = scenario::bits_per_symbol(m);
  if (bits.size() % static_cast<std::size_t>(bps) != 0)
    throw Error(Errc::LengthMismatch, std::to_string(bits.size()), "bit count not divisible by bits per symbol");
  std::vector<cf32> out;
  out.reserve(bits.size() / bps);
  for (std::size_t i = 0; i < bits.size(); i += bps) {
    unsigned label = 0;
    for (int b = 0; b < bps; ++b) label = (label << 1) | (bits[i + b] & 1U);
    out.push_back(table[label]);
  }
  return out;
}

std::vector<float> demodulate_soft(std::span<const cf32> symbols, Modulation m, double noise_var) {
  const auto table = constellation(m);
  const int bps = scenario::bits_per_symbol(m);
  const double nv = std::max(noise_var, 1e-12);
  std::vector<float> llr;
  llr.reserve(symbols.size() * bps);
  switch (m) {
    case Modulation::BPSK:
      for (const auto& y : symbols) llr.push_back(static_cast<float>(4.0 * y.real() / nv));
      break;
    case Modulation::QPSK: {
      const double k = 2.0 * std::numbers::sqrt2 / nv;
      for (const auto& y : symbols) {
        llr.push_back(static_cast<float>(k * y.real()));
        llr.push_back(static_cast<float>(k * y.imag()));
      }
      break;
    }
    case Modulation::PSK8:
      for (const auto& y : symbols) {
        std::array<double, 8> d{};
        for (std::size_t l = 0; l < table.size(); ++l) d[l] = std::norm(std::complex<double>(y) - std::complex<double>(table[l]));
        for (int b = bps - 1; b >= 0; --b) {
          double best0 = std::numeric_limits<double>::infinity();
          double best1 = best0;
          for (unsigned l = 0; l < 8; ++l) {
            if ((l >> b) & 1U) best1 = std::min(best1, d[l]);
            else best0 = std::min(best0, d[l]);
          }
          llr.push_back(static_cast<float>((best1 - best0) / nv));
        }
      }
      break;
  }
  return llr;
}

Bits hard_decision(std::span<const float> llrs) {
  Bits out(llrs.size());
  for (std::size_t i = 0; i < llrs.size(); ++i) out[i] = llrs[i] < 0.0F ? 1 : 0;
  return out;
}

}  // namespace emulab::phy
