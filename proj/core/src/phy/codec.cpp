#include "emulab/phy/codec.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <limits>

#include "emulab/error.hpp"

namespace emulab::phy {

namespace {

constexpr int kStates = 1 << (kConstraintLength - 1);

// Keep masks over the interleaved mother stream a0 b0 a1 b1 ...
constexpr std::array<std::uint8_t, 2> kKeepHalf{1, 1};
constexpr std::array<std::uint8_t, 4> kKeepTwoThirds{1, 1, 1, 0};
constexpr std::array<std::uint8_t, 6> kKeepThreeQuarters{1, 1, 1, 0, 0, 1};

std::span<const std::uint8_t> keep_mask(CodeRate rate) {
  if (rate == CodeRate{1, 2}) return kKeepHalf;
  if (rate == CodeRate{2, 3}) return kKeepTwoThirds;
  if (rate == CodeRate{3, 4}) return kKeepThreeQuarters;
  throw Error(Errc::UnsupportedRate, rate.str());
}

// Encoder outputs for (state, input). The register holds the newest bit in
// position 6; state is the six most recent inputs (bits 5..0 of the register
// after the shift drops the oldest).
struct Trellis {
  std::array<std::array<std::uint8_t, 2>, kStates> out{};   // 2-bit symbol a<<1|b
  std::array<std::array<std::uint8_t, 2>, kStates> next{};

  Trellis() {
    for (unsigned s = 0; s < kStates; ++s) {
      for (unsigned in = 0; in < 2; ++in) {
        const unsigned reg = (in << 6) | s;
        const unsigned a = std::popcount(reg & kGeneratorA) & 1U;
        const unsigned b = std::popcount(reg & kGeneratorB) & 1U;
        out[s][in] = static_cast<std::uint8_t>((a << 1) | b);
        next[s][in] = static_cast<std::uint8_t>(reg >> 1);
      }
    }
  }
};

const Trellis& trellis() {
  static const Trellis t;
  return t;
}

}  // namespace

bool is_supported_rate(CodeRate rate) noexcept {
  return rate == CodeRate{1, 2} || rate == CodeRate{2, 3} || rate == CodeRate{3, 4};
}

std::size_t coded_length(std::size_t n_info_bits, CodeRate rate) {
  const auto mask = keep_mask(rate);
  const std::size_t mother = 2 * (n_info_bits + kTailBits);
  const std::size_t per_period = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  std::size_t n = (mother / mask.size()) * per_period;
  for (std::size_t i = 0; i < mother % mask.size(); ++i) n += mask[i];
  return n;
}

Bits encode(std::span<const std::uint8_t> bits, CodeRate rate) {
  const auto mask = keep_mask(rate);
  if (bits.size() > kMaxPayloadBits)
    throw Error(Errc::PayloadTooLong, std::to_string(bits.size()), "at most 4096 bits per codeword");

  const auto& t = trellis();
  Bits out;
  out.reserve(coded_length(bits.size(), rate));
  unsigned state = 0;
  std::size_t pos = 0;
  auto emit = [&](unsigned in) {
    const unsigned sym = t.out[state][in];
    if (mask[pos++ % mask.size()]) out.push_back(static_cast<std::uint8_t>(sym >> 1));
    if (mask[pos++ % mask.size()]) out.push_back(static_cast<std::uint8_t>(sym & 1U));
    state = t.next[state][in];
  };
  for (auto b : bits) emit(b & 1U);
  for (int i = 0; i < kTailBits; ++i) emit(0);
  return out;
}

Bits viterbi_decode(std::span<const float> llrs, CodeRate rate) {
  const auto mask = keep_mask(rate);

  // Recover the info length; coded_length is strictly increasing in n.
  std::size_t n_info = 0;
  {
    bool matched = false;
    for (std::size_t n = 0; n <= kMaxPayloadBits; ++n) {
      const std::size_t len = coded_length(n, rate);
      if (len == llrs.size()) {
        n_info = n;
        matched = true;
        break;
      }
      if (len > llrs.size()) break;
    }
    if (!matched) throw Error(Errc::LengthMismatch, std::to_string(llrs.size()), "not a whole codeword length");
  }
  const std::size_t steps = n_info + kTailBits;

  // Depuncture into (a, b) soft pairs; erased positions carry zero.
  std::vector<std::array<float, 2>> soft(steps, {0.0F, 0.0F});
  {
    std::size_t src = 0;
    for (std::size_t m = 0; m < 2 * steps; ++m)
      if (mask[m % mask.size()]) soft[m / 2][m % 2] = llrs[src++];
  }

  const auto& t = trellis();
  constexpr float kNeg = -std::numeric_limits<float>::infinity();
  std::array<float, kStates> metric;
  metric.fill(kNeg);
  metric[0] = 0.0F;
  std::array<float, kStates> next_metric{};
  // decisions[step] bit s set when state s was reached from the predecessor
  // whose oldest register bit was 1.
  std::vector<std::uint64_t> decisions(steps, 0);

  for (std::size_t k = 0; k < steps; ++k) {
    const float la = soft[k][0];
    const float lb = soft[k][1];
    // Correlation branch metric: +llr for an expected 0, -llr for a 1.
    const std::array<float, 4> bm{la + lb, la - lb, -la + lb, -la - lb};
    next_metric.fill(kNeg);
    std::uint64_t dec = 0;
    for (unsigned ns = 0; ns < kStates; ++ns) {
      // ns = (in << 5) | (s >> 1); the two predecessors differ in s's LSB.
      const unsigned in = ns >> 5;
      const unsigned s0 = (ns << 1) & (kStates - 1);
      const unsigned s1 = s0 | 1U;
      const float m0 = metric[s0] + bm[t.out[s0][in]];
      const float m1 = metric[s1] + bm[t.out[s1][in]];
      if (m1 > m0) {
        next_metric[ns] = m1;
        dec |= (std::uint64_t{1} << ns);
      } else {
        next_metric[ns] = m0;
      }
    }
    metric = next_metric;
    decisions[k] = dec;
  }

  // Terminated trellis: trace back from the zero state.
  Bits decoded(steps);
  unsigned state = 0;
  for (std::size_t k = steps; k-- > 0;) {
    decoded[k] = static_cast<std::uint8_t>(state >> 5);
    const unsigned lsb = (decisions[k] >> state) & 1U;
    state = ((state << 1) & (kStates - 1)) | lsb;
  }
  decoded.resize(n_info);
  return decoded;
}

}  // namespace emulab::phy
