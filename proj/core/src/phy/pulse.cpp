#include "emulab/phy/pulse.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <Eigen/Dense>

#include "emulab/error.hpp"

namespace emulab::phy {

namespace {

void check(double sps, double rolloff) {
  if (!(sps >= 2.0) || !(rolloff > 0.0 && rolloff <= 1.0))
    throw Error(Errc::BadParams, "sps=" + std::to_string(sps) + " rolloff=" + std::to_string(rolloff));
}

// Continuous RRC impulse response at t (in symbol periods), unnormalized.
double rrc(double t, double beta) {
  constexpr double pi = std::numbers::pi;
  if (std::abs(t) < 1e-12) return 1.0 - beta + 4.0 * beta / pi;
  if (std::abs(std::abs(4.0 * beta * t) - 1.0) < 1e-9) {
    return beta / std::numbers::sqrt2 *
           ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * beta)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * beta)));
  }
  const double num = std::sin(pi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(pi * t * (1.0 + beta));
  const double den = pi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
  return num / den;
}

// Designed taps are reused across frames.
const std::vector<float>& cached_taps(int sps, double rolloff) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, std::vector<float>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find({sps, rolloff});
  if (it == cache.end()) it = cache.emplace(std::pair{sps, rolloff}, rrc_taps(sps, rolloff)).first;
  return it->second;
}

}  // namespace

std::vector<float> rrc_prototype(double sps, double rolloff, int span) {
  check(sps, rolloff);
  const int half = static_cast<int>(std::lround(span * sps / 2.0));
  std::vector<double> h(2 * half + 1);
  double energy = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double v = rrc(i / sps, rolloff);
    h[i + half] = v;
    energy += v * v;
  }
  const double norm = 1.0 / std::sqrt(energy);
  std::vector<float> taps(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) taps[i] = static_cast<float>(h[i] * norm);
  return taps;
}

std::vector<float> rrc_taps(int sps, double rolloff, int span) {
  const auto proto = rrc_prototype(sps, rolloff, span);
  const int n = static_cast<int>(proto.size());
  Eigen::VectorXd h0(n);
  for (int i = 0; i < n; ++i) h0(i) = proto[i];

  // Constraints c_k(h) = sum_i h_i h_{i + k sps} = delta_k, k = 0..span.
  // Minimise |h - h0|^2 by repeated linearisation (Gauss-Newton projection).
  const int k_max = (n - 1) / sps;
  Eigen::VectorXd target = Eigen::VectorXd::Zero(k_max + 1);
  target(0) = 1.0;
  Eigen::VectorXd h = h0;
  for (int it = 0; it < 30; ++it) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(k_max + 1, n);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(k_max + 1);
    for (int k = 0; k <= k_max; ++k) {
      for (int i = 0; i + k * sps < n; ++i) {
        c(k) += h(i) * h(i + k * sps);
        jac(k, i) += h(i + k * sps);
        jac(k, i + k * sps) += h(i);
      }
    }
    const Eigen::VectorXd toward = h0 - h;
    const Eigen::VectorXd lambda = (jac * jac.transpose()).ldlt().solve(jac * toward + c - target);
    const Eigen::VectorXd step = toward - jac.transpose() * lambda;
    h += step;
    if (step.norm() < 1e-13) break;
  }
  if (!h.allFinite() || (h - h0).norm() > 0.1) return proto;
  std::vector<float> taps(n);
  for (int i = 0; i < n; ++i) taps[i] = static_cast<float>(h(i));
  return taps;
}

std::vector<float> shaping_taps(const PulseParams& p) {
  auto taps = cached_taps(p.sps, p.rolloff);
  const float g = static_cast<float>(std::sqrt(static_cast<double>(p.sps)));
  for (auto& t : taps) t *= g;
  return taps;
}

IqBuffer pulse_shape(std::span<const cf32> symbols, const PulseParams& p, double symbol_rate_hz) {
  const auto taps = shaping_taps(p);
  IqBuffer out;
  out.sample_rate_hz = symbol_rate_hz * p.sps;
  if (symbols.empty()) return out;
  out.samples.assign(symbols.size() * p.sps + taps.size() - 1, cf32{});
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const cf32 s = symbols[k];
    cf32* dst = out.samples.data() + k * p.sps;
    for (std::size_t i = 0; i < taps.size(); ++i) dst[i] += s * taps[i];
  }
  return out;
}

std::vector<cf32> matched_filter(const IqBuffer& buffer, const PulseParams& p) {
  auto taps = cached_taps(p.sps, p.rolloff);
  const float g = static_cast<float>(1.0 / std::sqrt(static_cast<double>(p.sps)));
  for (auto& t : taps) t *= g;
  const std::size_t n_taps = taps.size();
  const auto& x = buffer.samples;
  std::vector<cf32> out;
  if (x.empty()) return out;
  const std::size_t sps = static_cast<std::size_t>(p.sps);
  const std::size_t count = (x.size() + sps - 1) / sps;
  out.reserve(count);
  // Output k is the full convolution evaluated at k*sps + n_taps - 1; the
  // filter is symmetric so the taps need no reversal.
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t centre = k * sps + n_taps - 1;
    cf32 acc{};
    const std::size_t lo = centre >= x.size() - 1 ? centre - (x.size() - 1) : 0;
    for (std::size_t i = lo; i < n_taps && i <= centre; ++i) acc += x[centre - i] * taps[i];
    out.push_back(acc);
  }
  return out;
}

std::vector<cf32> fir_filter(std::span<const cf32> input, std::span<const float> taps) {
  if (input.empty() || taps.empty()) return {};
  std::vector<cf32> out(input.size() + taps.size() - 1, cf32{});
  for (std::size_t k = 0; k < input.size(); ++k) {
    const cf32 s = input[k];
    for (std::size_t i = 0; i < taps.size(); ++i) out[k + i] += s * taps[i];
  }
  return out;
}

}  // namespace emulab::phy
