#include "gacfas/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gacfas {

namespace {

void require_same_length(ConstSpan a, ConstSpan b, const char* op) {
  if (a.size() != b.size()) {
    throw ContractError(std::string(op) + ": length mismatch (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace

double dot(ConstSpan a, ConstSpan b) {
  require_same_length(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(ConstSpan a) { return std::sqrt(dot(a, a)); }

Vec64 axpy(double alpha, ConstSpan x, ConstSpan y) {
  require_same_length(x, y, "axpy");
  Vec64 out(y.begin(), y.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * x[i] + y[i];
  return out;
}

Vec64 scaled(double alpha, ConstSpan x) {
  Vec64 out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i];
  return out;
}

Vec64 running_mean(std::span<const Vec64> xs) {
  if (xs.empty()) throw ContractError("running_mean: no inputs");
  Vec64 mean = xs.front();
  for (std::size_t j = 1; j < xs.size(); ++j) {
    require_same_length(mean, xs[j], "running_mean");
    const double inv = 1.0 / static_cast<double>(j + 1);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (xs[j][i] - mean[i]) * inv;
  }
  return mean;
}

double cosine(ConstSpan a, ConstSpan b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

bool all_finite(ConstSpan a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Prng::Prng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Prng Prng::split(std::uint64_t seed, std::uint64_t stream_id) {
  return Prng(splitmix64(seed) ^ splitmix64(stream_id ^ 0xD1B54A32D192ED03ULL));
}

double Prng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Prng::below(std::uint64_t n) {
  if (n == 0) throw ContractError("Prng::below: n must be positive");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % n;
}

double Prng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

Vec64 gaussian(Prng& prng, std::size_t n) {
  Vec64 out(n);
  for (auto& v : out) v = prng.normal();
  return out;
}

}  // namespace gacfas
