#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gacfas {

/// Raised when a caller breaks an operation's precondition (length mismatch,
/// out-of-range index, malformed shape).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Vec64 = std::vector<double>;
using ConstSpan = std::span<const double>;

/// Sum of a[i] * b[i], accumulated left to right.
///
/// Each term is the IEEE product a[i] * b[i], which is commutative, and the
/// accumulation order only depends on the index. So dot(a, b) == dot(b, a)
/// bit-for-bit.
double dot(ConstSpan a, ConstSpan b);

double l2_norm(ConstSpan a);

/// alpha * x + y, elementwise.
Vec64 axpy(double alpha, ConstSpan x, ConstSpan y);

Vec64 scaled(double alpha, ConstSpan x);

/// Running mean m_j = m_{j-1} + (x_j - m_{j-1}) / j over the given vectors,
/// in the order given. Returns the first vector exactly when all inputs are
/// identical.
Vec64 running_mean(std::span<const Vec64> xs);

/// cos of the angle between a and b; 0 if either is the zero vector.
double cosine(ConstSpan a, ConstSpan b);

bool all_finite(ConstSpan a);

/// Seeded 64-bit generator.
///
/// Engine: std::mt19937_64 seeded with splitmix64(seed), so nearby seeds give
/// unrelated states. Streams derived with split() hash the (seed, stream id)
/// pair through splitmix64 before seeding.
class Prng {
 public:
  explicit Prng(std::uint64_t seed);

  /// Independent stream for (seed, stream_id).
  static Prng split(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). Uses rejection so the result is unbiased.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via the Box-Muller transform; draws are produced in
  /// pairs and the second value of each pair is cached.
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// n standard-normal draws.
Vec64 gaussian(Prng& prng, std::size_t n);

}  // namespace gacfas
