#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gacfas/model.hpp"
#include "gacfas/numerics.hpp"

namespace gacfas {

/// One synthetic source domain: a two-moons draw, rotated about the origin
/// and translated.
struct DomainSpec {
  double rotation = 0.0;  // radians
  std::array<double, 2> translation{0.0, 0.0};
  double noise_sigma = 0.15;
  std::size_t n_samples = 2000;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const DomainSpec&) const = default;
};

struct Domain {
  DomainSpec spec;
  Batch data;
  /// Position of this domain in the spec list it was built from.
  std::size_t source_index = 0;
};

/// k labeled domains. Domain i's batch carries domain id i.
struct SourceSet {
  std::vector<Domain> domains;

  std::size_t k() const { return domains.size(); }
  std::size_t smallest_domain() const;
  /// All domains concatenated in index order.
  Batch merged() const;
};

/// Added to a held-out domain's seed when realizing it as a test set.
inline constexpr std::uint64_t kTestSeedOffset = 1'000'000'007ULL;

/// ceil(n/2) class-0 points on (cos t, sin t), floor(n/2) class-1 points on
/// (1 - cos t, 0.5 - sin t), t ~ U[0, pi], plus N(0, sigma^2 I) noise.
/// Class-0 rows come first. Domain ids are 0.
Batch gen_two_moons(std::size_t n, double sigma, Prng& prng);

/// Rotate every input by spec.rotation about the origin, translate, and set
/// all domain ids to domain_index. Labels are untouched.
Batch shift_domain(const Batch& batch, const DomainSpec& spec, int domain_index);

/// Realizes each spec with Prng(spec.seed).
SourceSet build_source_set(const std::vector<DomainSpec>& specs);

struct LeaveOneOut {
  SourceSet train;
  Batch test;
  /// Domain id stamped on the test rows; equals train.k(), so it never
  /// collides with a training id.
  int test_domain_id = 0;
  std::size_t held = 0;
};

/// Train on every spec except `held`; the held spec is realized with seed
/// spec.seed + kTestSeedOffset.
LeaveOneOut leave_one_out(const std::vector<DomainSpec>& specs, std::size_t held);

/// per_domain rows from each domain without replacement, concatenated in
/// domain order. When per_domain equals a domain's size that domain is
/// returned whole, in stored order, without touching the generator.
Batch sample_minibatch(const SourceSet& source, std::size_t per_domain, Prng& prng);

/// CSV with header `x0,x1,label,domain_id`; floats printed with 17
/// significant digits so load(save(b)) == b.
void save_batch_csv(const Batch& batch, const std::filesystem::path& path);
Batch load_batch_csv(const std::filesystem::path& path);

}  // namespace gacfas
