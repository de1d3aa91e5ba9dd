#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gacfas/config.hpp"
#include "gacfas/model.hpp"
#include "gacfas/numerics.hpp"

namespace gacfas::testing {

/// n rows of N(0,1) inputs, random binary labels, domain ids cycling 0..k-1.
inline Batch random_batch(std::size_t n, std::size_t dim, std::size_t k, Prng& prng) {
  Batch b;
  b.inputs = Matrix(n, dim);
  for (auto& v : b.inputs.data) v = prng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    b.labels.push_back(static_cast<int>(prng.below(2)));
    b.domain_ids.push_back(static_cast<int>(i % k));
  }
  return b;
}

/// He init plus a small jitter so biases are nonzero.
inline Vec64 random_theta(const MlpSpec& spec, Prng& prng) {
  Vec64 theta = init_params(spec, prng).theta;
  for (auto& v : theta) v += 0.1 * prng.normal();
  return theta;
}

/// Small, fast experiment config for harness tests.
inline ExperimentConfig tiny_config() {
  ExperimentConfig cfg = default_config();
  cfg.model = MlpSpec{{2, 6, 2}, Activation::relu};
  for (auto& d : cfg.domains) d.n_samples = 120;
  cfg.steps = 40;
  cfg.per_domain_batch = 8;
  cfg.eval_every = 10;
  cfg.eval_window = 2;
  cfg.diagnostics_every = 5;
  return cfg;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gacfas_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gacfas::testing
