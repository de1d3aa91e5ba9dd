#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gacfas/datagen.hpp"
#include "gacfas/model.hpp"
#include "gacfas/optim.hpp"

namespace gacfas {

enum class ConfigErrorKind { missing_file, parse_error, unknown_key, invalid_value };

class ConfigError : public std::runtime_error {
 public:
  ConfigError(ConfigErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ConfigErrorKind kind() const { return kind_; }

 private:
  ConfigErrorKind kind_;
};

struct ExperimentConfig {
  MlpSpec model{{2, 16, 16, 2}, Activation::relu};
  std::vector<DomainSpec> domains;
  /// nullopt means "all": rotate the held-out domain through every index.
  std::optional<std::size_t> held_out;
  OptimizerConfig optimizer;
  std::size_t steps = 2000;
  std::size_t per_domain_batch = 32;
  std::size_t eval_every = 100;
  std::size_t eval_window = 10;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";
  /// Keep every n-th step's diagnostics (plus step 1); 1 keeps all.
  std::size_t diagnostics_every = 10;
  /// Steps per epoch for the step-decay schedule; 0 derives it as
  /// floor(smallest training domain / per_domain_batch).
  std::size_t steps_per_epoch = 0;

  std::size_t num_evaluations() const { return eval_every ? steps / eval_every : 0; }

  /// Throws ConfigError(invalid_value) naming the offending field.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Four domains rotated by 0, 20, 40 and 60 degrees, sigma 0.15, 2000
/// samples each, rotating leave-one-out.
ExperimentConfig default_config();

/// Canonical JSON text (sorted keys, 2-space indent). Parsing it gives back
/// an equal config.
std::string serialize_config(const ExperimentConfig& cfg);

/// Strict parse: unknown keys anywhere are rejected, missing keys default.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace gacfas
