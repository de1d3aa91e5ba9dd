#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gacfas/config.hpp"
#include "gacfas/datagen.hpp"
#include "gacfas/diagnostics.hpp"
#include "gacfas/optim.hpp"

namespace gacfas {

/// A failure during a run, tagged with the step where it happened.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalReport {
  std::size_t step = 0;
  double hter = 0.0;
  double auc = 0.0;
  double tpr95 = 0.0;
  /// Sum over training domains of the full-domain mean cross-entropy.
  double train_loss = 0.0;
  /// h(theta) at the configured base rho on all training rows pooled.
  double surrogate_gap = 0.0;
};

struct Manifest {
  std::string config_json;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::size_t held_out = 0;
  std::size_t start_step = 1;
  std::size_t end_step = 0;
  std::size_t steps_per_epoch = 1;
};

struct RunRecord {
  Manifest manifest;
  MlpSpec model;
  std::size_t num_train_domains = 0;
  std::vector<EvalReport> evals;
  std::vector<StepDiagnostics> diagnostics;
  Vec64 final_params;
};

/// Held-out indices a config asks for: the configured one, or all of them.
std::vector<std::size_t> held_out_indices(const ExperimentConfig& cfg);

/// Steps per epoch used to convert the step-decay period.
std::size_t resolve_steps_per_epoch(const ExperimentConfig& cfg, const SourceSet& train);

/// Trains on every domain except `held` and evaluates on it every
/// eval_every steps. Seed streams: split(seed, 1) initializes the MLP,
/// split(seed, 2) drives the minibatch sampler.
RunRecord run_training(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t held);
/// Uses cfg.held_out, or the last domain when the config says "all".
RunRecord run_training(const ExperimentConfig& cfg, std::uint64_t seed);

/// Means of the last `window` evaluation reports.
EvalReport window_mean(const std::vector<EvalReport>& evals, std::size_t window);

struct RunSummary {
  std::size_t held = 0;
  std::uint64_t seed = 0;
  EvalReport window;  // last-window means
};

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single run
};

MetricStats stats_of(const std::vector<double>& values);

struct ProtocolRow {
  std::size_t held = 0;
  std::size_t runs = 0;
  MetricStats hter;
  MetricStats auc;
  MetricStats tpr95;
};

struct ProtocolSummary {
  std::vector<RunSummary> runs;
  std::vector<ProtocolRow> rows;  // one per held-out domain
  ProtocolRow overall;            // over every run; held is unused
};

/// Runs every (held, seed) pair and aggregates last-window metrics.
/// When out_dir is non-empty each run's files go to out_dir/held<h>_seed<s>.
ProtocolSummary run_protocol(const ExperimentConfig& cfg, const std::vector<std::size_t>& helds,
                             const std::filesystem::path& out_dir = {});

/// Full rotation: every domain is held out once, for every seed.
ProtocolSummary run_leave_one_out(const ExperimentConfig& cfg,
                                  const std::filesystem::path& out_dir = {});

struct SweepCell {
  double gamma = 0.0;
  double rho = 0.0;
  ProtocolSummary summary;
};

/// gamma-major grid; every cell reruns the config's protocol with the
/// cell's gamma and rho.
std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg, const std::vector<double>& gammas,
                                 const std::vector<double>& rhos);

/// manifest.json, metrics.csv, diagnostics.csv and params.bin in dir.
void write_outputs(const RunRecord& record, const std::filesystem::path& dir);
/// summary.csv (per held-out domain) and runs.csv (per run).
void write_outputs(const ProtocolSummary& summary, const std::filesystem::path& dir);
void write_sweep(const std::vector<SweepCell>& cells, const std::filesystem::path& dir);

std::string metrics_csv(const std::vector<EvalReport>& evals);
std::string diagnostics_csv(const std::vector<StepDiagnostics>& diags, std::size_t k);
std::string manifest_json(const RunRecord& record);

std::string run_dir_name(std::size_t held, std::uint64_t seed);

}  // namespace gacfas
