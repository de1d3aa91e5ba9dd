#include "gacfas/harness.hpp"

#include <algorithm>
#include <cmath>

#include "gacfas/evalmetrics.hpp"
#include "gacfas/io.hpp"
#include "json.hpp"

namespace gacfas {

std::vector<std::size_t> held_out_indices(const ExperimentConfig& cfg) {
  if (cfg.held_out) return {*cfg.held_out};
  std::vector<std::size_t> all(cfg.domains.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

std::size_t resolve_steps_per_epoch(const ExperimentConfig& cfg, const SourceSet& train) {
  if (cfg.steps_per_epoch > 0) return cfg.steps_per_epoch;
  return std::max<std::size_t>(1, train.smallest_domain() / cfg.per_domain_batch);
}

std::string run_dir_name(std::size_t held, std::uint64_t seed) {
  return "held" + std::to_string(held) + "_seed" + std::to_string(seed);
}

namespace {

EvalReport evaluate(const MlpSpec& spec, ConstSpan theta, const SourceSet& train,
                    const Batch& pooled_train, const Batch& test, double rho, std::size_t step) {
  EvalReport r;
  r.step = step;
  const ScoredSet scored{positive_scores(spec, theta, test.inputs), test.labels};
  r.hter = hter_at_eer(scored).hter;
  r.auc = roc_auc(scored);
  r.tpr95 = tpr_at_fpr(scored, 0.05);
  for (const auto& d : train.domains) r.train_loss += loss(spec, theta, d.data);
  r.surrogate_gap = surrogate_gap(spec, theta, pooled_train, rho);
  return r;
}

}  // namespace

RunRecord run_training(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t held) {
  cfg.validate();
  const LeaveOneOut split = leave_one_out(cfg.domains, held);
  const SourceSet& train = split.train;
  const Batch pooled_train = train.merged();

  OptimizerConfig opt = cfg.optimizer;
  opt.schedule.steps_per_epoch = resolve_steps_per_epoch(cfg, train);

  RunRecord rec;
  rec.model = cfg.model;
  rec.num_train_domains = train.k();
  rec.manifest.config_json = serialize_config(cfg);
  rec.manifest.config_digest = fnv1a64_hex(rec.manifest.config_json);
  rec.manifest.seed = seed;
  rec.manifest.held_out = held;
  rec.manifest.end_step = cfg.steps;
  rec.manifest.steps_per_epoch = opt.schedule.steps_per_epoch;

  Prng init_stream = Prng::split(seed, 1);
  Prng sampler = Prng::split(seed, 2);
  Vec64 theta = init_params(cfg.model, init_stream).theta;

  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    try {
      const Batch batch = sample_minibatch(train, cfg.per_domain_batch, sampler);
      const MlpObjective obj(cfg.model, batch, train.k());
      StepResult res = optimizer_step(obj, theta, opt, t);
      if (!all_finite(res.theta)) throw RunError("parameters became non-finite");
      theta = std::move(res.theta);
      if (t == 1 || t % cfg.diagnostics_every == 0) rec.diagnostics.push_back(std::move(res.diag));
      if (t % cfg.eval_every == 0) {
        rec.evals.push_back(
            evaluate(cfg.model, theta, train, pooled_train, split.test, cfg.optimizer.rho, t));
      }
    } catch (const std::exception& e) {
      throw RunError("step " + std::to_string(t) + " (held " + std::to_string(held) + ", seed " +
                     std::to_string(seed) + "): " + e.what());
    }
  }
  rec.final_params = std::move(theta);
  return rec;
}

RunRecord run_training(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.domains.size() < 2) throw ConfigError(ConfigErrorKind::invalid_value,
                                                "training needs at least two domains");
  return run_training(cfg, seed, cfg.held_out.value_or(cfg.domains.size() - 1));
}

EvalReport window_mean(const std::vector<EvalReport>& evals, std::size_t window) {
  if (window < 1 || window > evals.size()) {
    throw ContractError("window_mean: window " + std::to_string(window) + " with " +
                        std::to_string(evals.size()) + " evaluations");
  }
  EvalReport m;
  const std::size_t start = evals.size() - window;
  for (std::size_t j = start; j < evals.size(); ++j) {
    m.hter += evals[j].hter;
    m.auc += evals[j].auc;
    m.tpr95 += evals[j].tpr95;
    m.train_loss += evals[j].train_loss;
    m.surrogate_gap += evals[j].surrogate_gap;
  }
  const auto n = static_cast<double>(window);
  m.step = evals.back().step;
  m.hter /= n;
  m.auc /= n;
  m.tpr95 /= n;
  m.train_loss /= n;
  m.surrogate_gap /= n;
  return m;
}

MetricStats stats_of(const std::vector<double>& values) {
  MetricStats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

ProtocolRow aggregate(const std::vector<const RunSummary*>& runs, std::size_t held) {
  std::vector<double> h, a, p;
  for (const auto* r : runs) {
    h.push_back(r->window.hter);
    a.push_back(r->window.auc);
    p.push_back(r->window.tpr95);
  }
  return {held, runs.size(), stats_of(h), stats_of(a), stats_of(p)};
}

}  // namespace

ProtocolSummary run_protocol(const ExperimentConfig& cfg, const std::vector<std::size_t>& helds,
                             const std::filesystem::path& out_dir) {
  cfg.validate();
  ProtocolSummary summary;
  for (std::size_t held : helds) {
    for (std::uint64_t seed : cfg.seeds) {
      const RunRecord rec = run_training(cfg, seed, held);
      if (!out_dir.empty()) write_outputs(rec, out_dir / run_dir_name(held, seed));
      summary.runs.push_back({held, seed, window_mean(rec.evals, cfg.eval_window)});
    }
  }
  std::vector<const RunSummary*> all;
  for (const auto& r : summary.runs) all.push_back(&r);
  for (std::size_t held : helds) {
    std::vector<const RunSummary*> mine;
    for (const auto& r : summary.runs) {
      if (r.held == held) mine.push_back(&r);
    }
    summary.rows.push_back(aggregate(mine, held));
  }
  summary.overall = aggregate(all, 0);
  return summary;
}

ProtocolSummary run_leave_one_out(const ExperimentConfig& cfg,
                                  const std::filesystem::path& out_dir) {
  if (cfg.domains.size() < 2) {
    throw ConfigError(ConfigErrorKind::invalid_value, "leave-one-out needs at least two domains");
  }
  ExperimentConfig all = cfg;
  all.held_out.reset();
  return run_protocol(all, held_out_indices(all), out_dir);
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg, const std::vector<double>& gammas,
                                 const std::vector<double>& rhos) {
  if (gammas.empty() || rhos.empty()) throw ContractError("run_sweep: empty grid");
  std::vector<SweepCell> cells;
  for (double g : gammas) {
    for (double r : rhos) {
      ExperimentConfig c = cfg;
      c.optimizer.gamma = g;
      c.optimizer.rho = r;
      cells.push_back({g, r, run_protocol(c, held_out_indices(c))});
    }
  }
  return cells;
}

std::string metrics_csv(const std::vector<EvalReport>& evals) {
  std::string out = "step,hter,auc,tpr95,train_loss,surrogate_gap\n";
  for (const auto& e : evals) {
    out += std::to_string(e.step) + "," + format_double(e.hter) + "," + format_double(e.auc) + "," +
           format_double(e.tpr95) + "," + format_double(e.train_loss) + "," +
           format_double(e.surrogate_gap) + "\n";
  }
  return out;
}

std::string diagnostics_csv(const std::vector<StepDiagnostics>& diags, std::size_t k) {
  std::string out = "t,loss_erm,grad_norm,surrogate_gap";
  for (std::size_t i = 0; i < k; ++i) out += ",align_cos_" + std::to_string(i);
  out += ",adv_grad_sq_mean\n";
  for (const auto& d : diags) {
    out += std::to_string(d.t) + "," + format_double(d.loss_erm) + "," +
           format_double(d.grad_norm) + "," + format_double(d.surrogate_gap);
    for (std::size_t i = 0; i < k; ++i) {
      out += "," + format_double(i < d.alignment_cos.size() ? d.alignment_cos[i] : 0.0);
    }
    out += "," + format_double(d.adv_grad_sq_mean()) + "\n";
  }
  return out;
}

std::string manifest_json(const RunRecord& record) {
  using nlohmann::json;
  const auto& m = record.manifest;
  json layout = json::array();
  for (const auto& b : param_layout(record.model)) {
    layout.push_back({{"weight_offset", b.weight_offset},
                      {"bias_offset", b.bias_offset},
                      {"fan_in", b.fan_in},
                      {"fan_out", b.fan_out}});
  }
  json j;
  j["config"] = json::parse(m.config_json);
  j["config_digest"] = m.config_digest;
  j["config_digest_algorithm"] = "fnv1a64 over the canonical config text";
  j["seed"] = m.seed;
  j["held_out"] = m.held_out;
  j["start_step"] = m.start_step;
  j["end_step"] = m.end_step;
  j["steps_per_epoch"] = m.steps_per_epoch;
  j["num_train_domains"] = record.num_train_domains;
  j["params"] = {{"file", "params.bin"},
                 {"encoding", "uint64 count then count float64 values, little-endian"},
                 {"count", record.final_params.size()},
                 {"layout", layout},
                 {"block_order", "per layer: fan_out x fan_in row-major weights, then fan_out biases"}};
  return j.dump(2) + "\n";
}

void write_outputs(const RunRecord& record, const std::filesystem::path& dir) {
  write_file_atomic(dir / "manifest.json", manifest_json(record));
  write_file_atomic(dir / "metrics.csv", metrics_csv(record.evals));
  write_file_atomic(dir / "diagnostics.csv",
                    diagnostics_csv(record.diagnostics, record.num_train_domains));
  write_params_bin(dir / "params.bin", record.final_params);
}

namespace {

std::string stats_cols(const ProtocolRow& r) {
  return format_double(r.hter.mean) + "," + format_double(r.hter.std) + "," +
         format_double(r.auc.mean) + "," + format_double(r.auc.std) + "," +
         format_double(r.tpr95.mean) + "," + format_double(r.tpr95.std);
}

const char* kStatsHeader = "hter_mean,hter_std,auc_mean,auc_std,tpr95_mean,tpr95_std";

}  // namespace

void write_outputs(const ProtocolSummary& summary, const std::filesystem::path& dir) {
  std::string rows = std::string("held,runs,") + kStatsHeader + "\n";
  for (const auto& r : summary.rows) {
    rows += std::to_string(r.held) + "," + std::to_string(r.runs) + "," + stats_cols(r) + "\n";
  }
  std::string runs = "held,seed,hter,auc,tpr95\n";
  for (const auto& r : summary.runs) {
    runs += std::to_string(r.held) + "," + std::to_string(r.seed) + "," +
            format_double(r.window.hter) + "," + format_double(r.window.auc) + "," +
            format_double(r.window.tpr95) + "\n";
  }
  write_file_atomic(dir / "summary.csv", rows);
  write_file_atomic(dir / "runs.csv", runs);
}

void write_sweep(const std::vector<SweepCell>& cells, const std::filesystem::path& dir) {
  std::string text = std::string("gamma,rho,runs,") + kStatsHeader + "\n";
  for (const auto& c : cells) {
    text += format_double(c.gamma) + "," + format_double(c.rho) + "," +
            std::to_string(c.summary.overall.runs) + "," + stats_cols(c.summary.overall) + "\n";
  }
  write_file_atomic(dir / "sweep.csv", text);
}

}  // namespace gacfas
