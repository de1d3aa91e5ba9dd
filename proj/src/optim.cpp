#include "gacfas/optim.hpp"

#include <algorithm>
#include <cmath>

namespace gacfas {

std::string to_string(OptimizerMode mode) {
  switch (mode) {
    case OptimizerMode::erm: return "erm";
    case OptimizerMode::sam_whole: return "sam_whole";
    case OptimizerMode::sam_domain: return "sam_domain";
    case OptimizerMode::gac_fas: return "gac_fas";
    case OptimizerMode::reg_domain_perturb: return "reg_domain_perturb";
  }
  return "?";
}

OptimizerMode parse_optimizer_mode(const std::string& name) {
  for (auto m : {OptimizerMode::erm, OptimizerMode::sam_whole, OptimizerMode::sam_domain,
                 OptimizerMode::gac_fas, OptimizerMode::reg_domain_perturb}) {
    if (to_string(m) == name) return m;
  }
  throw ContractError("unknown optimizer mode '" + name + "'");
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::step: return "step";
    case ScheduleKind::theorem1: return "theorem1";
  }
  return "?";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  for (auto k : {ScheduleKind::constant, ScheduleKind::step, ScheduleKind::theorem1}) {
    if (to_string(k) == name) return k;
  }
  throw ContractError("unknown schedule kind '" + name + "'");
}

double schedule_value(const Schedule& schedule, double base, std::size_t t) {
  if (t < 1) throw ContractError("schedule_value: step index must be >= 1");
  switch (schedule.kind) {
    case ScheduleKind::constant:
      return base;
    case ScheduleKind::step: {
      const std::size_t period = std::max<std::size_t>(1, schedule.period_steps());
      const auto drops = static_cast<double>((t - 1) / period);
      return base * std::pow(schedule.factor, drops);
    }
    case ScheduleKind::theorem1:
      return base / std::sqrt(static_cast<double>(t));
  }
  return base;
}

void OptimizerConfig::validate() const {
  if (!(eta0 > 0.0)) throw ContractError("optimizer: eta0 must be > 0");
  if (!(rho >= 0.0)) throw ContractError("optimizer: rho must be >= 0");
  if (!(gamma >= 0.0)) throw ContractError("optimizer: gamma must be >= 0");
  if (!(weight_decay >= 0.0)) throw ContractError("optimizer: weight_decay must be >= 0");
  if (!(zero_grad_eps >= 0.0)) throw ContractError("optimizer: zero_grad_eps must be >= 0");
  if (schedule.kind == ScheduleKind::step) {
    if (schedule.period_epochs < 1) throw ContractError("optimizer: step period must be >= 1");
    if (!(schedule.factor > 0.0)) throw ContractError("optimizer: step factor must be > 0");
  }
}

AscendingVector ascending_vector(ConstSpan grad, double rho, double zero_grad_eps,
                                 std::size_t domain) {
  if (!(rho >= 0.0)) throw ContractError("ascending_vector: rho must be >= 0");
  AscendingVector out{Vec64(grad.size(), 0.0), domain, rho};
  const double norm = l2_norm(grad);
  if (norm > zero_grad_eps) {
    const double s = rho / norm;
    for (std::size_t i = 0; i < grad.size(); ++i) out.eps[i] = s * grad[i];
  }
  return out;
}

Vec64 regularizer_grad(ConstSpan theta, double weight_decay) {
  return scaled(weight_decay, theta);
}

double StepDiagnostics::adv_grad_sq_mean() const {
  if (adv_grad_norms.empty()) return 0.0;
  double acc = 0.0;
  for (double v : adv_grad_norms) acc += v * v;
  return acc / static_cast<double>(adv_grad_norms.size());
}

MlpObjective::MlpObjective(MlpSpec spec, const Batch& batch, std::size_t num_domains)
    : spec_(std::move(spec)) {
  spec_.validate();
  batch.validate(spec_.input_dim(), spec_.num_classes(), num_domains);
  std::size_t k = num_domains;
  if (k == 0) {
    for (int id : batch.domain_ids) k = std::max(k, static_cast<std::size_t>(id) + 1);
  }
  for (std::size_t i = 0; i < k; ++i) {
    parts_.push_back(batch.select_domain(static_cast<int>(i)));
    if (parts_.back().size() == 0) {
      throw ContractError("minibatch has no rows for domain " + std::to_string(i));
    }
  }
}

LossGrad MlpObjective::domain_loss_grad(ConstSpan theta, std::size_t domain) const {
  return loss_and_grad(spec_, theta, parts_.at(domain));
}

double MlpObjective::domain_loss(ConstSpan theta, std::size_t domain) const {
  return loss(spec_, theta, parts_.at(domain));
}

namespace {

struct Scheduled {
  double eta;
  double rho;
  double gamma;
};

Scheduled scheduled(const OptimizerConfig& cfg, std::size_t t) {
  return {schedule_value(cfg.schedule, cfg.eta0, t), schedule_value(cfg.schedule, cfg.rho, t),
          schedule_value(cfg.schedule, cfg.gamma, t)};
}

void check_inputs(const DomainObjective& obj, ConstSpan theta, const OptimizerConfig& cfg,
                  std::size_t t) {
  cfg.validate();
  if (t < 1) throw ContractError("step index must be >= 1");
  if (obj.num_domains() == 0) throw ContractError("objective has no domains");
  if (theta.size() != obj.dim()) throw ContractError("theta length does not match objective");
}

/// Sum in ascending index order, starting from a copy of the first vector.
Vec64 sum_ordered(const std::vector<Vec64>& xs) {
  Vec64 acc = xs.front();
  for (std::size_t j = 1; j < xs.size(); ++j) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += xs[j][i];
  }
  return acc;
}

double sum_ordered(ConstSpan xs) {
  double acc = 0.0;
  for (double v : xs) acc += v;
  return acc;
}

/// Per-domain losses and gradients at one point, plus their sums.
struct DomainEval {
  Vec64 losses;
  std::vector<Vec64> grads;
  double total_loss = 0.0;
  Vec64 total_grad;
};

DomainEval eval_domains(const DomainObjective& obj, ConstSpan theta) {
  DomainEval e;
  for (std::size_t i = 0; i < obj.num_domains(); ++i) {
    auto lg = obj.domain_loss_grad(theta, i);
    e.losses.push_back(lg.loss);
    e.grads.push_back(std::move(lg.grad));
  }
  e.total_loss = sum_ordered(e.losses);
  e.total_grad = sum_ordered(e.grads);
  return e;
}

double whole_loss(const DomainObjective& obj, ConstSpan theta) {
  Vec64 losses;
  for (std::size_t i = 0; i < obj.num_domains(); ++i) losses.push_back(obj.domain_loss(theta, i));
  return sum_ordered(losses);
}

Vec64 add(ConstSpan a, ConstSpan b) { return axpy(1.0, a, b); }

/// theta - eta * direction
Vec64 descend(ConstSpan theta, double eta, ConstSpan direction) {
  return axpy(-eta, direction, theta);
}

StepDiagnostics base_diag(const DomainEval& at_theta, std::size_t t) {
  StepDiagnostics d;
  d.t = t;
  d.loss_erm = at_theta.total_loss;
  d.per_domain_loss = at_theta.losses;
  d.grad_norm = l2_norm(at_theta.total_grad);
  return d;
}

enum class PerturbScope { whole_batch, own_domain_scaled };

StepResult aligned_step(const DomainObjective& obj, ConstSpan theta, const OptimizerConfig& cfg,
                        std::size_t t, PerturbScope scope) {
  check_inputs(obj, theta, cfg, t);
  const auto s = scheduled(cfg, t);
  const std::size_t k = obj.num_domains();

  const DomainEval here = eval_domains(obj, theta);
  const Vec64& g = here.total_grad;
  const Vec64 r = regularizer_grad(theta, cfg.weight_decay);

  StepDiagnostics diag = base_diag(here, t);
  std::vector<Vec64> perturbed;
  Vec64 adv_losses;
  for (std::size_t i = 0; i < k; ++i) {
    const auto eps = ascending_vector(here.grads[i], s.rho, cfg.zero_grad_eps, i);
    const Vec64 adv = axpy(-s.gamma, g, add(theta, eps.eps));
    if (scope == PerturbScope::whole_batch) {
      DomainEval there = eval_domains(obj, adv);
      diag.per_domain_perturbed_grad_norm.push_back(l2_norm(there.grads[i]));
      adv_losses.push_back(there.total_loss);
      perturbed.push_back(std::move(there.total_grad));
    } else {
      const auto kd = static_cast<double>(k);
      auto own = obj.domain_loss_grad(adv, i);
      diag.per_domain_perturbed_grad_norm.push_back(l2_norm(own.grad));
      adv_losses.push_back(kd * own.loss);
      perturbed.push_back(k == 1 ? std::move(own.grad) : scaled(kd, own.grad));
    }
  }

  const Vec64 mean_perturbed = running_mean(perturbed);
  const Vec64 direction = add(add(g, mean_perturbed), r);

  for (const auto& gp : perturbed) {
    diag.alignment_cos.push_back(cosine(gp, g));
    diag.adv_grad_norms.push_back(l2_norm(gp));
  }
  diag.surrogate_gap = sum_ordered(adv_losses) / static_cast<double>(k) - here.total_loss;
  return {descend(theta, s.eta, direction), std::move(diag)};
}

}  // namespace

StepResult erm_step(const DomainObjective& obj, ConstSpan theta, const OptimizerConfig& cfg,
                    std::size_t t) {
  check_inputs(obj, theta, cfg, t);
  const auto s = scheduled(cfg, t);
  const DomainEval here = eval_domains(obj, theta);
  const Vec64& g = here.total_grad;
  const Vec64 direction = add(g, regularizer_grad(theta, cfg.weight_decay));

  StepDiagnostics diag = base_diag(here, t);
  for (const auto& gi : here.grads) {
    diag.per_domain_perturbed_grad_norm.push_back(l2_norm(gi));
    diag.alignment_cos.push_back(cosine(gi, g));
    diag.adv_grad_norms.push_back(diag.grad_norm);
  }
  if (cfg.compute_surrogate_gap) {
    const auto eps = ascending_vector(g, s.rho, cfg.zero_grad_eps);
    diag.surrogate_gap = whole_loss(obj, add(theta, eps.eps)) - here.total_loss;
  }
  return {descend(theta, s.eta, direction), std::move(diag)};
}

StepResult sam_whole_step(const DomainObjective& obj, ConstSpan theta,
                          const OptimizerConfig& cfg, std::size_t t) {
  check_inputs(obj, theta, cfg, t);
  const auto s = scheduled(cfg, t);
  const DomainEval here = eval_domains(obj, theta);
  const Vec64& g = here.total_grad;
  const auto eps = ascending_vector(g, s.rho, cfg.zero_grad_eps);
  const DomainEval there = eval_domains(obj, add(theta, eps.eps));
  const Vec64& gp = there.total_grad;
  const Vec64 direction = add(gp, regularizer_grad(theta, cfg.weight_decay));

  StepDiagnostics diag = base_diag(here, t);
  const double gp_norm = l2_norm(gp);
  const double cos_gp = cosine(gp, g);
  for (const auto& gi : there.grads) {
    diag.per_domain_perturbed_grad_norm.push_back(l2_norm(gi));
    diag.alignment_cos.push_back(cos_gp);
    diag.adv_grad_norms.push_back(gp_norm);
  }
  diag.surrogate_gap = there.total_loss - here.total_loss;
  return {descend(theta, s.eta, direction), std::move(diag)};
}

StepResult sam_domain_step(const DomainObjective& obj, ConstSpan theta,
                           const OptimizerConfig& cfg, std::size_t t) {
  check_inputs(obj, theta, cfg, t);
  const auto s = scheduled(cfg, t);
  const std::size_t k = obj.num_domains();
  const DomainEval here = eval_domains(obj, theta);
  const Vec64& g = here.total_grad;

  StepDiagnostics diag = base_diag(here, t);
  std::vector<Vec64> perturbed;
  Vec64 adv_losses;
  for (std::size_t i = 0; i < k; ++i) {
    const auto eps = ascending_vector(here.grads[i], s.rho, cfg.zero_grad_eps, i);
    auto own = obj.domain_loss_grad(add(theta, eps.eps), i);
    adv_losses.push_back(own.loss);
    perturbed.push_back(std::move(own.grad));
  }
  const Vec64 direction =
      add(running_mean(perturbed), regularizer_grad(theta, cfg.weight_decay));

  for (const auto& gp : perturbed) {
    const double n = l2_norm(gp);
    diag.per_domain_perturbed_grad_norm.push_back(n);
    diag.alignment_cos.push_back(cosine(gp, g));
    diag.adv_grad_norms.push_back(n);
  }
  const auto kd = static_cast<double>(k);
  diag.surrogate_gap = sum_ordered(adv_losses) / kd - here.total_loss / kd;
  return {descend(theta, s.eta, direction), std::move(diag)};
}

StepResult gac_fas_step(const DomainObjective& obj, ConstSpan theta, const OptimizerConfig& cfg,
                        std::size_t t) {
  return aligned_step(obj, theta, cfg, t, PerturbScope::whole_batch);
}

StepResult reg_domain_perturb_step(const DomainObjective& obj, ConstSpan theta,
                                   const OptimizerConfig& cfg, std::size_t t) {
  return aligned_step(obj, theta, cfg, t, PerturbScope::own_domain_scaled);
}

StepResult optimizer_step(const DomainObjective& obj, ConstSpan theta, const OptimizerConfig& cfg,
                          std::size_t t) {
  switch (cfg.mode) {
    case OptimizerMode::erm: return erm_step(obj, theta, cfg, t);
    case OptimizerMode::sam_whole: return sam_whole_step(obj, theta, cfg, t);
    case OptimizerMode::sam_domain: return sam_domain_step(obj, theta, cfg, t);
    case OptimizerMode::gac_fas: return gac_fas_step(obj, theta, cfg, t);
    case OptimizerMode::reg_domain_perturb: return reg_domain_perturb_step(obj, theta, cfg, t);
  }
  throw ContractError("unknown optimizer mode");
}

}  // namespace gacfas
