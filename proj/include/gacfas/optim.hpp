#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gacfas/model.hpp"
#include "gacfas/numerics.hpp"

namespace gacfas {

enum class OptimizerMode { erm, sam_whole, sam_domain, gac_fas, reg_domain_perturb };

std::string to_string(OptimizerMode mode);
/// Throws ContractError for unknown names.
OptimizerMode parse_optimizer_mode(const std::string& name);

enum class ScheduleKind { constant, step, theorem1 };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

struct Schedule {
  ScheduleKind kind = ScheduleKind::step;
  /// Step decay period in epochs; the harness fills steps_per_epoch.
  std::size_t period_epochs = 40;
  double factor = 0.1;
  std::size_t steps_per_epoch = 1;

  std::size_t period_steps() const { return period_epochs * steps_per_epoch; }
  bool operator==(const Schedule&) const = default;
};

/// Learning rate, radius and alignment weight all follow this schedule.
///   constant: base
///   step:     base * factor^floor((t - 1) / period_steps)
///   theorem1: base / sqrt(t)
/// Throws ContractError for t < 1.
double schedule_value(const Schedule& schedule, double base, std::size_t t);

struct OptimizerConfig {
  OptimizerMode mode = OptimizerMode::gac_fas;
  double eta0 = 0.005;
  double rho = 0.1;
  double gamma = 0.0002;
  double weight_decay = 1e-4;
  Schedule schedule;
  double zero_grad_eps = 1e-12;
  /// ERM is the only mode where the surrogate gap needs extra loss evaluations.
  bool compute_surrogate_gap = true;

  /// Throws ContractError if any hyperparameter is out of range.
  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

struct AscendingVector {
  Vec64 eps;
  std::size_t domain = 0;
  double rho_used = 0.0;
};

/// rho * grad / ||grad||, or zero when ||grad|| <= zero_grad_eps.
AscendingVector ascending_vector(ConstSpan grad, double rho, double zero_grad_eps = 1e-12,
                                 std::size_t domain = 0);

/// Weight-decay gradient lambda * theta.
Vec64 regularizer_grad(ConstSpan theta, double weight_decay);

struct StepDiagnostics {
  std::size_t t = 0;
  /// L(theta; B), the sum of per-domain mean losses.
  double loss_erm = 0.0;
  Vec64 per_domain_loss;
  /// ||grad of domain i's own loss at domain i's perturbed point||.
  Vec64 per_domain_perturbed_grad_norm;
  /// cos(g^p_i, g) with g the summed minibatch gradient.
  Vec64 alignment_cos;
  double surrogate_gap = 0.0;
  /// ||g||.
  double grad_norm = 0.0;
  /// ||g^p_i||, the gradient the mode descends along for domain i.
  Vec64 adv_grad_norms;

  double adv_grad_sq_mean() const;
};

/// A loss split into k source domains. The whole-batch loss is the sum of
/// the domain losses, so its gradient is the sum of the domain gradients.
class DomainObjective {
 public:
  virtual ~DomainObjective() = default;
  virtual std::size_t num_domains() const = 0;
  virtual std::size_t dim() const = 0;
  virtual LossGrad domain_loss_grad(ConstSpan theta, std::size_t domain) const = 0;
  virtual double domain_loss(ConstSpan theta, std::size_t domain) const = 0;
};

/// Mean cross-entropy of an MLP on each domain's rows of a minibatch.
class MlpObjective final : public DomainObjective {
 public:
  /// Splits the batch by domain id. With num_domains == 0 the count is
  /// max id + 1. Throws ContractError if any domain in [0, k) has no rows.
  MlpObjective(MlpSpec spec, const Batch& batch, std::size_t num_domains = 0);

  std::size_t num_domains() const override { return parts_.size(); }
  std::size_t dim() const override { return spec_.param_count(); }
  LossGrad domain_loss_grad(ConstSpan theta, std::size_t domain) const override;
  double domain_loss(ConstSpan theta, std::size_t domain) const override;

  const Batch& domain_batch(std::size_t domain) const { return parts_.at(domain); }

 private:
  MlpSpec spec_;
  std::vector<Batch> parts_;
};

struct StepResult {
  Vec64 theta;
  StepDiagnostics diag;
};

/// theta - eta_t (g + lambda theta).
StepResult erm_step(const DomainObjective& obj, ConstSpan theta, const OptimizerConfig& cfg,
                    std::size_t t);

/// SAM on the whole batch: eps from g, descend along grad L(theta + eps; B).
StepResult sam_whole_step(const DomainObjective& obj, ConstSpan theta,
                          const OptimizerConfig& cfg, std::size_t t);

/// SAM per domain: eps_i from g_i, each domain's perturbed gradient is taken
/// on its own rows only, and the k results are averaged.
StepResult sam_domain_step(const DomainObjective& obj, ConstSpan theta,
                           const OptimizerConfig& cfg, std::size_t t);

/// One GAC-FAS iteration:
///   g_i  = grad L(theta; B_i),  g = sum_i g_i,  r = lambda theta
///   eps_i = rho_t g_i / ||g_i||
///   g^p_i = grad L(theta + eps_i - gamma_t g; B)       (whole batch)
///   theta' = theta - eta_t (g + mean_i g^p_i + r)
/// The mean over i is a running mean in ascending domain order, so k
/// identical g^p_i average to exactly that vector.
StepResult gac_fas_step(const DomainObjective& obj, ConstSpan theta, const OptimizerConfig& cfg,
                        std::size_t t);

/// gac_fas_step with g^p_i = k * grad L(theta + eps_i - gamma_t g; B_i). The
/// factor k puts the domain-scoped loss on the same scale as the summed
/// whole-batch loss, so identical domains reproduce gac_fas_step.
StepResult reg_domain_perturb_step(const DomainObjective& obj, ConstSpan theta,
                                   const OptimizerConfig& cfg, std::size_t t);

/// Dispatches on cfg.mode.
StepResult optimizer_step(const DomainObjective& obj, ConstSpan theta, const OptimizerConfig& cfg,
                          std::size_t t);

}  // namespace gacfas
