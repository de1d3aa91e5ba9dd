#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "gacfas/datagen.hpp"
#include "gacfas/model.hpp"
#include "gacfas/optim.hpp"

namespace gacfas {

/// L(theta + eps) with eps the whole-objective ascending vector of radius rho.
double perturbed_loss(const DomainObjective& obj, ConstSpan theta, double rho);
/// Same on an MLP, treating the batch as one domain (mean cross-entropy).
double perturbed_loss(const MlpSpec& spec, ConstSpan theta, const Batch& batch, double rho);

/// h(theta) = L_p(theta) - L(theta).
double surrogate_gap(const DomainObjective& obj, ConstSpan theta, double rho);
double surrogate_gap(const MlpSpec& spec, ConstSpan theta, const Batch& batch, double rho);

/// M[m][n] = < grad L_m(theta + eps_i - gamma g), grad L_n(theta) >, where
/// eps_i is domain i's ascending vector and g the summed gradient.
/// Summing every entry gives < grad L_p_i(theta; S), grad L(theta; S) >.
Matrix alignment_inner_products(const DomainObjective& obj, ConstSpan theta, std::size_t i,
                                double rho, double gamma, double zero_grad_eps = 1e-12);
/// Uses each domain's full realized batch.
Matrix alignment_inner_products(const MlpSpec& spec, ConstSpan theta, const SourceSet& source,
                                std::size_t i, double rho, double gamma);

/// |Phi(gamma) - (Phi(0) - gamma <grad L(theta + eps_i; B), g>)| with
/// Phi(gamma) = L(theta + eps_i - gamma g; B) and eps_i held fixed. Vanishes
/// to second order in gamma.
double taylor_alignment_residual(const DomainObjective& obj, ConstSpan theta, std::size_t i,
                                 double rho, double gamma);

/// A contiguous range of theta normalized as a unit (one weight matrix or
/// one bias vector).
struct ParamBlock {
  std::size_t offset = 0;
  std::size_t size = 0;
};

std::vector<ParamBlock> param_blocks(const MlpSpec& spec);

struct LandscapeGrid {
  std::size_t dims = 1;
  /// (s, u) per grid point; u is 0 for 1-D slices. 2-D grids are s-major.
  std::vector<std::array<double, 2>> offsets;
  Vec64 losses;
  std::vector<Vec64> directions;
  double center_loss = 0.0;
};

using LossFn = std::function<double(ConstSpan)>;

/// Gaussian direction with each block rescaled to the norm of the matching
/// block of theta; blocks where theta is zero get a zero direction.
Vec64 block_normalized_direction(ConstSpan theta, std::span<const ParamBlock> blocks, Prng& prng);

/// Loss on theta + s d1 (+ u d2) for s, u in `steps` evenly spaced values on
/// [-radius, radius]. steps must be odd and >= 3 so 0 is on the grid.
LandscapeGrid landscape_slice(const LossFn& loss_fn, ConstSpan theta,
                              std::span<const ParamBlock> blocks, std::size_t dims,
                              double radius, std::size_t steps, Prng& prng);
/// Negative log-likelihood of the MLP on the batch.
LandscapeGrid landscape_slice(const MlpSpec& spec, ConstSpan theta, const Batch& batch,
                              std::size_t dims, double radius, std::size_t steps, Prng& prng);

void write_landscape_csv(const LandscapeGrid& grid, const std::filesystem::path& path);

struct ConvergenceTrace {
  Vec64 t;            // window centers
  Vec64 grad_sq;      // windowed mean of ||grad l(theta_t)||^2
  Vec64 adv_grad_sq;  // windowed mean of ||grad l(theta_t^adv)||^2
  /// Constants of C log t / sqrt(t), fitted on the first quartile.
  double fitted_c_grad = 0.0;
  double fitted_c_adv = 0.0;
  /// Share of windows after the first quartile that sit above the bound.
  double exceed_fraction_grad = 0.0;
  double exceed_fraction_adv = 0.0;
  /// Per-step means over the first and last tenth of the steps.
  double first_decile_grad = 0.0;
  double last_decile_grad = 0.0;
  double first_decile_adv = 0.0;
  double last_decile_adv = 0.0;

  static double rate(double t);
  /// max(fitted_c_grad, fitted_c_adv) * rate(t)
  double envelope(double t) const;
};

/// Windows are consecutive runs of `window` stream entries (the last may be
/// shorter). Each series gets its own constant: mean of the series over the
/// first-quartile windows divided by the mean of log t / sqrt(t) over the
/// same window centers.
ConvergenceTrace convergence_trace(std::span<const StepDiagnostics> stream, std::size_t window);

/// Header `t,grad_sq_mean,adv_grad_sq_mean,bound`; bound is the envelope.
void write_convergence_csv(const ConvergenceTrace& trace, const std::filesystem::path& path);

}  // namespace gacfas
