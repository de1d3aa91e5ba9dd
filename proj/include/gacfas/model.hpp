#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gacfas/numerics.hpp"

namespace gacfas {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec64 data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

enum class Activation { relu, tanh };

/// Feed-forward classifier shape: input dim, hidden widths, number of classes.
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::relu;

  /// Throws ContractError unless there are >= 2 layers, all positive, and
  /// the output has >= 2 classes.
  void validate() const;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t param_count() const;

  bool operator==(const MlpSpec&) const = default;
};

/// Location of one dense layer inside the flat parameter vector. The weight
/// block is fan_out x fan_in row-major, followed by fan_out biases.
struct LayerBlock {
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;

  std::size_t weight_size() const { return fan_in * fan_out; }
  bool operator==(const LayerBlock&) const = default;
};

std::vector<LayerBlock> param_layout(const MlpSpec& spec);

struct ParamVector {
  Vec64 theta;
  std::vector<LayerBlock> layout;

  /// Wraps theta, checking its length against the spec.
  static ParamVector from_theta(const MlpSpec& spec, Vec64 theta);
};

/// Labeled samples; every row carries a class label and a source-domain id.
struct Batch {
  Matrix inputs;
  std::vector<int> labels;
  std::vector<int> domain_ids;

  std::size_t size() const { return labels.size(); }

  /// Throws ContractError on length mismatch, empty batch, or out-of-range
  /// labels/domain ids. num_domains == 0 skips the domain-id range check.
  void validate(std::size_t input_dim, std::size_t num_classes,
                std::size_t num_domains = 0) const;

  /// Rows whose domain id equals `domain`, in their original order.
  Batch select_domain(int domain) const;

  /// Rows at the given indices, in the given order.
  Batch select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const Batch&) const = default;
};

/// Row-wise concatenation.
Batch concat(std::span<const Batch> parts);

/// He-style init: weights ~ N(0, 2 / fan_in), biases 0.
ParamVector init_params(const MlpSpec& spec, Prng& prng);

Matrix forward(const MlpSpec& spec, ConstSpan theta, const Matrix& inputs);

struct LossGrad {
  double loss = 0.0;
  Vec64 grad;
};

/// Mean softmax cross-entropy over the batch.
///
/// Per-sample losses are summed in ascending order of value, so the loss is
/// exactly invariant to row permutations. The gradient is accumulated in row
/// order.
double loss(const MlpSpec& spec, ConstSpan theta, const Batch& batch);

/// Mean cross-entropy and its exact gradient by reverse accumulation.
LossGrad loss_and_grad(const MlpSpec& spec, ConstSpan theta, const Batch& batch);

/// Central differences (L(theta + h e_j) - L(theta - h e_j)) / 2h.
Vec64 finite_diff_grad(const MlpSpec& spec, ConstSpan theta, const Batch& batch, double h);

/// Smallest |pre-activation| over all hidden units and samples. Used to keep
/// relu gradient checks away from kinks.
double min_abs_preactivation(const MlpSpec& spec, ConstSpan theta, const Matrix& inputs);

/// Logit margin z_1 - z_0 per row, the "live" score for binary tasks. Monotone
/// in the class-1 softmax probability but does not saturate to ties.
Vec64 positive_scores(const MlpSpec& spec, ConstSpan theta, const Matrix& inputs);

struct GradCheckResult {
  std::size_t instances = 0;
  /// max over instances and coordinates of |g - g_fd| / (1 + |g_fd|)
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Analytic vs central-difference gradients on random MLPs of the given
/// shape with random 2-class batches. For relu, instances whose smallest
/// |pre-activation| is below 1e-3 are redrawn.
GradCheckResult gradient_check_suite(const MlpSpec& spec, std::size_t instances,
                                     std::size_t batch_size, double h, double tolerance,
                                     std::uint64_t seed);

}  // namespace gacfas
