#include "gacfas/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gacfas {

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw ContractError("MlpSpec: need input and output layers");
  for (std::size_t n : layer_sizes) {
    if (n == 0) throw ContractError("MlpSpec: layer sizes must be positive");
  }
  if (layer_sizes.back() < 2) throw ContractError("MlpSpec: output dim must be >= 2");
}

std::size_t MlpSpec::param_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    total += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return total;
}

std::vector<LayerBlock> param_layout(const MlpSpec& spec) {
  spec.validate();
  std::vector<LayerBlock> layout;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    LayerBlock b;
    b.fan_in = spec.layer_sizes[l];
    b.fan_out = spec.layer_sizes[l + 1];
    b.weight_offset = offset;
    b.bias_offset = offset + b.weight_size();
    offset = b.bias_offset + b.fan_out;
    layout.push_back(b);
  }
  return layout;
}

ParamVector ParamVector::from_theta(const MlpSpec& spec, Vec64 theta) {
  if (theta.size() != spec.param_count()) {
    throw ContractError("ParamVector: theta has " + std::to_string(theta.size()) +
                        " entries, spec needs " + std::to_string(spec.param_count()));
  }
  return ParamVector{std::move(theta), param_layout(spec)};
}

void Batch::validate(std::size_t input_dim, std::size_t num_classes,
                     std::size_t num_domains) const {
  const std::size_t n = labels.size();
  if (n == 0) throw ContractError("Batch: empty batch");
  if (domain_ids.size() != n || inputs.rows != n) {
    throw ContractError("Batch: inputs, labels and domain ids differ in length");
  }
  if (inputs.cols != input_dim) {
    throw ContractError("Batch: input width " + std::to_string(inputs.cols) + ", expected " +
                        std::to_string(input_dim));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw ContractError("Batch: label out of range at row " + std::to_string(i));
    }
    if (domain_ids[i] < 0 ||
        (num_domains > 0 && static_cast<std::size_t>(domain_ids[i]) >= num_domains)) {
      throw ContractError("Batch: domain id out of range at row " + std::to_string(i));
    }
  }
}

Batch Batch::select_rows(std::span<const std::size_t> rows) const {
  Batch out;
  out.inputs = Matrix(rows.size(), inputs.cols);
  out.labels.reserve(rows.size());
  out.domain_ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = inputs.row(rows[r]);
    std::copy(src.begin(), src.end(), out.inputs.row(r).begin());
    out.labels.push_back(labels[rows[r]]);
    out.domain_ids.push_back(domain_ids[rows[r]]);
  }
  return out;
}

Batch Batch::select_domain(int domain) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < domain_ids.size(); ++i) {
    if (domain_ids[i] == domain) rows.push_back(i);
  }
  return select_rows(rows);
}

Batch concat(std::span<const Batch> parts) {
  Batch out;
  if (parts.empty()) return out;
  std::size_t n = 0;
  const std::size_t cols = parts.front().inputs.cols;
  for (const auto& p : parts) {
    if (p.inputs.cols != cols) throw ContractError("concat: input widths differ");
    n += p.size();
  }
  out.inputs = Matrix(n, cols);
  out.labels.reserve(n);
  out.domain_ids.reserve(n);
  std::size_t r = 0;
  for (const auto& p : parts) {
    std::copy(p.inputs.data.begin(), p.inputs.data.end(), out.inputs.data.begin() + r * cols);
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.domain_ids.insert(out.domain_ids.end(), p.domain_ids.begin(), p.domain_ids.end());
    r += p.size();
  }
  return out;
}

ParamVector init_params(const MlpSpec& spec, Prng& prng) {
  ParamVector p{Vec64(spec.param_count(), 0.0), param_layout(spec)};
  for (const auto& b : p.layout) {
    const double scale = std::sqrt(2.0 / static_cast<double>(b.fan_in));
    for (std::size_t j = 0; j < b.weight_size(); ++j) {
      p.theta[b.weight_offset + j] = scale * prng.normal();
    }
  }
  return p;
}

namespace {

/// Per-sample activations. pre[l] and post[l] belong to layer l's output;
/// post[L-1] holds the logits (no activation on the output layer).
struct Tape {
  std::vector<Vec64> pre;
  std::vector<Vec64> post;

  explicit Tape(const std::vector<LayerBlock>& layout) {
    for (const auto& b : layout) {
      pre.emplace_back(b.fan_out, 0.0);
      post.emplace_back(b.fan_out, 0.0);
    }
  }
};

double activate(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

/// Derivative of the activation, written in terms of pre (z) and post (a) values.
double activate_deriv(Activation a, double z, double post) {
  return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

void check_theta(const MlpSpec& spec, ConstSpan theta) {
  if (theta.size() != spec.param_count()) {
    throw ContractError("theta has " + std::to_string(theta.size()) + " entries, spec needs " +
                        std::to_string(spec.param_count()));
  }
}

void run_forward(const MlpSpec& spec, const std::vector<LayerBlock>& layout, ConstSpan theta,
                 ConstSpan x, Tape& tape) {
  const std::size_t last = layout.size() - 1;
  ConstSpan in = x;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const auto& b = layout[l];
    const double* w = theta.data() + b.weight_offset;
    const double* bias = theta.data() + b.bias_offset;
    auto& z = tape.pre[l];
    auto& a = tape.post[l];
    for (std::size_t o = 0; o < b.fan_out; ++o) {
      double acc = bias[o];
      const double* wrow = w + o * b.fan_in;
      for (std::size_t i = 0; i < b.fan_in; ++i) acc += wrow[i] * in[i];
      z[o] = acc;
      a[o] = (l == last) ? acc : activate(spec.activation, acc);
    }
    in = a;
  }
}

/// Cross-entropy of one row of logits; fills probs with the softmax.
double cross_entropy(ConstSpan logits, int label, Vec64& probs) {
  const auto top = static_cast<std::size_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
  const double m = logits[top];
  // rest = sum of exp(z_c - m) over c != top, so log-sum-exp = m + log1p(rest).
  double rest = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - m);
    if (c != top) rest += probs[c];
  }
  const double sum = 1.0 + rest;
  for (auto& p : probs) p /= sum;
  return (m - logits[static_cast<std::size_t>(label)]) + std::log1p(rest);
}

double sorted_sum(Vec64 values) {
  std::sort(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

void check_batch(const MlpSpec& spec, ConstSpan theta, const Batch& batch) {
  spec.validate();
  check_theta(spec, theta);
  batch.validate(spec.input_dim(), spec.num_classes());
}

}  // namespace

Matrix forward(const MlpSpec& spec, ConstSpan theta, const Matrix& inputs) {
  spec.validate();
  check_theta(spec, theta);
  if (inputs.cols != spec.input_dim()) {
    throw ContractError("forward: input width " + std::to_string(inputs.cols) + ", expected " +
                        std::to_string(spec.input_dim()));
  }
  const auto layout = param_layout(spec);
  Tape tape(layout);
  Matrix logits(inputs.rows, spec.num_classes());
  for (std::size_t r = 0; r < inputs.rows; ++r) {
    run_forward(spec, layout, theta, inputs.row(r), tape);
    std::copy(tape.post.back().begin(), tape.post.back().end(), logits.row(r).begin());
  }
  return logits;
}

double loss(const MlpSpec& spec, ConstSpan theta, const Batch& batch) {
  check_batch(spec, theta, batch);
  const auto layout = param_layout(spec);
  Tape tape(layout);
  Vec64 probs(spec.num_classes());
  Vec64 per_sample(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    run_forward(spec, layout, theta, batch.inputs.row(r), tape);
    per_sample[r] = cross_entropy(tape.post.back(), batch.labels[r], probs);
  }
  return sorted_sum(std::move(per_sample)) / static_cast<double>(batch.size());
}

LossGrad loss_and_grad(const MlpSpec& spec, ConstSpan theta, const Batch& batch) {
  check_batch(spec, theta, batch);
  const auto layout = param_layout(spec);
  const std::size_t n_layers = layout.size();
  Tape tape(layout);
  Vec64 probs(spec.num_classes());
  Vec64 per_sample(batch.size());
  Vec64 grad(theta.size(), 0.0);

  std::vector<Vec64> delta;
  for (const auto& b : layout) delta.emplace_back(b.fan_out, 0.0);

  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto x = batch.inputs.row(r);
    run_forward(spec, layout, theta, x, tape);
    per_sample[r] = cross_entropy(tape.post.back(), batch.labels[r], probs);

    // dL/dlogits = softmax - onehot
    for (std::size_t c = 0; c < probs.size(); ++c) delta.back()[c] = probs[c];
    delta.back()[static_cast<std::size_t>(batch.labels[r])] -= 1.0;

    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& b = layout[l];
      ConstSpan in = (l == 0) ? x : ConstSpan(tape.post[l - 1]);
      double* gw = grad.data() + b.weight_offset;
      double* gb = grad.data() + b.bias_offset;
      const auto& d = delta[l];
      for (std::size_t o = 0; o < b.fan_out; ++o) {
        gb[o] += d[o];
        double* gwrow = gw + o * b.fan_in;
        for (std::size_t i = 0; i < b.fan_in; ++i) gwrow[i] += d[o] * in[i];
      }
      if (l == 0) break;
      const double* w = theta.data() + b.weight_offset;
      auto& prev = delta[l - 1];
      std::fill(prev.begin(), prev.end(), 0.0);
      for (std::size_t o = 0; o < b.fan_out; ++o) {
        const double* wrow = w + o * b.fan_in;
        for (std::size_t i = 0; i < b.fan_in; ++i) prev[i] += wrow[i] * d[o];
      }
      for (std::size_t i = 0; i < prev.size(); ++i) {
        prev[i] *= activate_deriv(spec.activation, tape.pre[l - 1][i], tape.post[l - 1][i]);
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grad) g *= inv_n;
  return {sorted_sum(std::move(per_sample)) * inv_n, std::move(grad)};
}

Vec64 finite_diff_grad(const MlpSpec& spec, ConstSpan theta, const Batch& batch, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_grad: h must be positive");
  check_batch(spec, theta, batch);
  Vec64 probe(theta.begin(), theta.end());
  Vec64 grad(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    probe[j] = theta[j] + h;
    const double up = loss(spec, probe, batch);
    probe[j] = theta[j] - h;
    const double down = loss(spec, probe, batch);
    probe[j] = theta[j];
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

double min_abs_preactivation(const MlpSpec& spec, ConstSpan theta, const Matrix& inputs) {
  spec.validate();
  check_theta(spec, theta);
  const auto layout = param_layout(spec);
  Tape tape(layout);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < inputs.rows; ++r) {
    run_forward(spec, layout, theta, inputs.row(r), tape);
    for (std::size_t l = 0; l + 1 < layout.size(); ++l) {
      for (double z : tape.pre[l]) best = std::min(best, std::abs(z));
    }
  }
  return best;
}

Vec64 positive_scores(const MlpSpec& spec, ConstSpan theta, const Matrix& inputs) {
  const Matrix logits = forward(spec, theta, inputs);
  Vec64 scores(logits.rows);
  for (std::size_t r = 0; r < logits.rows; ++r) scores[r] = logits(r, 1) - logits(r, 0);
  return scores;
}

}  // namespace gacfas

namespace gacfas {

GradCheckResult gradient_check_suite(const MlpSpec& spec, std::size_t instances,
                                     std::size_t batch_size, double h, double tolerance,
                                     std::uint64_t seed) {
  spec.validate();
  GradCheckResult res;
  Prng prng(seed);
  while (res.instances < instances) {
    Vec64 theta = init_params(spec, prng).theta;
    for (auto& v : theta) v += 0.1 * prng.normal();
    Batch b;
    b.inputs = Matrix(batch_size, spec.input_dim());
    for (auto& v : b.inputs.data) v = prng.normal();
    for (std::size_t r = 0; r < batch_size; ++r) {
      b.labels.push_back(static_cast<int>(prng.below(spec.num_classes())));
      b.domain_ids.push_back(0);
    }
    if (spec.activation == Activation::relu &&
        min_abs_preactivation(spec, theta, b.inputs) < 1e-3) {
      continue;
    }
    const Vec64 analytic = loss_and_grad(spec, theta, b).grad;
    const Vec64 numeric = finite_diff_grad(spec, theta, b, h);
    for (std::size_t j = 0; j < analytic.size(); ++j) {
      res.max_rel_error = std::max(res.max_rel_error,
                                   std::abs(analytic[j] - numeric[j]) / (1.0 + std::abs(numeric[j])));
    }
    ++res.instances;
  }
  res.passed = res.max_rel_error <= tolerance;
  return res;
}

}  // namespace gacfas
