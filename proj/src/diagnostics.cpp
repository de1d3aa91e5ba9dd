#include "gacfas/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gacfas/io.hpp"

namespace gacfas {

namespace {

Batch as_single_domain(const Batch& batch) {
  Batch b = batch;
  std::fill(b.domain_ids.begin(), b.domain_ids.end(), 0);
  return b;
}

Vec64 whole_grad(const DomainObjective& obj, ConstSpan theta, double* total_loss = nullptr) {
  Vec64 g;
  double l = 0.0;
  for (std::size_t i = 0; i < obj.num_domains(); ++i) {
    auto lg = obj.domain_loss_grad(theta, i);
    l += lg.loss;
    if (i == 0) {
      g = std::move(lg.grad);
    } else {
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += lg.grad[j];
    }
  }
  if (total_loss) *total_loss = l;
  return g;
}

double whole_loss(const DomainObjective& obj, ConstSpan theta) {
  double l = 0.0;
  for (std::size_t i = 0; i < obj.num_domains(); ++i) l += obj.domain_loss(theta, i);
  return l;
}

}  // namespace

double perturbed_loss(const DomainObjective& obj, ConstSpan theta, double rho) {
  if (!(rho >= 0.0)) throw ContractError("perturbed_loss: rho must be >= 0");
  const Vec64 g = whole_grad(obj, theta);
  const auto eps = ascending_vector(g, rho);
  return whole_loss(obj, axpy(1.0, eps.eps, theta));
}

double perturbed_loss(const MlpSpec& spec, ConstSpan theta, const Batch& batch, double rho) {
  return perturbed_loss(MlpObjective(spec, as_single_domain(batch), 1), theta, rho);
}

double surrogate_gap(const DomainObjective& obj, ConstSpan theta, double rho) {
  return perturbed_loss(obj, theta, rho) - whole_loss(obj, theta);
}

double surrogate_gap(const MlpSpec& spec, ConstSpan theta, const Batch& batch, double rho) {
  return surrogate_gap(MlpObjective(spec, as_single_domain(batch), 1), theta, rho);
}

Matrix alignment_inner_products(const DomainObjective& obj, ConstSpan theta, std::size_t i,
                                double rho, double gamma, double zero_grad_eps) {
  const std::size_t k = obj.num_domains();
  if (i >= k) throw ContractError("alignment_inner_products: domain index out of range");
  std::vector<Vec64> plain;
  for (std::size_t n = 0; n < k; ++n) plain.push_back(obj.domain_loss_grad(theta, n).grad);
  Vec64 g = plain.front();
  for (std::size_t n = 1; n < k; ++n) {
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += plain[n][j];
  }
  const auto eps = ascending_vector(plain[i], rho, zero_grad_eps, i);
  const Vec64 adv = axpy(-gamma, g, axpy(1.0, eps.eps, theta));

  Matrix m(k, k);
  for (std::size_t a = 0; a < k; ++a) {
    const Vec64 gp = obj.domain_loss_grad(adv, a).grad;
    for (std::size_t b = 0; b < k; ++b) m(a, b) = dot(gp, plain[b]);
  }
  return m;
}

Matrix alignment_inner_products(const MlpSpec& spec, ConstSpan theta, const SourceSet& source,
                                std::size_t i, double rho, double gamma) {
  return alignment_inner_products(MlpObjective(spec, source.merged(), source.k()), theta, i, rho,
                                  gamma);
}

double taylor_alignment_residual(const DomainObjective& obj, ConstSpan theta, std::size_t i,
                                 double rho, double gamma) {
  if (i >= obj.num_domains()) throw ContractError("taylor_alignment_residual: bad domain index");
  const Vec64 g = whole_grad(obj, theta);
  const Vec64 gi = obj.domain_loss_grad(theta, i).grad;
  const auto eps = ascending_vector(gi, rho, 1e-12, i);
  const Vec64 ascended = axpy(1.0, eps.eps, theta);

  double phi0 = 0.0;
  const Vec64 gp = whole_grad(obj, ascended, &phi0);
  const double phi = whole_loss(obj, axpy(-gamma, g, ascended));
  return std::abs(phi - (phi0 - gamma * dot(gp, g)));
}

std::vector<ParamBlock> param_blocks(const MlpSpec& spec) {
  std::vector<ParamBlock> blocks;
  for (const auto& b : param_layout(spec)) {
    blocks.push_back({b.weight_offset, b.weight_size()});
    blocks.push_back({b.bias_offset, b.fan_out});
  }
  return blocks;
}

Vec64 block_normalized_direction(ConstSpan theta, std::span<const ParamBlock> blocks,
                                 Prng& prng) {
  Vec64 d = gaussian(prng, theta.size());
  for (const auto& b : blocks) {
    if (b.offset + b.size > theta.size()) throw ContractError("parameter block out of range");
    const auto tb = theta.subspan(b.offset, b.size);
    const auto db = std::span(d).subspan(b.offset, b.size);
    const double tn = l2_norm(tb);
    const double dn = l2_norm(db);
    const double s = (tn == 0.0 || dn == 0.0) ? 0.0 : tn / dn;
    for (double& v : db) v *= s;
  }
  return d;
}

LandscapeGrid landscape_slice(const LossFn& loss_fn, ConstSpan theta,
                              std::span<const ParamBlock> blocks, std::size_t dims,
                              double radius, std::size_t steps, Prng& prng) {
  if (dims != 1 && dims != 2) throw ContractError("landscape_slice: dims must be 1 or 2");
  if (steps < 3 || steps % 2 == 0) {
    throw ContractError("landscape_slice: steps must be odd and >= 3 (got " +
                        std::to_string(steps) + ")");
  }
  if (!(radius > 0.0)) throw ContractError("landscape_slice: radius must be > 0");

  LandscapeGrid grid;
  grid.dims = dims;
  for (std::size_t d = 0; d < dims; ++d) {
    grid.directions.push_back(block_normalized_direction(theta, blocks, prng));
  }
  grid.center_loss = loss_fn(theta);

  Vec64 coords(steps);
  const std::size_t mid = (steps - 1) / 2;
  for (std::size_t j = 0; j < steps; ++j) {
    coords[j] = (j == mid) ? 0.0
                           : radius * (2.0 * static_cast<double>(j) /
                                           static_cast<double>(steps - 1) -
                                       1.0);
  }

  auto eval_at = [&](double s, double u) {
    if (s == 0.0 && u == 0.0) return grid.center_loss;
    Vec64 p = axpy(s, grid.directions[0], theta);
    if (dims == 2) p = axpy(u, grid.directions[1], p);
    return loss_fn(p);
  };

  for (double s : coords) {
    if (dims == 1) {
      grid.offsets.push_back({s, 0.0});
      grid.losses.push_back(eval_at(s, 0.0));
    } else {
      for (double u : coords) {
        grid.offsets.push_back({s, u});
        grid.losses.push_back(eval_at(s, u));
      }
    }
  }
  return grid;
}

LandscapeGrid landscape_slice(const MlpSpec& spec, ConstSpan theta, const Batch& batch,
                              std::size_t dims, double radius, std::size_t steps, Prng& prng) {
  const auto blocks = param_blocks(spec);
  LossFn fn = [&](ConstSpan p) { return loss(spec, p, batch); };
  return landscape_slice(fn, theta, blocks, dims, radius, steps, prng);
}

void write_landscape_csv(const LandscapeGrid& grid, const std::filesystem::path& path) {
  std::string text = grid.dims == 2 ? "s,u,loss\n" : "s,loss\n";
  for (std::size_t j = 0; j < grid.losses.size(); ++j) {
    text += format_double(grid.offsets[j][0]);
    if (grid.dims == 2) text += "," + format_double(grid.offsets[j][1]);
    text += "," + format_double(grid.losses[j]) + "\n";
  }
  write_file_atomic(path, text);
}

double ConvergenceTrace::rate(double t) { return t > 0.0 ? std::log(t) / std::sqrt(t) : 0.0; }

double ConvergenceTrace::envelope(double t) const {
  return std::max(fitted_c_grad, fitted_c_adv) * rate(t);
}

namespace {

struct Fit {
  double c = 0.0;
  double exceed = 0.0;
};

Fit fit_bound(const Vec64& centers, const Vec64& values, double quartile_end) {
  double sum_v = 0.0;
  double sum_r = 0.0;
  for (std::size_t w = 0; w < centers.size(); ++w) {
    if (centers[w] > quartile_end) continue;
    sum_v += values[w];
    sum_r += ConvergenceTrace::rate(centers[w]);
  }
  Fit fit;
  fit.c = sum_r > 0.0 ? sum_v / sum_r : 0.0;
  std::size_t later = 0;
  std::size_t above = 0;
  for (std::size_t w = 0; w < centers.size(); ++w) {
    if (centers[w] <= quartile_end) continue;
    ++later;
    if (values[w] > fit.c * ConvergenceTrace::rate(centers[w])) ++above;
  }
  fit.exceed = later ? static_cast<double>(above) / static_cast<double>(later) : 0.0;
  return fit;
}

double mean_where(std::span<const StepDiagnostics> stream, auto&& keep, auto&& value) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& d : stream) {
    if (!keep(static_cast<double>(d.t))) continue;
    acc += value(d);
    ++n;
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace

ConvergenceTrace convergence_trace(std::span<const StepDiagnostics> stream, std::size_t window) {
  if (stream.empty()) throw ContractError("convergence_trace: empty diagnostics stream");
  if (window < 1) throw ContractError("convergence_trace: window must be >= 1");

  auto grad_sq = [](const StepDiagnostics& d) { return d.grad_norm * d.grad_norm; };
  auto adv_sq = [](const StepDiagnostics& d) { return d.adv_grad_sq_mean(); };

  ConvergenceTrace tr;
  for (std::size_t start = 0; start < stream.size(); start += window) {
    const std::size_t end = std::min(stream.size(), start + window);
    double ts = 0.0, gs = 0.0, as = 0.0;
    for (std::size_t j = start; j < end; ++j) {
      ts += static_cast<double>(stream[j].t);
      gs += grad_sq(stream[j]);
      as += adv_sq(stream[j]);
    }
    const auto n = static_cast<double>(end - start);
    tr.t.push_back(ts / n);
    tr.grad_sq.push_back(gs / n);
    tr.adv_grad_sq.push_back(as / n);
  }

  const double t_max = static_cast<double>(stream.back().t);
  const Fit g = fit_bound(tr.t, tr.grad_sq, t_max / 4.0);
  const Fit a = fit_bound(tr.t, tr.adv_grad_sq, t_max / 4.0);
  tr.fitted_c_grad = g.c;
  tr.fitted_c_adv = a.c;
  tr.exceed_fraction_grad = g.exceed;
  tr.exceed_fraction_adv = a.exceed;

  auto first = [&](double t) { return t <= t_max / 10.0; };
  auto last = [&](double t) { return t > 0.9 * t_max; };
  tr.first_decile_grad = mean_where(stream, first, grad_sq);
  tr.last_decile_grad = mean_where(stream, last, grad_sq);
  tr.first_decile_adv = mean_where(stream, first, adv_sq);
  tr.last_decile_adv = mean_where(stream, last, adv_sq);
  return tr;
}

void write_convergence_csv(const ConvergenceTrace& trace, const std::filesystem::path& path) {
  std::string text = "t,grad_sq_mean,adv_grad_sq_mean,bound\n";
  for (std::size_t w = 0; w < trace.t.size(); ++w) {
    text += format_double(trace.t[w]) + "," + format_double(trace.grad_sq[w]) + "," +
            format_double(trace.adv_grad_sq[w]) + "," + format_double(trace.envelope(trace.t[w])) +
            "\n";
  }
  write_file_atomic(path, text);
}

}  // namespace gacfas
