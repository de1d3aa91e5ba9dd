#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the code paths it is used to check.

#include <cmath>
#include <cstdlib>
#include <cstddef>
#include <limits>
#include <set>
#include <vector>

#include "gacfas/model.hpp"
#include "gacfas/optim.hpp"

namespace gacfas::testing {

/// Domain i contributes 0.5 * sum_j a[i][j] * (theta_j - c[i][j])^2.
class QuadraticObjective final : public DomainObjective {
 public:
  QuadraticObjective(std::vector<Vec64> curvature, std::vector<Vec64> centers)
      : a_(std::move(curvature)), c_(std::move(centers)) {}

  /// k copies of theta^2 / 2 in one dimension.
  static QuadraticObjective scalar_half_square(std::size_t k) {
    return QuadraticObjective(std::vector<Vec64>(k, Vec64{1.0}), std::vector<Vec64>(k, Vec64{0.0}));
  }

  std::size_t num_domains() const override { return a_.size(); }
  std::size_t dim() const override { return a_.front().size(); }

  LossGrad domain_loss_grad(ConstSpan theta, std::size_t i) const override {
    LossGrad lg{0.0, Vec64(theta.size())};
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double d = theta[j] - c_[i][j];
      lg.loss += 0.5 * a_[i][j] * d * d;
      lg.grad[j] = a_[i][j] * d;
    }
    return lg;
  }
  double domain_loss(ConstSpan theta, std::size_t i) const override {
    return domain_loss_grad(theta, i).loss;
  }

 private:
  std::vector<Vec64> a_;
  std::vector<Vec64> c_;
};

/// Neumaier-compensated dot product.
inline double compensated_dot(const Vec64& a, const Vec64& b) {
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double term = a[i] * b[i];
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - t) + term;
    } else {
      comp += (term - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

/// Straight-line single-domain update theta - eta (g + grad L(theta + eps) + lambda theta)
/// with eps = rho g / |g|: the two-term objective with no alignment offset.
inline Vec64 reference_single_domain_update(const DomainObjective& obj, const Vec64& theta,
                                            double eta, double rho, double lambda) {
  const Vec64 g = obj.domain_loss_grad(theta, 0).grad;
  double n2 = 0.0;
  for (double v : g) n2 += v * v;
  const double n = std::sqrt(n2);
  Vec64 shifted = theta;
  if (n > 1e-12) {
    for (std::size_t j = 0; j < theta.size(); ++j) shifted[j] += rho * g[j] / n;
  }
  const Vec64 gp = obj.domain_loss_grad(shifted, 0).grad;
  Vec64 out = theta;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    out[j] = theta[j] - eta * (g[j] + gp[j] + lambda * theta[j]);
  }
  return out;
}

/// AUC by enumerating every (positive, negative) pair.
inline double brute_auc(const Vec64& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

struct Confusion {
  double threshold;
  double far;
  double frr;
  long fp, fn, pos, neg;
};

/// Every candidate threshold (-inf, midpoints of distinct sorted scores,
/// +inf) with FAR and FRR counted directly; accept when score > threshold.
inline std::vector<Confusion> enumerate_thresholds(const Vec64& scores,
                                                   const std::vector<int>& labels) {
  std::set<double> distinct(scores.begin(), scores.end());
  const std::vector<double> u(distinct.begin(), distinct.end());
  std::vector<double> thresholds{-std::numeric_limits<double>::infinity()};
  for (std::size_t j = 0; j + 1 < u.size(); ++j) thresholds.push_back(0.5 * (u[j] + u[j + 1]));
  thresholds.push_back(std::numeric_limits<double>::infinity());

  std::vector<Confusion> out;
  for (double th : thresholds) {
    double pos = 0, neg = 0, fn = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool accept = scores[i] > th;
      if (labels[i] == 1) {
        ++pos;
        if (!accept) ++fn;
      } else {
        ++neg;
        if (accept) ++fp;
      }
    }
    out.push_back({th, fp / neg, fn / pos, static_cast<long>(fp), static_cast<long>(fn),
                   static_cast<long>(pos), static_cast<long>(neg)});
  }
  return out;
}

/// |FAR - FRR| scaled by pos * neg, so comparisons are exact.
inline long scaled_eer_gap(const Confusion& c) { return std::labs(c.fp * c.pos - c.fn * c.neg); }

/// HTER at the first threshold (ascending) that minimizes |FAR - FRR|.
inline double brute_hter_at_eer(const Vec64& scores, const std::vector<int>& labels) {
  const auto all = enumerate_thresholds(scores, labels);
  const Confusion* best = &all.front();
  for (const auto& c : all) {
    if (scaled_eer_gap(c) < scaled_eer_gap(*best)) best = &c;
  }
  return 0.5 * (best->far + best->frr);
}

inline double brute_tpr_at_fpr(const Vec64& scores, const std::vector<int>& labels, double cap) {
  double best = 0.0;
  for (const auto& c : enumerate_thresholds(scores, labels)) {
    if (c.far <= cap) best = std::max(best, 1.0 - c.frr);
  }
  return best;
}

}  // namespace gacfas::testing
