#include "gacfas/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

namespace gacfas {

void ScoredSet::validate() const {
  if (scores.size() != labels.size()) throw ContractError("ScoredSet: length mismatch");
  bool has_pos = false;
  bool has_neg = false;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ContractError("ScoredSet: labels must be 0 or 1");
    (l == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    throw ContractError("ScoredSet: need at least one positive and one negative");
  }
  for (double v : scores) {
    if (std::isnan(v)) throw ContractError("ScoredSet: NaN score");
  }
}

namespace {

/// One row of the threshold sweep: counts of accepted samples at a threshold.
struct SweepPoint {
  double threshold;
  std::int64_t tp;
  std::int64_t fp;
};

struct Sweep {
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
  std::vector<SweepPoint> points;  // ascending thresholds
};

Sweep sweep(const ScoredSet& s) {
  s.validate();
  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  Sweep out;
  for (int l : s.labels) (l == 1 ? out.positives : out.negatives) += 1;

  std::int64_t tp = out.positives;
  std::int64_t fp = out.negatives;
  out.points.push_back({-std::numeric_limits<double>::infinity(), tp, fp});
  std::size_t j = 0;
  while (j < order.size()) {
    const double v = s.scores[order[j]];
    while (j < order.size() && s.scores[order[j]] == v) {
      (s.labels[order[j]] == 1 ? tp : fp) -= 1;
      ++j;
    }
    const double next = j < order.size() ? 0.5 * (v + s.scores[order[j]])
                                         : std::numeric_limits<double>::infinity();
    out.points.push_back({next, tp, fp});
  }
  return out;
}

}  // namespace

double roc_auc(const ScoredSet& s) {
  s.validate();
  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Twice the win count keeps half-credits integral.
  std::int64_t twice_wins = 0;
  std::int64_t negatives_below = 0;
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
  std::size_t j = 0;
  while (j < order.size()) {
    const double v = s.scores[order[j]];
    std::int64_t pos_here = 0;
    std::int64_t neg_here = 0;
    while (j < order.size() && s.scores[order[j]] == v) {
      (s.labels[order[j]] == 1 ? pos_here : neg_here) += 1;
      ++j;
    }
    twice_wins += pos_here * (2 * negatives_below + neg_here);
    negatives_below += neg_here;
    positives += pos_here;
    negatives += neg_here;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(positives * negatives));
}

HterResult hter_at_eer(const ScoredSet& s) {
  const Sweep sw = sweep(s);
  const std::int64_t p = sw.positives;
  const std::int64_t n = sw.negatives;
  // |FAR - FRR| = |fp * p - fn * n| / (n * p); compare the integer numerators.
  std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
  const SweepPoint* best = nullptr;
  for (const auto& pt : sw.points) {
    const std::int64_t fn = p - pt.tp;
    const std::int64_t gap = std::llabs(pt.fp * p - fn * n);
    if (gap < best_gap) {
      best_gap = gap;
      best = &pt;
    }
  }
  HterResult r;
  r.threshold = best->threshold;
  r.far = static_cast<double>(best->fp) / static_cast<double>(n);
  r.frr = static_cast<double>(p - best->tp) / static_cast<double>(p);
  r.hter = 0.5 * (r.far + r.frr);
  return r;
}

double tpr_at_fpr(const ScoredSet& s, double fpr_cap) {
  if (!(fpr_cap >= 0.0 && fpr_cap <= 1.0)) {
    throw ContractError("tpr_at_fpr: cap must be in [0, 1], got " + std::to_string(fpr_cap));
  }
  const Sweep sw = sweep(s);
  double best = 0.0;
  for (const auto& pt : sw.points) {
    const double fpr = static_cast<double>(pt.fp) / static_cast<double>(sw.negatives);
    if (fpr <= fpr_cap) {
      best = std::max(best, static_cast<double>(pt.tp) / static_cast<double>(sw.positives));
    }
  }
  return best;
}

}  // namespace gacfas
