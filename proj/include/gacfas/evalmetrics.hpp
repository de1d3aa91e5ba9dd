#pragma once

#include <vector>

#include "gacfas/numerics.hpp"

namespace gacfas {

/// Scores where higher means "live" (label 1); label 0 is spoof.
struct ScoredSet {
  Vec64 scores;
  std::vector<int> labels;

  /// Throws ContractError on length mismatch, labels outside {0, 1}, or a
  /// missing class.
  void validate() const;
};

/// Mann-Whitney: P(s+ > s-) + 0.5 P(s+ = s-), exact over all pairs.
double roc_auc(const ScoredSet& s);

struct HterResult {
  double hter = 0.0;
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

/// HTER at the equal-error threshold of this set.
///
/// Candidate thresholds are -inf, the midpoints between consecutive distinct
/// scores, and +inf; a sample is accepted as live when score > threshold.
/// The candidate minimizing |FAR - FRR| wins, ties going to the lower
/// threshold.
HterResult hter_at_eer(const ScoredSet& s);

/// Largest TPR over the same candidate thresholds with FPR <= fpr_cap. The
/// ROC is a step function; nothing is interpolated.
double tpr_at_fpr(const ScoredSet& s, double fpr_cap = 0.05);

}  // namespace gacfas
