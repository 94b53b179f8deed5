#pragma once

#include <vector>

#include "tide/task_model.hpp"

namespace tide {

struct DiscrepancyConfig {
    int ari_penalty = 2;  // p; unmatched pairs cost |types| + 2*p
};

/// |gold - pred|.
int d_aes(int gold, int pred);

/// Count of units whose predicted label differs from gold; units the
/// prediction never mentions count as mismatches.
int d_acd(const std::vector<std::string>& gold,
          const std::vector<UnitLabel>& pred);

/// Pair-matching cost: matched (from,to) pairs contribute the symmetric
/// difference of their type sets; unmatched pairs on either side contribute
/// |types| + 2*p.
int d_ari(const std::vector<RelationTriple>& gold,
          const std::vector<RelationTriple>& pred,
          const DiscrepancyConfig& cfg = {});

/// Per-sample discrepancy dispatching on task. An invalid prediction scores
/// the task's maximum plausible value (AES: scale span; ACD: unit count;
/// ARI: d_ari(gold, empty)).
int sample_discrepancy(const Sample& sample, const Prediction& pred,
                       const DiscrepancyConfig& cfg = {},
                       const ScoreScale& scale = {});

/// Sum of per-sample discrepancies; golds and preds aligned 1:1.
int batch_discrepancy(const std::vector<Sample>& samples,
                      const std::vector<Prediction>& preds,
                      const DiscrepancyConfig& cfg = {},
                      const ScoreScale& scale = {});

}  // namespace tide
