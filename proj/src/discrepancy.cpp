#include "tide/discrepancy.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>

#include "tide/errors.hpp"

namespace tide {

int d_aes(int gold, int pred) { return std::abs(gold - pred); }

int d_acd(const std::vector<std::string>& gold,
          const std::vector<UnitLabel>& pred) {
    std::map<int, const std::string*> by_index;
    for (const auto& u : pred) by_index.emplace(u.index, &u.label);

    int d = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        auto it = by_index.find(static_cast<int>(i) + 1);
        if (it == by_index.end() || *it->second != gold[i]) ++d;
    }
    return d;
}

int d_ari(const std::vector<RelationTriple>& gold,
          const std::vector<RelationTriple>& pred,
          const DiscrepancyConfig& cfg) {
    auto gold_pairs = triples_by_pair(gold);

    int d = 0;
    std::set<std::pair<int, int>> matched;
    for (const auto& [pair, pred_types] : triples_by_pair(pred)) {
        auto it = gold_pairs.find(pair);
        if (it != gold_pairs.end()) {
            matched.insert(pair);
            const auto& gold_types = it->second;
            for (const auto& t : pred_types)
                if (!gold_types.count(t)) ++d;
            for (const auto& t : gold_types)
                if (!pred_types.count(t)) ++d;
        } else {
            d += static_cast<int>(pred_types.size()) + 2 * cfg.ari_penalty;
        }
    }
    for (const auto& [pair, gold_types] : gold_pairs) {
        if (!matched.count(pair))
            d += static_cast<int>(gold_types.size()) + 2 * cfg.ari_penalty;
    }
    return d;
}

int sample_discrepancy(const Sample& sample, const Prediction& pred,
                       const DiscrepancyConfig& cfg, const ScoreScale& scale) {
    switch (sample.task) {
        case TaskKind::AES:
            if (!pred.valid) return scale.span();
            return d_aes(sample.gold.score, pred.score);
        case TaskKind::ACD:
            if (!pred.valid) return static_cast<int>(sample.essay.units.size());
            return d_acd(sample.gold.labels, pred.unit_labels);
        case TaskKind::ARI: {
            std::vector<RelationTriple> triples;
            if (pred.valid)
                for (const auto& r : pred.relations) triples.push_back(r.triple);
            return d_ari(sample.gold.relations, triples, cfg);
        }
    }
    return 0;
}

int batch_discrepancy(const std::vector<Sample>& samples,
                      const std::vector<Prediction>& preds,
                      const DiscrepancyConfig& cfg, const ScoreScale& scale) {
    if (samples.size() != preds.size())
        throw LengthMismatch("batch_discrepancy: " + std::to_string(samples.size()) +
                             " samples vs " + std::to_string(preds.size()) + " predictions");
    int total = 0;
    for (std::size_t i = 0; i < samples.size(); ++i)
        total += sample_discrepancy(samples[i], preds[i], cfg, scale);
    return total;
}

}  // namespace tide
