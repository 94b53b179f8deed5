#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tide/task_model.hpp"

namespace tide {

struct MetricsReport {
    TaskKind task = TaskKind::AES;
    std::size_t n = 0;
    double parse_failure_rate = 0.0;
    std::optional<double> qwk;
    std::optional<double> pearson;
    bool qwk_degenerate = false;      // both sides constant and equal
    bool pearson_undefined = false;   // zero variance on a side
    std::optional<double> micro_f1;
    std::optional<double> macro_f1;
    std::optional<double> ari_pair_precision;
    std::optional<double> ari_pair_recall;
    std::optional<double> ari_pair_f1;

    std::string to_json() const;
    std::string to_table() const;
    static MetricsReport from_json(const std::string& text);
};

/// Quadratic weighted kappa over values in 1..k. Weights w_ij = (i-j)^2 /
/// (k-1)^2, kappa = 1 - sum(w*O)/sum(w*E) with O the normalized observed
/// matrix and E the outer product of marginals. Returns 1 (degenerate=true)
/// when both sequences are constant and equal.
double qwk(const std::vector<int>& gold, const std::vector<int>& pred, int k,
           bool* degenerate = nullptr);

/// Sample Pearson correlation; undefined (set flag) when either side has
/// zero variance.
double pearson(const std::vector<double>& gold, const std::vector<double>& pred,
               bool* undefined = nullptr);

/// Micro / macro F1 for single-label positions. Macro averages over classes
/// present in gold ∪ pred.
std::pair<double, double> classification_f1(const std::vector<std::string>& gold,
                                            const std::vector<std::string>& pred);

struct AriF1 {
    double micro = 0;
    double macro = 0;
    double pair_precision = 0;
    double pair_recall = 0;
    double pair_f1 = 0;
};

/// Flattens triples into (essay, from, to, type) atoms; micro F1 over atoms,
/// macro F1 per relation type, and pair hit metrics on (essay, from, to)
/// ignoring types.
AriF1 ari_f1(const std::vector<std::vector<RelationTriple>>& gold,
             const std::vector<std::vector<RelationTriple>>& pred);

}  // namespace tide
