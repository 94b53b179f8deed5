#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tide/task_model.hpp"

namespace tide {

struct Provenance {
    std::string source;
    std::vector<std::string> transforms;
    bool degenerate_binning = false;
};

struct Dataset {
    TaskKind task = TaskKind::AES;
    std::vector<Sample> samples;
    Provenance provenance;

    std::size_t size() const { return samples.size(); }
};

struct SplitSpec {
    std::uint32_t seed = 42;
    double train_fraction = 0.6;
    std::optional<double> sample_fraction;   // down-sample before splitting
    std::optional<std::size_t> sample_count; // at most one of the two set
};

/// Loads the canonical line-delimited record format (one JSON object per
/// line, UTF-8). Every record is validated; unknown fields ignored.
Dataset load(const std::string& path, TaskKind task);

/// Deterministic for a given (contents, seed, spec): optional down-sampling
/// first, then a seeded Fisher-Yates shuffle, then the first
/// ceil(train_fraction * n) records become the train side.
std::pair<Dataset, Dataset> shuffle_split(const Dataset& ds, const SplitSpec& spec);

/// Maps raw AES scores to levels 1..k by equal-frequency binning, ties to
/// the lower level. Fewer than k distinct raw scores falls back to
/// equal-width binning and flags the provenance.
Dataset bin_scores(const Dataset& ds, int k);

/// Fixed-order cycling batches; batch index and iteration index are 1:1.
class BatchCycler {
public:
    BatchCycler(const Dataset& train, int size);

    /// Batch for 1-based iteration i; cycles epoch after epoch.
    std::vector<Sample> batch(int iteration) const;
    int batches_per_epoch() const { return batches_per_epoch_; }

private:
    const Dataset& train_;
    int size_;
    int batches_per_epoch_;
};

/// Seeded Fisher-Yates over indices 0..n-1 using an mt19937 stream with a
/// rejection-sampled bounded draw, so the permutation is identical on every
/// platform.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint32_t seed);

}  // namespace tide
