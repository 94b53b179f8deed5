#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tide {

enum class TaskKind { AES, ACD, ARI };

std::string to_string(TaskKind task);
TaskKind task_from_string(const std::string& name);

/// Inclusive score range for AES; defaults to 1..5.
struct ScoreScale {
    int min = 1;
    int max = 5;

    int span() const { return max - min; }
    bool contains(int s) const { return s >= min && s <= max; }
    int class_count() const { return max - min + 1; }
};

struct DiscourseChunk {
    int index = 0;  // 1-based
    std::string component;
    std::string text;
};

struct Essay {
    std::string id;
    std::string text;
    std::vector<std::string> units;       // ACD: D = [s^1..s^n]
    std::vector<DiscourseChunk> chunks;   // ARI: D_c = [c^1..c^m]
};

/// One typed relation between two chunks. One triple per (from,to) pair;
/// multi-type relations carry several types in the set.
struct RelationTriple {
    int from_index = 0;
    int to_index = 0;
    std::set<std::string> types;

    bool operator==(const RelationTriple&) const = default;
    bool operator<(const RelationTriple& o) const {
        if (from_index != o.from_index) return from_index < o.from_index;
        if (to_index != o.to_index) return to_index < o.to_index;
        return types < o.types;
    }
};

struct GoldLabel {
    // variant by task; only the task-appropriate member is meaningful
    int score = 0;                        // AES (after binning, when applied)
    double raw_score = 0;                 // AES score as loaded, pre-binning
    std::vector<std::string> labels;      // ACD, one per unit
    std::vector<RelationTriple> relations;// ARI
};

struct Sample {
    TaskKind task = TaskKind::AES;
    Essay essay;
    GoldLabel gold;
};

/// Per-unit label plus the one-line justification the Solver returned.
struct UnitLabel {
    int index = 0;
    std::string label;
    std::string explanation;
};

struct RelationPrediction {
    RelationTriple triple;
    std::string explanation;
};

struct Prediction {
    TaskKind task = TaskKind::AES;
    bool valid = true;  // false after parse failures exhausted the repair budget
    int score = 0;
    std::string rationale;
    std::vector<UnitLabel> unit_labels;
    std::vector<RelationPrediction> relations;
};

enum class CriteriaOrigin { Initial, TrialWinner };

/// The evolving criteria text c_i with version lineage.
struct Criteria {
    TaskKind task = TaskKind::AES;
    std::string text;
    int version = 0;
    std::optional<int> parent_version;
    CriteriaOrigin origin = CriteriaOrigin::Initial;
    std::string analysis;  // Guider's stated basis for the revision, when present
};

/// Reports every invariant violation; empty list means the sample is usable.
std::vector<std::string> validate_sample(const Sample& sample,
                                         const ScoreScale& scale = {});

/// Character count of the criteria body (bytes of UTF-8 text; the unit the
/// length-dynamics log uses).
std::size_t criteria_length(const Criteria& c);

/// Canonical lookup: at most one triple per (from,to) pair.
std::map<std::pair<int, int>, std::set<std::string>>
triples_by_pair(const std::vector<RelationTriple>& triples);

}  // namespace tide
