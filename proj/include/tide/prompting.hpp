#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tide/task_model.hpp"

namespace tide {

struct ParsedScore {
    int score = 0;
    std::string rationale;
};

struct ParsedUpdate {
    std::string updated_criteria;
    std::string analysis;
};

enum class DebateSide { ExpertA, ExpertB };

struct ParsedVerdict {
    DebateSide winner = DebateSide::ExpertA;
    std::string reason;
};

struct ParsedRationale {
    std::string rationale;
};

/// Records parsed from the "#<n>:" / "#<from> -> #<to>:" line grammar.
struct ParsedUnitLabels {
    TaskKind task = TaskKind::ACD;
    std::vector<UnitLabel> units;                // ACD
    std::vector<RelationPrediction> relations;   // ARI
    std::vector<int> missing_units;              // ACD gaps, never invented
    std::vector<std::string> warnings;           // duplicates etc.
};

enum class SchemaId { Score, Update, Verdict, Rationale };

/// Prompt templates keyed by id, with `{name}` placeholders. Defaults are
/// built in; a template directory (one `<id>.txt` per template) overrides
/// them so the wording can be localized without code changes.
class TemplateStore {
public:
    TemplateStore();

    /// Overrides any template for which `dir/<id>.txt` exists.
    void load_overrides(const std::string& dir);

    const std::string& body(const std::string& id) const;
    const std::set<std::string>& required_bindings(const std::string& id) const;
    std::vector<std::string> ids() const;

    /// Verbatim placeholder substitution; deterministic, no escaping.
    std::string render(const std::string& id,
                       const std::map<std::string, std::string>& bindings) const;

private:
    struct Entry {
        std::string body;
        std::set<std::string> required;
    };
    std::map<std::string, Entry> templates_;
};

/// Removes a leading reasoning block (default <think>...</think>) and any
/// surrounding markdown code fence. Idempotent; identity when no markers.
std::string strip_reasoning(const std::string& raw,
                            const std::string& open_marker = "<think>",
                            const std::string& close_marker = "</think>");

/// Strips reasoning, extracts the first balanced top-level JSON object
/// (trailing chatter ignored), and validates it against the schema.
/// Out-of-range scores are errors, never clamped.
ParsedScore parse_score(const std::string& raw, const ScoreScale& scale = {});
ParsedUpdate parse_update(const std::string& raw);
ParsedVerdict parse_verdict(const std::string& raw);
ParsedRationale parse_rationale(const std::string& raw);

/// Parses the per-unit line grammar. ACD records: "#<n>:" then a label line
/// and a one-line explanation. ARI records: "#<from> -> #<to>: <type>{, <type>}"
/// then one explanation line. Duplicate indices keep the first occurrence.
ParsedUnitLabels parse_unit_lines(const std::string& raw, TaskKind task,
                                  int unit_count);

/// Inverse of parse_unit_lines, used for round-trip checks and for turning a
/// prediction back into debate speech.
std::string format_unit_lines(const ParsedUnitLabels& parsed);

}  // namespace tide
