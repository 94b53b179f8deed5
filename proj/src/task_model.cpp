#include "tide/task_model.hpp"

#include <algorithm>

#include "tide/errors.hpp"

namespace tide {

std::string to_string(TaskKind task) {
    switch (task) {
        case TaskKind::AES: return "AES";
        case TaskKind::ACD: return "ACD";
        case TaskKind::ARI: return "ARI";
    }
    return "?";
}

TaskKind task_from_string(const std::string& name) {
    std::string up = name;
    std::transform(up.begin(), up.end(), up.begin(), ::toupper);
    if (up == "AES") return TaskKind::AES;
    if (up == "ACD") return TaskKind::ACD;
    if (up == "ARI") return TaskKind::ARI;
    throw ConfigError("unknown task: " + name);
}

std::vector<std::string> validate_sample(const Sample& sample,
                                         const ScoreScale& scale) {
    std::vector<std::string> out;
    const Essay& e = sample.essay;

    if (e.id.empty()) out.push_back("essay id empty");

    switch (sample.task) {
        case TaskKind::AES:
            if (!scale.contains(sample.gold.score))
                out.push_back("score " + std::to_string(sample.gold.score) +
                              " outside scale [" + std::to_string(scale.min) +
                              "," + std::to_string(scale.max) + "]");
            break;
        case TaskKind::ACD: {
            if (e.units.empty()) out.push_back("ACD sample has no discourse units");
            if (sample.gold.labels.size() != e.units.size())
                out.push_back("label count " + std::to_string(sample.gold.labels.size()) +
                              " ≠ unit count " + std::to_string(e.units.size()));
            break;
        }
        case TaskKind::ARI: {
            if (e.chunks.empty()) out.push_back("ARI sample has no discourse chunks");
            for (std::size_t i = 0; i < e.chunks.size(); ++i) {
                if (e.chunks[i].index != static_cast<int>(i) + 1) {
                    out.push_back("chunk indices not contiguous 1-based at position " +
                                  std::to_string(i + 1));
                    break;
                }
            }
            const int m = static_cast<int>(e.chunks.size());
            std::set<std::pair<int, int>> seen;
            for (const auto& t : sample.gold.relations) {
                if (t.from_index == t.to_index)
                    out.push_back("self-relation " + std::to_string(t.from_index) + "→" +
                                  std::to_string(t.to_index) + " forbidden");
                if (t.from_index < 1 || t.from_index > m || t.to_index < 1 || t.to_index > m)
                    out.push_back("relation (" + std::to_string(t.from_index) + "," +
                                  std::to_string(t.to_index) + ") references missing chunk");
                if (t.types.empty())
                    out.push_back("relation (" + std::to_string(t.from_index) + "," +
                                  std::to_string(t.to_index) + ") has empty type set");
                if (!seen.insert({t.from_index, t.to_index}).second)
                    out.push_back("duplicate relation pair (" + std::to_string(t.from_index) +
                                  "," + std::to_string(t.to_index) + ")");
            }
            break;
        }
    }
    return out;
}

std::size_t criteria_length(const Criteria& c) { return c.text.size(); }

std::map<std::pair<int, int>, std::set<std::string>>
triples_by_pair(const std::vector<RelationTriple>& triples) {
    std::map<std::pair<int, int>, std::set<std::string>> out;
    for (const auto& t : triples) {
        auto& types = out[{t.from_index, t.to_index}];
        types.insert(t.types.begin(), t.types.end());
    }
    return out;
}

}  // namespace tide
