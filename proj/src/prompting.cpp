#include "tide/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "tide/errors.hpp"

namespace tide {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

const char* kInitCriteria = R"(You are a senior Chinese language education expert responsible for {task_name}.

### Task Description
{task_description}

Draft an initial set of well-specified criteria that an assistant must strictly follow when performing this task. Make every requirement concrete enough to be applied consistently across essays.

### Demonstrations
Below are annotated demonstrations (input, gold answer, explanation). Align your criteria with them:
{demos}

Output only the criteria text, without any preamble.)";

const char* kAesPredict = R"(You are a professional essay grading expert and need to strictly follow the provided grading criteria to evaluate the given essay. Please conduct the analysis with an objective and impartial attitude to ensure that the grading results are highly consistent with the grading criteria.

### Output Requirements

- Carefully analyze whether the essay content meets each description of the grading criteria.

- The score must be an integer between {score_min} and {score_max} ({score_min}=Unmet, {score_max}=Excellent).

- Justify the score by comparing each item of the grading criteria.

- The final result must be strictly output in the following JSON format:
{
    "score": "An integer between {score_min} and {score_max}",
    "rationale": "Provide the rationale for your score"
}

Below is the essay that needs to be evaluated by you:
{essay_text}

Below is the grading logic that you must strictly follow when grading:
{current_criteria})";

const char* kAesUpdate = R"(You are a senior Chinese language education expert. Now analyze the gap between the original grading criteria and the real scores based on the provided argumentative essay grading data, and output the updated grading criteria. Follow the steps below:

### Gap Identification

Compare the differences between the predicted scoring rationale and the actual scores, focusing on:

- Scoring dimensions not covered by the original criteria (e.g., depth of argumentation, novelty of materials).

- Weight distribution discrepancy in scoring (e.g., overemphasizing structure while neglecting language).

- Ambiguity in scoring standards (e.g., "sufficient evidence" without specifying a specific quantity requirement).

### Update Principles

- Quantification: For example, change "clear structure" to "at least two transitional sentences between claims."

- Layered refinement: For example, split "rich content" into "depth of argument" and "breadth of evidence."

- Dynamic calibration: For example, increase the weight of a certain dimension.

Below are the scoring criteria that need to be updated by you:
{current_criteria}

The following provides argumentative essay scoring data:
Original argumentative essay:
{essay_text}

Original scoring rationale:
{pred_rationale}

Predicted score based on the original scoring rationale: {pred_score}/{score_max}

Actual score: {gold_score}/{score_max}

### Output Requirements

Output strictly in the following JSON structure:

{
    "updated_criteria": "A string that saves the modified scoring criteria. Ensure the format is correct and does not include any editing symbols.",
    "analysis": "A string that explains the basis for your modifications."
})";

const char* kAcdAriPredict = R"(You are an expert in analyzing the structure of argumentative essays, proficient in deconstructing the structure of argumentative texts and {task_description}. Now you need to strictly follow the provided descriptions of {task_name} labels to analyze the input essay, assign the labels for each numbered item, and provide a one-line explanation and justification. Ensure that your analysis is highly consistent with the category descriptions.

The labels of {task_name} include the following:
{labels}

### Input Essay
{essay_text}

### {task_name} Descriptions
{current_criteria}

### Output Requirements
Return your results in the following format, and do not output any other information:

{output_format})";

const char* kAcdAriUpdate = R"(You are an expert in analyzing the structure of argumentative essays, proficient in deconstructing the structure of argumentative texts and {task_description}. Please identify the discrepancies between the {task_name} label descriptions and the true categories, and accurately adjust the category descriptions. Follow these steps:

1. Comparative Analysis: Check each item with incorrect predictions one by one, and identify ambiguities, loopholes, or insufficient coverage in the existing label descriptions.

2. Description Optimization: While maintaining professionalism, you can improve the label definitions in the following ways (among others):

- Add exclusion criteria (when misjudgment cases occur)

- Supplement typical characteristics (when the definition is vague)

- Adjust degree modifiers (when there is ambiguity in boundaries)

- Remove redundant information (when the definition is overly complex)

The labels of {task_name} include the following:
{labels}

The following are the category descriptions that you need to update:
{current_criteria}

The following provides the analysis data of the argumentative essay:
{essay_text}

The following provides the incorrect predictions obtained using the original category descriptions, together with the true categories:
{pred_list}

### Output Requirements
Output the JSON strictly in the following structure:
{
    "updated_criteria": "A string, save the modified category label descriptions here. Ensure the format is correct and do not include any revision symbols.",
    "analysis": "A string, indicating the analysis and basis for your modifications"
})";

const char* kDebateJudge = R"(You are an experienced Chinese language teaching expert. Now you need to evaluate the {task_name} results provided by two experts for the same argumentative essay and determine which side is more in line with the reference standards.

### Reference Standards

{standards}

### Evaluation Basis of Expert A

{expert_a}

### Evaluation Basis of Expert B

{expert_b}

### Output Requirements

Output your evaluation result in JSON format, as follows:
{
    "winner": "Expert A or Expert B",
    "reason": "A string indicating the reason for your choice"
})";

const char* kExplainGoldAes = R"(You are an experienced Chinese language teaching expert. Now you need to conduct a multidimensional analysis of the given argumentative essay based on the corresponding score ({score_min}-{score_max} points) to explain the reasons behind the score. Please strictly follow the requirements below:

### Output Specifications

1. Focus on the analysis itself and strictly avoid any explicit mention of the given score, such as 'score/points/rating'.

2. Output in strict JSON format as follows:
{
    "rationale": "Your explanation for the score, as a single string"
}

Below is the essay that needs your evaluation. Its score is {gold_score}:
{essay_text})";

const char* kExplainGoldAcdAri = R"(You are an expert in analyzing the structure of argumentative essays, proficient in deconstructing the structure of argumentative texts and {task_description}. Now, for the input essay and the labels of the {task_name}, generate a brief explanation for each label.

### Input Essay
{essay_text}

### Label List
{labeled_units}

### Output Requirements
Return your results in the following format, and do not output any other information:

{output_format})";

}  // namespace

TemplateStore::TemplateStore() {
    auto add = [this](const std::string& id, const char* body,
                      std::set<std::string> required) {
        templates_[id] = Entry{body, std::move(required)};
    };
    add("init_criteria", kInitCriteria, {"task_name", "task_description", "demos"});
    add("aes_predict", kAesPredict,
        {"essay_text", "current_criteria", "score_min", "score_max"});
    add("aes_update", kAesUpdate,
        {"current_criteria", "essay_text", "pred_rationale", "pred_score",
         "gold_score", "score_max"});
    add("acd_ari_predict", kAcdAriPredict,
        {"task_name", "task_description", "labels", "essay_text",
         "current_criteria", "output_format"});
    add("acd_ari_update", kAcdAriUpdate,
        {"task_name", "task_description", "labels", "current_criteria",
         "essay_text", "pred_list"});
    add("debate_judge", kDebateJudge,
        {"task_name", "standards", "expert_a", "expert_b"});
    add("explain_gold_aes", kExplainGoldAes,
        {"score_min", "score_max", "gold_score", "essay_text"});
    add("explain_gold_acd_ari", kExplainGoldAcdAri,
        {"task_description", "task_name", "essay_text", "labeled_units",
         "output_format"});
}

void TemplateStore::load_overrides(const std::string& dir) {
    namespace fs = std::filesystem;
    for (auto& [id, entry] : templates_) {
        fs::path p = fs::path(dir) / (id + ".txt");
        if (!fs::exists(p)) continue;
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        entry.body = buf.str();
    }
}

const std::string& TemplateStore::body(const std::string& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw UnknownTemplate("unknown template: " + id);
    return it->second.body;
}

const std::set<std::string>& TemplateStore::required_bindings(
    const std::string& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw UnknownTemplate("unknown template: " + id);
    return it->second.required;
}

std::vector<std::string> TemplateStore::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : templates_) out.push_back(id);
    return out;
}

std::string TemplateStore::render(
    const std::string& id,
    const std::map<std::string, std::string>& bindings) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw UnknownTemplate("unknown template: " + id);
    for (const auto& name : it->second.required)
        if (!bindings.count(name))
            throw MissingBinding("template " + id + ": missing binding \"" + name + "\"");

    // substitute every {name} occurrence; longest-name-first is irrelevant
    // because markers are exact `{name}` tokens
    std::string out = it->second.body;
    for (const auto& [name, value] : bindings) {
        const std::string marker = "{" + name + "}";
        std::size_t pos = 0;
        while ((pos = out.find(marker, pos)) != std::string::npos) {
            out.replace(pos, marker.size(), value);
            pos += value.size();
        }
    }
    return out;
}

std::string strip_reasoning(const std::string& raw, const std::string& open_marker,
                            const std::string& close_marker) {
    std::string s = trim(raw);
    if (!open_marker.empty() && s.rfind(open_marker, 0) == 0) {
        auto close = s.find(close_marker);
        if (close != std::string::npos)
            s = trim(s.substr(close + close_marker.size()));
    }
    if (s.rfind("```", 0) == 0) {
        auto nl = s.find('\n');
        if (nl != std::string::npos && s.size() >= 3 &&
            s.compare(s.size() - 3, 3, "```") == 0) {
            s = trim(s.substr(nl + 1, s.size() - nl - 1 - 3));
        }
    }
    return s;
}

namespace {

/// First balanced top-level JSON object, string-and-escape aware.
json first_object(const std::string& text) {
    std::size_t start = 0;
    while ((start = text.find('{', start)) != std::string::npos) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                if (--depth == 0) {
                    try {
                        return json::parse(text.substr(start, i - start + 1));
                    } catch (const json::parse_error&) {
                        break;  // try the next candidate opening brace
                    }
                }
            }
        }
        ++start;
    }
    throw NoObjectFound("no balanced JSON object in model output");
}

json extract(const std::string& raw) { return first_object(strip_reasoning(raw)); }

std::string require_string(const json& j, const char* key) {
    if (!j.contains(key))
        throw SchemaViolation(std::string("missing key \"") + key + "\"");
    if (!j[key].is_string())
        throw SchemaViolation(std::string("key \"") + key + "\" is not a string");
    return j[key].get<std::string>();
}

}  // namespace

ParsedScore parse_score(const std::string& raw, const ScoreScale& scale) {
    json j = extract(raw);
    if (!j.contains("score")) throw SchemaViolation("missing key \"score\"");
    int score = 0;
    if (j["score"].is_number_integer()) {
        score = j["score"].get<int>();
    } else if (j["score"].is_string()) {
        // the template's example value is itself a string, so models echo one
        try {
            score = std::stoi(j["score"].get<std::string>());
        } catch (const std::exception&) {
            throw SchemaViolation("key \"score\" is not an integer");
        }
    } else {
        throw SchemaViolation("key \"score\" is not an integer");
    }
    if (!scale.contains(score))
        throw ScoreOutOfRange("score " + std::to_string(score) + " outside [" +
                              std::to_string(scale.min) + "," +
                              std::to_string(scale.max) + "]");
    return {score, require_string(j, "rationale")};
}

ParsedUpdate parse_update(const std::string& raw) {
    json j = extract(raw);
    ParsedUpdate out;
    out.updated_criteria = require_string(j, "updated_criteria");
    if (out.updated_criteria.empty())
        throw SchemaViolation("\"updated_criteria\" is empty");
    if (j.contains("analysis") && j["analysis"].is_string())
        out.analysis = j["analysis"].get<std::string>();
    return out;
}

ParsedVerdict parse_verdict(const std::string& raw) {
    json j = extract(raw);
    std::string winner = lower(trim(require_string(j, "winner")));
    ParsedVerdict out;
    if (winner.find("expert a") != std::string::npos || winner == "a")
        out.winner = DebateSide::ExpertA;
    else if (winner.find("expert b") != std::string::npos || winner == "b")
        out.winner = DebateSide::ExpertB;
    else
        throw SchemaViolation("winner \"" + winner + "\" is neither Expert A nor Expert B");
    out.reason = j.contains("reason") && j["reason"].is_string()
                     ? j["reason"].get<std::string>()
                     : "";
    return out;
}

ParsedRationale parse_rationale(const std::string& raw) {
    json j = extract(raw);
    return {require_string(j, "rationale")};
}

ParsedUnitLabels parse_unit_lines(const std::string& raw, TaskKind task,
                                  int unit_count) {
    if (task != TaskKind::ACD && task != TaskKind::ARI)
        throw ConfigError("parse_unit_lines: task must be ACD or ARI");

    static const std::regex acd_header(R"(^\s*#\s*(\d+)\s*:\s*(.*)$)");
    static const std::regex ari_header(
        R"(^\s*#\s*(\d+)\s*->\s*#\s*(\d+)\s*:\s*(.*)$)");

    ParsedUnitLabels out;
    out.task = task;

    std::string text = strip_reasoning(raw);
    std::istringstream in(text);
    std::string line;

    if (task == TaskKind::ACD) {
        std::set<int> seen;
        UnitLabel current;
        bool open = false, have_label = false;
        auto flush = [&]() {
            if (!open) return;
            if (seen.insert(current.index).second) {
                out.units.push_back(current);
            } else {
                out.warnings.push_back("duplicate record for unit #" +
                                       std::to_string(current.index) + " dropped");
            }
            open = false;
        };
        while (std::getline(in, line)) {
            std::smatch m;
            if (std::regex_match(line, m, acd_header)) {
                flush();
                current = UnitLabel{};
                current.index = std::stoi(m[1]);
                open = true;
                have_label = false;
                std::string rest = trim(m[2]);
                if (!rest.empty()) {
                    current.label = rest;
                    have_label = true;
                }
                continue;
            }
            std::string t = trim(line);
            if (t.empty()) continue;
            if (t[0] == '#')
                throw UnparseableRecord("unparseable record line: " + t);
            if (!open) continue;  // leading chatter
            if (!have_label) {
                current.label = t;
                have_label = true;
            } else if (current.explanation.empty()) {
                current.explanation = t;
            } else {
                current.explanation += " " + t;
            }
        }
        flush();
        for (int i = 1; i <= unit_count; ++i)
            if (!seen.count(i)) out.missing_units.push_back(i);
    } else {
        std::set<std::pair<int, int>> seen;
        RelationPrediction current;
        bool open = false;
        auto flush = [&]() {
            if (!open) return;
            auto key = std::make_pair(current.triple.from_index,
                                      current.triple.to_index);
            if (seen.insert(key).second) {
                out.relations.push_back(current);
            } else {
                out.warnings.push_back(
                    "duplicate record for pair #" + std::to_string(key.first) +
                    " -> #" + std::to_string(key.second) + " dropped");
            }
            open = false;
        };
        while (std::getline(in, line)) {
            std::smatch m;
            if (std::regex_match(line, m, ari_header)) {
                flush();
                current = RelationPrediction{};
                current.triple.from_index = std::stoi(m[1]);
                current.triple.to_index = std::stoi(m[2]);
                std::string types = m[3];
                std::istringstream ts(types);
                std::string ty;
                while (std::getline(ts, ty, ',')) {
                    ty = trim(ty);
                    if (!ty.empty()) current.triple.types.insert(ty);
                }
                if (current.triple.types.empty())
                    throw UnparseableRecord("ARI record without types: " + trim(line));
                open = true;
                continue;
            }
            std::string t = trim(line);
            if (t.empty()) continue;
            if (t[0] == '#')
                throw UnparseableRecord("unparseable record line: " + t);
            if (!open) continue;
            if (current.explanation.empty()) current.explanation = t;
            else current.explanation += " " + t;
        }
        flush();
        (void)unit_count;
    }
    return out;
}

std::string format_unit_lines(const ParsedUnitLabels& parsed) {
    std::ostringstream os;
    if (parsed.task == TaskKind::ACD) {
        for (const auto& u : parsed.units) {
            os << "#" << u.index << ":\n" << u.label << "\n";
            if (!u.explanation.empty()) os << u.explanation << "\n";
            os << "\n";
        }
    } else {
        for (const auto& r : parsed.relations) {
            os << "#" << r.triple.from_index << " -> #" << r.triple.to_index << ": ";
            bool first = true;
            for (const auto& t : r.triple.types) {
                if (!first) os << ", ";
                os << t;
                first = false;
            }
            os << "\n";
            if (!r.explanation.empty()) os << r.explanation << "\n";
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace tide
