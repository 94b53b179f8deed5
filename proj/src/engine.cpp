#include "tide/engine.hpp"

#include <algorithm>
#include <climits>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tide {

using nlohmann::json;
namespace fs = std::filesystem;

std::map<Role, RoleBinding> default_roles() {
    std::map<Role, RoleBinding> roles;
    roles[Role::Guider] = {Role::Guider, "mock", 1.0};    // diverse trial candidates
    roles[Role::Solver] = {Role::Solver, "mock", 0.7};
    roles[Role::Judge] = {Role::Judge, "mock", 0.0};      // verdict stability
    roles[Role::Explainer] = {Role::Explainer, "mock", 0.7};
    return roles;
}

RoleBinding RunConfig::role(Role r) const {
    auto it = roles.find(r);
    if (it == roles.end()) throw ConfigError("no binding for role " + to_string(r));
    return it->second;
}

void RunConfig::validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (iteration_budget < 1) throw ConfigError("iteration_budget must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (repair_budget < 0) throw ConfigError("repair_budget must be >= 0");
    if (scale.min >= scale.max) throw ConfigError("score scale must have min < max");
    for (Role r : {Role::Guider, Role::Solver, Role::Judge, Role::Explainer})
        if (!roles.count(r)) throw ConfigError("missing role binding: " + to_string(r));
}

std::string to_string(IterationOutcome o) {
    switch (o) {
        case IterationOutcome::SkipNoError: return "skip-no-error";
        case IterationOutcome::SkipDebateWin: return "skip-debate-win";
        case IterationOutcome::Update: return "update";
        case IterationOutcome::NoCandidatesFlag: return "no-candidates";
    }
    return "?";
}

IterationOutcome outcome_from_string(const std::string& s) {
    if (s == "skip-no-error") return IterationOutcome::SkipNoError;
    if (s == "skip-debate-win") return IterationOutcome::SkipDebateWin;
    if (s == "update") return IterationOutcome::Update;
    if (s == "no-candidates") return IterationOutcome::NoCandidatesFlag;
    throw ConfigError("unknown outcome: " + s);
}

std::string output_format_text(TaskKind task) {
    if (task == TaskKind::ARI)
        return "#{from index} -> #{to index}: {Relation Type}{, {Relation Type}}\n\n"
               "{A one-line explanation and justification for this relation}\n\n"
               "List one record per related chunk pair and nothing else.";
    return "#{Sentence Number}:\n\n{Category of the argument component}\n\n"
           "{A one-line explanation and justification for the categorization "
           "of this sentence}";
}

std::string IterationRecord::to_json() const {
    json j;
    j["iteration"] = iteration;
    j["batch_sample_ids"] = batch_sample_ids;
    j["discrepancies"] = discrepancies;
    j["selected_sample_id"] = selected_sample_id;
    j["outcome"] = tide::to_string(outcome);
    j["debate_held"] = debate_held;
    if (verdict) {
        j["verdict"] = {{"winner", verdict->winner == DebateWinner::Prediction
                                       ? "prediction"
                                       : "gold"},
                        {"reason", verdict->reason},
                        {"judge_failed", verdict->judge_failed}};
    }
    if (!trial_errors.empty()) {
        json trials = json::array();
        for (const auto& [idx, err] : trial_errors)
            trials.push_back({{"index", idx}, {"batch_error", err}});
        j["trials"] = trials;
    }
    if (chosen_index) j["chosen_index"] = *chosen_index;
    j["criteria_version_after"] = criteria_version_after;
    j["criteria_length_after"] = criteria_length_after;
    j["token_delta"] = token_delta;
    return j.dump();
}

IterationRecord IterationRecord::from_json(const std::string& line) {
    json j = json::parse(line);
    IterationRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.batch_sample_ids = j.at("batch_sample_ids").get<std::vector<std::string>>();
    r.discrepancies = j.at("discrepancies").get<std::vector<int>>();
    r.selected_sample_id = j.at("selected_sample_id").get<std::string>();
    r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    r.debate_held = j.at("debate_held").get<bool>();
    if (j.contains("verdict")) {
        DebateVerdict v;
        v.winner = j["verdict"].at("winner").get<std::string>() == "prediction"
                       ? DebateWinner::Prediction
                       : DebateWinner::Gold;
        v.reason = j["verdict"].value("reason", "");
        v.judge_failed = j["verdict"].value("judge_failed", false);
        v.iteration = r.iteration;
        v.sample_id = r.selected_sample_id;
        r.verdict = v;
    }
    if (j.contains("trials"))
        for (const auto& t : j["trials"])
            r.trial_errors.emplace_back(t.at("index").get<int>(),
                                        t.at("batch_error").get<long>());
    if (j.contains("chosen_index")) r.chosen_index = j["chosen_index"].get<int>();
    r.criteria_version_after = j.at("criteria_version_after").get<int>();
    r.criteria_length_after = j.at("criteria_length_after").get<std::size_t>();
    r.token_delta = j.value("token_delta", 0L);
    return r;
}

Engine::Engine(RunConfig config, Gateway& gateway, const TemplateStore& templates)
    : config_(std::move(config)), gateway_(gateway), templates_(templates) {
    config_.validate();
}

std::string Engine::essay_input_text(const Sample& sample) const {
    switch (sample.task) {
        case TaskKind::AES:
            return sample.essay.text;
        case TaskKind::ACD: {
            std::ostringstream os;
            for (std::size_t i = 0; i < sample.essay.units.size(); ++i)
                os << "#" << i + 1 << ": " << sample.essay.units[i] << "\n";
            return os.str();
        }
        case TaskKind::ARI: {
            std::ostringstream os;
            for (const auto& c : sample.essay.chunks)
                os << "#" << c.index << " (" << c.component << "): " << c.text << "\n";
            return os.str();
        }
    }
    return {};
}

CompletionRequest Engine::make_request(Role role, Phase phase,
                                       const std::string& prompt,
                                       const std::string& schema,
                                       const Sample* sample) const {
    CompletionRequest req;
    req.role = role;
    req.phase = phase;
    req.messages = {{"user", prompt}};
    req.schema = schema;
    req.task = config_.task;
    req.scale = config_.scale;
    req.label_set = config_.label_set;
    if (sample) {
        req.unit_count = config_.task == TaskKind::ARI
                             ? static_cast<int>(sample->essay.chunks.size())
                             : static_cast<int>(sample->essay.units.size());
    }
    return req;
}

std::string Engine::render_predict_prompt(const Criteria& criteria,
                                          const Sample& sample) const {
    if (config_.task == TaskKind::AES) {
        return templates_.render("aes_predict",
                                 {{"essay_text", essay_input_text(sample)},
                                  {"current_criteria", criteria.text},
                                  {"score_min", std::to_string(config_.scale.min)},
                                  {"score_max", std::to_string(config_.scale.max)}});
    }
    return templates_.render("acd_ari_predict",
                             {{"task_name", config_.task_name},
                              {"task_description", config_.task_description},
                              {"labels", config_.labels},
                              {"essay_text", essay_input_text(sample)},
                              {"current_criteria", criteria.text},
                              {"output_format", output_format_text(config_.task)}});
}

Criteria Engine::init_criteria() {
    std::string prompt = templates_.render(
        "init_criteria", {{"task_name", config_.task_name},
                          {"task_description", config_.task_description},
                          {"demos", config_.demos.empty()
                                        ? "(no demonstrations provided)"
                                        : config_.demos}});
    auto resp = gateway_.complete(config_.role(Role::Guider),
                                  make_request(Role::Guider, Phase::Init, prompt,
                                               "criteria", nullptr));
    Criteria c;
    c.task = config_.task;
    c.text = strip_reasoning(resp.text);
    c.version = 0;
    c.origin = CriteriaOrigin::Initial;
    if (c.text.empty()) throw ResponseEmpty("Guider returned empty initial criteria");
    return c;
}

Prediction Engine::predict(const Criteria& criteria, const Sample& sample,
                           Phase phase) {
    if (criteria.task != sample.task)
        throw TaskMismatch("criteria task " + to_string(criteria.task) +
                           " vs sample task " + to_string(sample.task));

    std::string prompt = render_predict_prompt(criteria, sample);
    auto req = make_request(Role::Solver, phase, prompt,
                            config_.task == TaskKind::AES ? "score" : "unit_lines",
                            &sample);

    Prediction pred;
    pred.task = config_.task;
    for (int attempt = 0; attempt <= config_.repair_budget; ++attempt) {
        auto resp = gateway_.complete(config_.role(Role::Solver), req);
        try {
            if (config_.task == TaskKind::AES) {
                auto parsed = parse_score(resp.text, config_.scale);
                pred.score = parsed.score;
                pred.rationale = parsed.rationale;
            } else {
                auto parsed = parse_unit_lines(resp.text, config_.task, req.unit_count);
                pred.unit_labels = parsed.units;
                pred.relations = parsed.relations;
            }
            return pred;
        } catch (const NoObjectFound&) {
        } catch (const SchemaViolation&) {
        } catch (const ScoreOutOfRange&) {
        } catch (const UnparseableRecord&) {
        }
    }
    pred.valid = false;  // discrepancy falls back to the task maximum
    return pred;
}

DebateVerdict Engine::run_debate(const Sample& sample, const Prediction& prediction,
                                 int iteration) {
    DebateVerdict verdict;
    verdict.sample_id = sample.essay.id;
    verdict.iteration = iteration;

    // Expert A: the Solver's own rationale from prediction time.
    std::string expert_a;
    if (config_.task == TaskKind::AES) {
        expert_a = prediction.rationale;
    } else {
        ParsedUnitLabels p;
        p.task = config_.task;
        p.units = prediction.unit_labels;
        p.relations = prediction.relations;
        expert_a = format_unit_lines(p);
    }
    if (expert_a.empty()) expert_a = "(no parseable rationale was produced)";

    // Expert B: an Explainer-fabricated speech for the gold label.
    std::string expert_b;
    try {
        if (config_.task == TaskKind::AES) {
            std::string prompt = templates_.render(
                "explain_gold_aes",
                {{"score_min", std::to_string(config_.scale.min)},
                 {"score_max", std::to_string(config_.scale.max)},
                 {"gold_score", std::to_string(sample.gold.score)},
                 {"essay_text", essay_input_text(sample)}});
            auto req = make_request(Role::Explainer, Phase::Explain, prompt,
                                    "rationale", &sample);
            bool parsed_ok = false;
            for (int attempt = 0; attempt <= config_.repair_budget && !parsed_ok;
                 ++attempt) {
                auto resp = gateway_.complete(config_.role(Role::Explainer), req);
                try {
                    expert_b = parse_rationale(resp.text).rationale;
                    parsed_ok = true;
                } catch (const NoObjectFound&) {
                } catch (const SchemaViolation&) {
                }
            }
            if (!parsed_ok) throw SchemaViolation("explainer output unparseable");
        } else {
            std::ostringstream labeled;
            if (config_.task == TaskKind::ACD) {
                for (std::size_t i = 0; i < sample.gold.labels.size(); ++i)
                    labeled << "#" << i + 1 << ": " << sample.gold.labels[i] << "\n";
            } else {
                for (const auto& t : sample.gold.relations) {
                    labeled << "#" << t.from_index << " -> #" << t.to_index << ": ";
                    bool first = true;
                    for (const auto& ty : t.types) {
                        if (!first) labeled << ", ";
                        labeled << ty;
                        first = false;
                    }
                    labeled << "\n";
                }
            }
            std::string prompt = templates_.render(
                "explain_gold_acd_ari",
                {{"task_description", config_.task_description},
                 {"task_name", config_.task_name},
                 {"essay_text", essay_input_text(sample)},
                 {"labeled_units", labeled.str()},
                 {"output_format", output_format_text(config_.task)}});
            auto resp = gateway_.complete(
                config_.role(Role::Explainer),
                make_request(Role::Explainer, Phase::Explain, prompt, "unit_lines",
                             &sample));
            expert_b = strip_reasoning(resp.text);
        }

        std::string judge_prompt = templates_.render(
            "debate_judge", {{"task_name", config_.task_name},
                             {"standards", config_.standards},
                             {"expert_a", expert_a},
                             {"expert_b", expert_b}});
        auto req = make_request(Role::Judge, Phase::Debate, judge_prompt, "verdict",
                                &sample);
        for (int attempt = 0; attempt <= config_.repair_budget; ++attempt) {
            auto resp = gateway_.complete(config_.role(Role::Judge), req);
            try {
                auto parsed = parse_verdict(resp.text);
                verdict.winner = parsed.winner == DebateSide::ExpertA
                                     ? DebateWinner::Prediction
                                     : DebateWinner::Gold;
                verdict.reason = parsed.reason;
                return verdict;
            } catch (const NoObjectFound&) {
            } catch (const SchemaViolation&) {
            }
        }
        throw SchemaViolation("judge output unparseable");
    } catch (const NoObjectFound&) {
    } catch (const SchemaViolation&) {
    } catch (const UnparseableRecord&) {
    }
    // fail toward updating: a flaky judge degrades to the criteria-based loop
    verdict.winner = DebateWinner::Gold;
    verdict.judge_failed = true;
    verdict.reason = "judge/explainer failure after repair budget";
    return verdict;
}

std::vector<TrialCandidate> Engine::generate_trials(const Criteria& criteria,
                                                    const Sample& sample,
                                                    const Prediction& prediction) {
    std::string prompt;
    if (config_.task == TaskKind::AES) {
        prompt = templates_.render(
            "aes_update",
            {{"current_criteria", criteria.text},
             {"essay_text", essay_input_text(sample)},
             {"pred_rationale", prediction.valid ? prediction.rationale
                                                 : "(no parseable rationale)"},
             {"pred_score", prediction.valid ? std::to_string(prediction.score)
                                             : "(no parseable score)"},
             {"gold_score", std::to_string(sample.gold.score)},
             {"score_max", std::to_string(config_.scale.max)}});
    } else {
        std::ostringstream pred_list;
        if (config_.task == TaskKind::ACD) {
            std::map<int, const UnitLabel*> by_index;
            for (const auto& u : prediction.unit_labels) by_index.emplace(u.index, &u);
            for (std::size_t i = 0; i < sample.gold.labels.size(); ++i) {
                int idx = static_cast<int>(i) + 1;
                auto it = by_index.find(idx);
                const std::string pred_label =
                    it == by_index.end() ? "(missing)" : it->second->label;
                if (it != by_index.end() && pred_label == sample.gold.labels[i])
                    continue;  // only the wrong units of this one sample
                pred_list << "sentence_index: " << idx << "\n"
                          << "pred_label: " << pred_label << "\n"
                          << "pred_explanation: "
                          << (it == by_index.end() ? "(none)" : it->second->explanation)
                          << "\n"
                          << "gold_label: " << sample.gold.labels[i] << "\n\n";
            }
        } else {
            auto gold_pairs = triples_by_pair(sample.gold.relations);
            std::vector<RelationTriple> pred_triples;
            for (const auto& r : prediction.relations) pred_triples.push_back(r.triple);
            auto pred_pairs = triples_by_pair(pred_triples);
            auto join = [](const std::set<std::string>& s) {
                std::string out;
                for (const auto& t : s) out += (out.empty() ? "" : ", ") + t;
                return out.empty() ? "(none)" : out;
            };
            for (const auto& r : prediction.relations) {
                auto key = std::make_pair(r.triple.from_index, r.triple.to_index );
                auto it = gold_pairs.find(key);
                if (it != gold_pairs.end() && it->second == r.triple.types) continue;
                pred_list << "pair: #" << key.first << " -> #" << key.second << "\n"
                          << "pred_types: " << join(r.triple.types) << "\n"
                          << "pred_explanation: " << r.explanation << "\n"
                          << "gold_types: "
                          << (it == gold_pairs.end() ? "(no relation)"
                                                     : join(it->second))
                          << "\n\n";
            }
            for (const auto& [key, types] : gold_pairs) {
                if (pred_pairs.count(key)) continue;
                pred_list << "pair: #" << key.first << " -> #" << key.second << "\n"
                          << "pred_types: (none)\n"
                          << "pred_explanation: (relation not predicted)\n"
                          << "gold_types: " << join(types) << "\n\n";
            }
        }
        prompt = templates_.render("acd_ari_update",
                                   {{"task_name", config_.task_name},
                                    {"task_description", config_.task_description},
                                    {"labels", config_.labels},
                                    {"current_criteria", criteria.text},
                                    {"essay_text", essay_input_text(sample)},
                                    {"pred_list", pred_list.str()}});
    }

    std::vector<TrialCandidate> candidates;
    for (int k = 0; k < config_.trials; ++k) {
        auto req = make_request(Role::Guider, Phase::Update, prompt, "update", &sample);
        bool ok = false;
        ParsedUpdate parsed;
        for (int attempt = 0; attempt <= config_.repair_budget && !ok; ++attempt) {
            auto resp = gateway_.complete(config_.role(Role::Guider), req);
            try {
                parsed = parse_update(resp.text);
                ok = true;
            } catch (const NoObjectFound&) {
            } catch (const SchemaViolation&) {
            }
        }
        if (!ok) continue;  // failed candidates are dropped, not fatal
        TrialCandidate cand;
        cand.index = k;
        cand.candidate.task = config_.task;
        cand.candidate.text = parsed.updated_criteria;
        cand.candidate.analysis = parsed.analysis;
        cand.candidate.origin = CriteriaOrigin::TrialWinner;
        candidates.push_back(std::move(cand));
    }
    return candidates;
}

std::size_t Engine::select_best_trial(std::vector<TrialCandidate>& candidates,
                                      const std::vector<Sample>& batch) {
    if (candidates.empty()) throw NoCandidates("no candidates to select from");

    for (auto& cand : candidates) {
        try {
            std::vector<Prediction> preds;
            preds.reserve(batch.size());
            for (const auto& s : batch)
                preds.push_back(predict(cand.candidate, s, Phase::TrialEval));
            cand.batch_error = batch_discrepancy(batch, preds, config_.discrepancy,
                                                 config_.scale);
        } catch (const BackendUnavailable&) {
            cand.batch_error = LONG_MAX;  // sentinel: cannot win
            cand.evaluable = false;
        }
    }

    std::size_t best = candidates.size();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!candidates[i].evaluable) continue;
        if (best == candidates.size() ||
            candidates[i].batch_error < candidates[best].batch_error)
            best = i;  // first minimum wins ties (candidates are index-ordered)
    }
    if (best == candidates.size())
        throw NoCandidates("every candidate was unevaluable");
    return best;
}

IterationRecord Engine::run_iteration(Criteria& criteria, int iteration,
                                      const std::vector<Sample>& batch) {
    IterationRecord rec;
    rec.iteration = iteration;
    long tokens_before = gateway_.ledger().grand_total();

    std::vector<Prediction> preds;
    preds.reserve(batch.size());
    for (const auto& s : batch) {
        rec.batch_sample_ids.push_back(s.essay.id);
        preds.push_back(predict(criteria, s));
    }
    for (std::size_t i = 0; i < batch.size(); ++i)
        rec.discrepancies.push_back(
            sample_discrepancy(batch[i], preds[i], config_.discrepancy, config_.scale));

    auto finish = [&]() {
        rec.criteria_version_after = criteria.version;
        rec.criteria_length_after = criteria_length(criteria);
        rec.token_delta = gateway_.ledger().grand_total() - tokens_before;
        return rec;
    };

    int max_d = *std::max_element(rec.discrepancies.begin(), rec.discrepancies.end());
    if (max_d == 0) {
        rec.outcome = IterationOutcome::SkipNoError;
        return finish();
    }

    // argmax sample, ties to the lowest batch position
    std::size_t sel = 0;
    for (std::size_t i = 1; i < batch.size(); ++i)
        if (rec.discrepancies[i] > rec.discrepancies[sel]) sel = i;
    rec.selected_sample_id = batch[sel].essay.id;

    if (config_.debate_enabled) {
        rec.debate_held = true;
        rec.verdict = run_debate(batch[sel], preds[sel], iteration);
        bool prediction_won = rec.verdict->winner == DebateWinner::Prediction;
        bool proceed = config_.inverted_gate ? prediction_won : !prediction_won;
        if (!proceed) {
            rec.outcome = IterationOutcome::SkipDebateWin;
            return finish();
        }
    }

    auto candidates = generate_trials(criteria, batch[sel], preds[sel]);
    if (config_.include_incumbent_in_trials) {
        TrialCandidate incumbent;
        incumbent.index = -1;
        incumbent.candidate = criteria;
        candidates.insert(candidates.begin(), incumbent);
    }
    if (candidates.empty() ||
        (config_.include_incumbent_in_trials && candidates.size() == 1)) {
        rec.outcome = IterationOutcome::NoCandidatesFlag;
        return finish();
    }

    std::size_t best;
    try {
        best = select_best_trial(candidates, batch);
    } catch (const NoCandidates&) {
        rec.outcome = IterationOutcome::NoCandidatesFlag;
        return finish();
    }
    for (const auto& c : candidates)
        rec.trial_errors.emplace_back(c.index, c.batch_error);
    rec.chosen_index = candidates[best].index;

    if (candidates[best].index == -1) {
        // the incumbent held its ground; no version bump
        rec.outcome = IterationOutcome::Update;
        return finish();
    }

    Criteria next = candidates[best].candidate;
    next.version = criteria.version + 1;
    next.parent_version = criteria.version;
    criteria = std::move(next);
    rec.outcome = IterationOutcome::Update;
    return finish();
}

namespace {

json criteria_to_json(const Criteria& c) {
    json j;
    j["task"] = to_string(c.task);
    j["text"] = c.text;
    j["version"] = c.version;
    if (c.parent_version) j["parent_version"] = *c.parent_version;
    j["origin"] = c.origin == CriteriaOrigin::Initial ? "initial" : "trial_winner";
    j["analysis"] = c.analysis;
    return j;
}

Criteria criteria_from_json(const json& j) {
    Criteria c;
    c.task = task_from_string(j.at("task").get<std::string>());
    c.text = j.at("text").get<std::string>();
    c.version = j.at("version").get<int>();
    if (j.contains("parent_version")) c.parent_version = j["parent_version"].get<int>();
    c.origin = j.value("origin", "initial") == "initial" ? CriteriaOrigin::Initial
                                                         : CriteriaOrigin::TrialWinner;
    c.analysis = j.value("analysis", "");
    return c;
}

void restore_ledger(TokenLedger& ledger, const std::string& json_text) {
    TokenLedger saved = TokenLedger::from_json(json_text);
    for (const auto& row : saved.report()) {
        if (row.role == "total") continue;
        ledger.record(role_from_string(row.role), phase_from_string(row.phase),
                      {row.prompt_tokens, row.completion_tokens});
    }
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MissingLog("cannot open " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

}  // namespace

RunArtifacts Engine::optimize(const Dataset& train, const std::string& run_dir,
                              bool resume, std::optional<int> stop_after) {
    if (train.samples.empty()) throw EmptySplit("training dataset is empty");
    if (train.task != config_.task)
        throw TaskMismatch("training dataset task does not match config");

    fs::create_directories(run_dir);
    fs::create_directories(fs::path(run_dir) / "checkpoints");
    const fs::path state_path = fs::path(run_dir) / "state.json";
    const fs::path log_path = fs::path(run_dir) / "iterations.jsonl";

    Criteria criteria;
    int start_iteration = 0;

    if (resume) {
        if (!fs::exists(state_path))
            throw MissingLog("cannot resume: no state.json in " + run_dir);
        json state = json::parse(read_file(state_path));
        criteria = criteria_from_json(state.at("criteria"));
        start_iteration = state.at("iteration").get<int>();
        restore_ledger(gateway_.ledger(), state.at("ledger").get<std::string>());
        // drop any log records past the persisted state (crash mid-iteration)
        if (fs::exists(log_path)) {
            std::istringstream in(read_file(log_path));
            std::string line, kept;
            int count = 0;
            while (std::getline(in, line) && count < start_iteration) {
                if (line.empty()) continue;
                kept += line + "\n";
                ++count;
            }
            write_file(log_path, kept);
        }
    } else {
        json snapshot;
        snapshot["task"] = to_string(config_.task);
        snapshot["trials"] = config_.trials;
        snapshot["batch_size"] = config_.batch_size;
        snapshot["iteration_budget"] = config_.iteration_budget;
        snapshot["checkpoint_every"] = config_.checkpoint_every;
        snapshot["debate_enabled"] = config_.debate_enabled;
        snapshot["inverted_gate"] = config_.inverted_gate;
        snapshot["include_incumbent_in_trials"] = config_.include_incumbent_in_trials;
        snapshot["seed"] = config_.seed;
        snapshot["ari_penalty"] = config_.discrepancy.ari_penalty;
        snapshot["scale"] = {{"min", config_.scale.min}, {"max", config_.scale.max}};
        write_file(fs::path(run_dir) / "config.json", snapshot.dump(2) + "\n");

        criteria = init_criteria();
        write_file(fs::path(run_dir) / "c0.txt", criteria.text);
        write_file(log_path, "");
        json state;
        state["iteration"] = 0;
        state["criteria"] = criteria_to_json(criteria);
        state["ledger"] = gateway_.ledger().to_json();
        write_file(state_path, state.dump());
    }

    BatchCycler cycler(train, config_.batch_size);
    RunArtifacts artifacts;

    int last = stop_after ? std::min(*stop_after, config_.iteration_budget)
                          : config_.iteration_budget;
    for (int i = start_iteration + 1; i <= last; ++i) {
        auto batch = cycler.batch(i);
        IterationRecord rec = run_iteration(criteria, i, batch);

        {
            std::ofstream log(log_path, std::ios::app);
            log << rec.to_json() << "\n";
            log.flush();
        }
        if (i % config_.checkpoint_every == 0) {
            std::ostringstream name;
            name << "iter_" << i << ".txt";
            fs::path cp = fs::path(run_dir) / "checkpoints" / name.str();
            write_file(cp, criteria.text);
            artifacts.checkpoint_paths.push_back(cp.string());
        }
        json state;
        state["iteration"] = i;
        state["criteria"] = criteria_to_json(criteria);
        state["ledger"] = gateway_.ledger().to_json();
        write_file(state_path, state.dump());
    }

    // read the full log back so a resumed run reports every record
    if (fs::exists(log_path)) {
        std::istringstream in(read_file(log_path));
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) artifacts.records.push_back(IterationRecord::from_json(line));
    }
    artifacts.final_criteria = criteria;

    if (last >= config_.iteration_budget) {
        write_file(fs::path(run_dir) / "final_criteria.txt", criteria.text);
        write_file(fs::path(run_dir) / "ledger.json", gateway_.ledger().to_json());
    }
    return artifacts;
}

MetricsReport Engine::evaluate(const Criteria& criteria, const Dataset& eval) {
    if (eval.task != config_.task)
        throw TaskMismatch("eval dataset task does not match config");

    MetricsReport report;
    report.task = config_.task;
    report.n = eval.samples.size();

    std::size_t failures = 0;
    std::vector<int> gold_scores, pred_scores;
    std::vector<std::string> gold_labels, pred_labels;
    std::vector<std::vector<RelationTriple>> gold_rel, pred_rel;

    for (const auto& sample : eval.samples) {
        Prediction pred = predict(criteria, sample);
        if (!pred.valid) ++failures;
        switch (config_.task) {
            case TaskKind::AES: {
                gold_scores.push_back(sample.gold.score);
                int p;
                if (pred.valid) {
                    p = pred.score;
                } else {
                    // max-discrepancy convention: the endpoint farthest from gold
                    int mid = (config_.scale.min + config_.scale.max) / 2;
                    p = sample.gold.score <= mid ? config_.scale.max : config_.scale.min;
                }
                pred_scores.push_back(p);
                break;
            }
            case TaskKind::ACD: {
                std::map<int, std::string> by_index;
                if (pred.valid)
                    for (const auto& u : pred.unit_labels) by_index[u.index] = u.label;
                for (std::size_t i = 0; i < sample.gold.labels.size(); ++i) {
                    gold_labels.push_back(sample.gold.labels[i]);
                    auto it = by_index.find(static_cast<int>(i) + 1);
                    pred_labels.push_back(it == by_index.end() ? "<none>" : it->second);
                }
                break;
            }
            case TaskKind::ARI: {
                gold_rel.push_back(sample.gold.relations);
                std::vector<RelationTriple> triples;
                if (pred.valid)
                    for (const auto& r : pred.relations) triples.push_back(r.triple);
                pred_rel.push_back(std::move(triples));
                break;
            }
        }
    }
    report.parse_failure_rate =
        eval.samples.empty() ? 0.0
                             : static_cast<double>(failures) / eval.samples.size();

    switch (config_.task) {
        case TaskKind::AES: {
            std::vector<int> g1, p1;
            for (int g : gold_scores) g1.push_back(g - config_.scale.min + 1);
            for (int p : pred_scores) p1.push_back(p - config_.scale.min + 1);
            bool degenerate = false;
            report.qwk = qwk(g1, p1, config_.scale.class_count(), &degenerate);
            report.qwk_degenerate = degenerate;
            std::vector<double> gd(gold_scores.begin(), gold_scores.end());
            std::vector<double> pd(pred_scores.begin(), pred_scores.end());
            bool undefined = false;
            report.pearson = pearson(gd, pd, &undefined);
            report.pearson_undefined = undefined;
            break;
        }
        case TaskKind::ACD: {
            auto [micro, macro] = classification_f1(gold_labels, pred_labels);
            report.micro_f1 = micro;
            report.macro_f1 = macro;
            break;
        }
        case TaskKind::ARI: {
            AriF1 f = ari_f1(gold_rel, pred_rel);
            report.micro_f1 = f.micro;
            report.macro_f1 = f.macro;
            report.ari_pair_precision = f.pair_precision;
            report.ari_pair_recall = f.pair_recall;
            report.ari_pair_f1 = f.pair_f1;
            break;
        }
    }
    return report;
}

}  // namespace tide
