#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tide/dataset.hpp"
#include "tide/discrepancy.hpp"
#include "tide/gateway.hpp"
#include "tide/metrics.hpp"
#include "tide/prompting.hpp"
#include "tide/task_model.hpp"

namespace tide {

struct RunConfig {
    TaskKind task = TaskKind::AES;
    int trials = 1;                  // T candidate updates per adopted step
    int batch_size = 2;
    int iteration_budget = 240;
    int checkpoint_every = 30;
    bool debate_enabled = true;
    bool inverted_gate = false;      // update only when the prediction wins
    bool include_incumbent_in_trials = false;
    int repair_budget = 2;           // re-prompts after a parse failure
    std::uint32_t seed = 42;
    DiscrepancyConfig discrepancy;
    ScoreScale scale;

    std::string task_name;           // human name bound into templates
    std::string task_description;
    std::string labels;              // label list text (ACD/ARI)
    std::vector<std::string> label_set;  // parsed label names, mock hints
    std::string standards;           // debate reference standards
    std::string demos;               // rendered in-context demonstrations

    std::map<Role, RoleBinding> roles;

    RoleBinding role(Role r) const;
    void validate() const;
};

/// Default bindings: Solver 0.7, Guider 1.0, Judge 0.0, Explainer 0.7.
std::map<Role, RoleBinding> default_roles();

enum class IterationOutcome { SkipNoError, SkipDebateWin, Update, NoCandidatesFlag };

std::string to_string(IterationOutcome o);
IterationOutcome outcome_from_string(const std::string& s);

enum class DebateWinner { Prediction, Gold };

struct DebateVerdict {
    DebateWinner winner = DebateWinner::Gold;
    std::string reason;
    std::string sample_id;
    int iteration = 0;
    bool judge_failed = false;  // parse/gateway failure, defaulted to Gold
};

struct TrialCandidate {
    Criteria candidate;
    int index = 0;          // generation index; -1 marks the incumbent
    long batch_error = -1;  // discrepancy on the triggering batch
    bool evaluable = true;
};

struct IterationRecord {
    int iteration = 0;
    std::vector<std::string> batch_sample_ids;
    std::vector<int> discrepancies;
    std::string selected_sample_id;
    IterationOutcome outcome = IterationOutcome::SkipNoError;
    bool debate_held = false;
    std::optional<DebateVerdict> verdict;
    std::vector<std::pair<int, long>> trial_errors;  // (index, batch_error)
    std::optional<int> chosen_index;
    int criteria_version_after = 0;
    std::size_t criteria_length_after = 0;
    long token_delta = 0;

    std::string to_json() const;
    static IterationRecord from_json(const std::string& line);
};

struct RunArtifacts {
    Criteria final_criteria;
    std::vector<IterationRecord> records;
    std::vector<std::string> checkpoint_paths;
};

/// The optimization loop: predict -> debate-gate -> multi-trial update, with
/// incremental persistence so a killed run resumes from its run directory.
class Engine {
public:
    Engine(RunConfig config, Gateway& gateway, const TemplateStore& templates);

    Criteria init_criteria();
    Prediction predict(const Criteria& criteria, const Sample& sample,
                       Phase phase = Phase::Predict);
    DebateVerdict run_debate(const Sample& sample, const Prediction& prediction,
                             int iteration);
    std::vector<TrialCandidate> generate_trials(const Criteria& criteria,
                                                const Sample& sample,
                                                const Prediction& prediction);
    /// Re-predicts the full batch per candidate, fills batch_error, and
    /// returns the argmin (ties to lowest index; the incumbent, index -1,
    /// wins ties when included).
    std::size_t select_best_trial(std::vector<TrialCandidate>& candidates,
                                  const std::vector<Sample>& batch);

    IterationRecord run_iteration(Criteria& criteria, int iteration,
                                  const std::vector<Sample>& batch);

    /// Full run over cycling batches. `run_dir` receives the config snapshot,
    /// iteration log, checkpoints, and resume state. `resume` continues from
    /// the persisted state; `stop_after` caps this session (crash simulation
    /// and partial runs).
    RunArtifacts optimize(const Dataset& train, const std::string& run_dir,
                          bool resume = false,
                          std::optional<int> stop_after = std::nullopt);

    MetricsReport evaluate(const Criteria& criteria, const Dataset& eval);

    const RunConfig& config() const { return config_; }

private:
    std::string render_predict_prompt(const Criteria& criteria, const Sample& sample) const;
    std::string essay_input_text(const Sample& sample) const;
    CompletionRequest make_request(Role role, Phase phase, const std::string& prompt,
                                   const std::string& schema, const Sample* sample) const;

    RunConfig config_;
    Gateway& gateway_;
    const TemplateStore& templates_;
};

/// Line grammar the ACD/ARI predict templates instruct the model to follow.
std::string output_format_text(TaskKind task);

}  // namespace tide
