#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include "tide/engine.hpp"
#include "tide/report.hpp"

using namespace tide;

namespace {

RunConfig aes_config() {
    RunConfig cfg;
    cfg.task = TaskKind::AES;
    cfg.task_name = "essay scoring";
    cfg.task_description = "scoring argumentative essays on a 1-5 scale";
    cfg.standards = "reference standards text";
    cfg.roles = default_roles();
    cfg.iteration_budget = 10;
    return cfg;
}

Sample aes_sample(const std::string& id, int gold) {
    Sample s;
    s.task = TaskKind::AES;
    s.essay.id = id;
    s.essay.text = "essay body for " + id;
    s.gold.score = gold;
    return s;
}

Dataset aes_train(int n) {
    Dataset ds;
    ds.task = TaskKind::AES;
    for (int i = 0; i < n; ++i)
        ds.samples.push_back(aes_sample("s" + std::to_string(i), 1 + i % 5));
    return ds;
}

std::string score_json(int score) {
    return "{\"score\": " + std::to_string(score) + ", \"rationale\": \"r\"}";
}

std::string update_json(const std::string& text) {
    return "{\"updated_criteria\": \"" + text + "\", \"analysis\": \"a\"}";
}

const char* kJudgeA = R"({"winner":"Expert A","reason":"prediction holds up"})";
const char* kJudgeB = R"({"winner":"Expert B","reason":"gold explanation wins"})";
const char* kRationale = R"({"rationale":"gold-side speech"})";

struct Rig {
    std::shared_ptr<MockBackend> mock;
    Gateway gateway;
    TemplateStore templates;

    explicit Rig(bool synthetic = false)
        : mock(std::make_shared<MockBackend>(synthetic)), gateway(mock) {}
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("init_criteria stores the Guider text as version 0") {
    Rig rig;
    rig.mock->enqueue(Role::Guider, {"criteria v0"});
    Engine engine(aes_config(), rig.gateway, rig.templates);
    Criteria c = engine.init_criteria();
    CHECK(c.text == "criteria v0");
    CHECK(c.version == 0);
    CHECK(c.origin == CriteriaOrigin::Initial);
    CHECK_FALSE(c.parent_version.has_value());
}

TEST_CASE("predict parses scores and falls back to invalid after the repair budget") {
    Rig rig;
    rig.mock->enqueue(Role::Solver, {score_json(3)});
    Engine engine(aes_config(), rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "criteria", 0};

    auto sample = aes_sample("a", 3);
    auto pred = engine.predict(c, sample);
    CHECK(pred.valid);
    CHECK(pred.score == 3);
    CHECK(pred.rationale == "r");

    // repair budget 2 -> three attempts, all garbage -> invalid, max discrepancy
    rig.mock->enqueue(Role::Solver, {"junk", "junk", "junk"});
    auto bad = engine.predict(c, sample);
    CHECK_FALSE(bad.valid);
    CHECK(sample_discrepancy(sample, bad) == 4);
}

TEST_CASE("predict repairs a transiently malformed response") {
    Rig rig;
    rig.mock->enqueue(Role::Solver, {"garbage first", score_json(2)});
    Engine engine(aes_config(), rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "criteria", 0};
    auto pred = engine.predict(c, aes_sample("a", 2));
    CHECK(pred.valid);
    CHECK(pred.score == 2);
}

TEST_CASE("run_debate maps experts to winners and fails toward gold") {
    Rig rig;
    Engine engine(aes_config(), rig.gateway, rig.templates);
    auto sample = aes_sample("a", 4);
    Prediction pred;
    pred.task = TaskKind::AES;
    pred.score = 2;
    pred.rationale = "prediction rationale";

    rig.mock->enqueue(Role::Explainer, {kRationale});
    rig.mock->enqueue(Role::Judge, {kJudgeA});
    auto v1 = engine.run_debate(sample, pred, 1);
    CHECK(v1.winner == DebateWinner::Prediction);
    CHECK_FALSE(v1.judge_failed);

    rig.mock->enqueue(Role::Explainer, {kRationale});
    rig.mock->enqueue(Role::Judge, {kJudgeB});
    CHECK(engine.run_debate(sample, pred, 2).winner == DebateWinner::Gold);

    // garbage judge through the whole repair budget -> gold, flagged
    rig.mock->enqueue(Role::Explainer, {kRationale});
    rig.mock->enqueue(Role::Judge, {"??", "??", "??"});
    auto v3 = engine.run_debate(sample, pred, 3);
    CHECK(v3.winner == DebateWinner::Gold);
    CHECK(v3.judge_failed);
}

TEST_CASE("generate_trials drops unparseable candidates") {
    Rig rig;
    auto cfg = aes_config();
    cfg.trials = 4;
    Engine engine(cfg, rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "criteria", 0};
    auto sample = aes_sample("a", 4);
    Prediction pred;
    pred.task = TaskKind::AES;
    pred.score = 1;
    pred.rationale = "r";

    rig.mock->enqueue(Role::Guider,
                      {update_json("cand0"),
                       "junk", "junk", "junk",       // candidate 1: budget exhausted
                       update_json("cand2"),
                       update_json("cand3")});
    auto candidates = engine.generate_trials(c, sample, pred);
    REQUIRE(candidates.size() == 3);
    CHECK(candidates[0].index == 0);
    CHECK(candidates[1].index == 2);
    CHECK(candidates[2].index == 3);
    CHECK(candidates[0].candidate.text == "cand0");
    CHECK(candidates[0].candidate.origin == CriteriaOrigin::TrialWinner);
}

TEST_CASE("select_best_trial takes the argmin with lowest-index ties") {
    Rig rig;
    Engine engine(aes_config(), rig.gateway, rig.templates);
    std::vector<Sample> batch{aes_sample("a", 3), aes_sample("b", 3)};

    auto cand = [](int index, const std::string& text) {
        TrialCandidate c;
        c.index = index;
        c.candidate = Criteria{TaskKind::AES, text, 0};
        return c;
    };
    std::vector<TrialCandidate> candidates{cand(0, "c0"), cand(1, "c1"), cand(2, "c2")};

    // per candidate, two re-predictions; batch errors come out [3, 1, 2]
    rig.mock->enqueue(Role::Solver, {score_json(1), score_json(4),    // d=2+1=3
                                     score_json(3), score_json(2),    // d=0+1=1
                                     score_json(2), score_json(2)});  // d=1+1=2
    CHECK(engine.select_best_trial(candidates, batch) == 1);
    CHECK(candidates[0].batch_error == 3);
    CHECK(candidates[1].batch_error == 1);
    CHECK(candidates[2].batch_error == 2);

    // tie: [2, 2] -> lowest index
    std::vector<TrialCandidate> tied{cand(0, "c0"), cand(1, "c1")};
    rig.mock->enqueue(Role::Solver, {score_json(2), score_json(2),
                                     score_json(2), score_json(2)});
    CHECK(engine.select_best_trial(tied, batch) == 0);
}

TEST_CASE("run_iteration gate: zero max discrepancy skips everything") {
    Rig rig;
    Engine engine(aes_config(), rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "criteria", 0};
    std::vector<Sample> batch{aes_sample("a", 3), aes_sample("b", 4)};
    rig.mock->enqueue(Role::Solver, {score_json(3), score_json(4)});
    auto rec = engine.run_iteration(c, 1, batch);
    CHECK(rec.outcome == IterationOutcome::SkipNoError);
    CHECK_FALSE(rec.debate_held);
    CHECK(rec.criteria_version_after == 0);
    CHECK(c.version == 0);
}

TEST_CASE("run_iteration gate: prediction win skips the update") {
    Rig rig;
    Engine engine(aes_config(), rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "criteria", 0};
    std::vector<Sample> batch{aes_sample("a", 3), aes_sample("b", 4)};
    rig.mock->enqueue(Role::Solver, {score_json(3), score_json(2)});  // b wrong
    rig.mock->enqueue(Role::Explainer, {kRationale});
    rig.mock->enqueue(Role::Judge, {kJudgeA});
    auto rec = engine.run_iteration(c, 1, batch);
    CHECK(rec.outcome == IterationOutcome::SkipDebateWin);
    CHECK(rec.debate_held);
    CHECK(rec.selected_sample_id == "b");
    CHECK(rec.verdict->winner == DebateWinner::Prediction);
    CHECK(c.version == 0);
}

TEST_CASE("run_iteration gate: gold win triggers a versioned update") {
    Rig rig;
    auto cfg = aes_config();
    cfg.trials = 2;
    Engine engine(cfg, rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "criteria", 0};
    std::vector<Sample> batch{aes_sample("a", 3), aes_sample("b", 4)};

    rig.mock->enqueue(Role::Solver, {score_json(3), score_json(1)});  // b: d=3
    rig.mock->enqueue(Role::Explainer, {kRationale});
    rig.mock->enqueue(Role::Judge, {kJudgeB});
    rig.mock->enqueue(Role::Guider, {update_json("cand0"), update_json("cand1")});
    // trial re-predictions: cand0 errors 5, cand1 errors 3
    rig.mock->enqueue(Role::Solver, {score_json(1), score_json(1),
                                     score_json(2), score_json(2)});
    auto rec = engine.run_iteration(c, 1, batch);
    CHECK(rec.outcome == IterationOutcome::Update);
    REQUIRE(rec.chosen_index.has_value());
    CHECK(*rec.chosen_index == 1);
    CHECK(c.version == 1);
    CHECK(c.text == "cand1");
    CHECK(c.parent_version == 0);
    REQUIRE(rec.trial_errors.size() == 2);
    CHECK(rec.trial_errors[0].second == 5);
    CHECK(rec.trial_errors[1].second == 3);
}

TEST_CASE("run_iteration gate: argmax sample ties break to the lowest position") {
    Rig rig;
    auto cfg = aes_config();
    cfg.debate_enabled = false;
    Engine engine(cfg, rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "criteria", 0};
    std::vector<Sample> batch{aes_sample("a", 3), aes_sample("b", 3)};
    rig.mock->enqueue(Role::Solver, {score_json(1), score_json(5)});  // d = [2,2]
    rig.mock->enqueue(Role::Guider, {update_json("next")});
    rig.mock->enqueue(Role::Solver, {score_json(3), score_json(3)});
    auto rec = engine.run_iteration(c, 1, batch);
    CHECK(rec.selected_sample_id == "a");
    CHECK(rec.outcome == IterationOutcome::Update);
}

TEST_CASE("run_iteration gate: all candidates failing flags the iteration") {
    Rig rig;
    Engine engine(aes_config(), rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "criteria text", 0};
    std::vector<Sample> batch{aes_sample("a", 3)};
    rig.mock->enqueue(Role::Solver, {score_json(1)});
    rig.mock->enqueue(Role::Explainer, {kRationale});
    rig.mock->enqueue(Role::Judge, {kJudgeB});
    rig.mock->enqueue(Role::Guider, {"junk", "junk", "junk"});  // T=1, budget 2
    auto rec = engine.run_iteration(c, 1, batch);
    CHECK(rec.outcome == IterationOutcome::NoCandidatesFlag);
    CHECK(c.version == 0);
    CHECK(c.text == "criteria text");
}

TEST_CASE("inverted gate flips the debate semantics") {
    Rig rig;
    auto cfg = aes_config();
    cfg.inverted_gate = true;
    Engine engine(cfg, rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "criteria", 0};
    std::vector<Sample> batch{aes_sample("a", 3)};

    // gold wins -> under the inverted reading, skip
    rig.mock->enqueue(Role::Solver, {score_json(1)});
    rig.mock->enqueue(Role::Explainer, {kRationale});
    rig.mock->enqueue(Role::Judge, {kJudgeB});
    CHECK(engine.run_iteration(c, 1, batch).outcome ==
          IterationOutcome::SkipDebateWin);

    // prediction wins -> update proceeds
    rig.mock->enqueue(Role::Solver, {score_json(1)});
    rig.mock->enqueue(Role::Explainer, {kRationale});
    rig.mock->enqueue(Role::Judge, {kJudgeA});
    rig.mock->enqueue(Role::Guider, {update_json("next")});
    rig.mock->enqueue(Role::Solver, {score_json(3)});
    CHECK(engine.run_iteration(c, 2, batch).outcome == IterationOutcome::Update);
    CHECK(c.version == 1);
}

TEST_CASE("incumbent wins ties when included in the trials") {
    Rig rig;
    auto cfg = aes_config();
    cfg.debate_enabled = false;
    cfg.include_incumbent_in_trials = true;
    Engine engine(cfg, rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "incumbent", 0};
    std::vector<Sample> batch{aes_sample("a", 3)};

    rig.mock->enqueue(Role::Solver, {score_json(1)});       // triggering error
    rig.mock->enqueue(Role::Guider, {update_json("cand")});
    // incumbent evaluated first (index -1), then the candidate; tied errors
    rig.mock->enqueue(Role::Solver, {score_json(2), score_json(2)});
    auto rec = engine.run_iteration(c, 1, batch);
    CHECK(rec.outcome == IterationOutcome::Update);
    REQUIRE(rec.chosen_index.has_value());
    CHECK(*rec.chosen_index == -1);
    CHECK(c.version == 0);  // incumbent held: no version bump
    CHECK(c.text == "incumbent");
}

TEST_CASE("iteration records round-trip through the log line format") {
    IterationRecord rec;
    rec.iteration = 7;
    rec.batch_sample_ids = {"a", "b"};
    rec.discrepancies = {0, 3};
    rec.selected_sample_id = "b";
    rec.outcome = IterationOutcome::Update;
    rec.debate_held = true;
    DebateVerdict v;
    v.winner = DebateWinner::Gold;
    v.reason = "why";
    rec.verdict = v;
    rec.trial_errors = {{0, 5}, {1, 3}};
    rec.chosen_index = 1;
    rec.criteria_version_after = 4;
    rec.criteria_length_after = 120;
    rec.token_delta = 42;

    auto back = IterationRecord::from_json(rec.to_json());
    CHECK(back.iteration == 7);
    CHECK(back.batch_sample_ids == rec.batch_sample_ids);
    CHECK(back.discrepancies == rec.discrepancies);
    CHECK(back.outcome == IterationOutcome::Update);
    REQUIRE(back.verdict.has_value());
    CHECK(back.verdict->winner == DebateWinner::Gold);
    CHECK(back.trial_errors == rec.trial_errors);
    CHECK(back.chosen_index == 1);
    CHECK(back.criteria_length_after == 120);
    CHECK(back.token_delta == 42);
}

TEST_CASE("optimize is deterministic and resumable on the synthetic mock") {
    namespace fs = std::filesystem;
    auto cfg = aes_config();
    cfg.iteration_budget = 6;
    cfg.checkpoint_every = 3;
    Dataset train = aes_train(4);

    auto run = [&](const std::string& dir) {
        fs::remove_all(dir);
        Rig rig(true);
        Engine engine(cfg, rig.gateway, rig.templates);
        engine.optimize(train, dir);
        return slurp(dir + "/iterations.jsonl");
    };
    std::string log1 = run("/tmp/tide_test_run1");
    std::string log2 = run("/tmp/tide_test_run2");
    CHECK(log1 == log2);
    CHECK(fs::exists("/tmp/tide_test_run1/checkpoints/iter_3.txt"));
    CHECK(fs::exists("/tmp/tide_test_run1/checkpoints/iter_6.txt"));
    CHECK(fs::exists("/tmp/tide_test_run1/final_criteria.txt"));

    // kill at iteration 3, resume in a fresh engine: identical final log
    std::string dir = "/tmp/tide_test_run_resume";
    fs::remove_all(dir);
    {
        Rig rig(true);
        Engine engine(cfg, rig.gateway, rig.templates);
        engine.optimize(train, dir, false, 3);
    }
    CHECK(load_iteration_log(dir).size() == 3);
    {
        Rig rig(true);
        Engine engine(cfg, rig.gateway, rig.templates);
        engine.optimize(train, dir, true);
    }
    CHECK(slurp(dir + "/iterations.jsonl") == log1);

    fs::remove_all("/tmp/tide_test_run1");
    fs::remove_all("/tmp/tide_test_run2");
    fs::remove_all(dir);
}

TEST_CASE("evaluate reports QWK and the parse failure rate") {
    Rig rig;
    Engine engine(aes_config(), rig.gateway, rig.templates);
    Criteria c{TaskKind::AES, "criteria", 0};

    Dataset eval;
    eval.task = TaskKind::AES;
    for (int i = 1; i <= 5; ++i)
        eval.samples.push_back(aes_sample("e" + std::to_string(i), i));

    // perfect predictions
    rig.mock->enqueue(Role::Solver, {score_json(1), score_json(2), score_json(3),
                                     score_json(4), score_json(5)});
    auto rep = engine.evaluate(c, eval);
    CHECK(rep.n == 5);
    CHECK(rep.parse_failure_rate == doctest::Approx(0.0));
    CHECK(rep.qwk.value() == doctest::Approx(1.0));
    CHECK(rep.pearson.value() == doctest::Approx(1.0));

    // one sample unparseable through the budget -> counted as a failure
    rig.mock->enqueue(Role::Solver, {score_json(1), score_json(2), score_json(3),
                                     score_json(4), "x", "x", "x"});
    auto rep2 = engine.evaluate(c, eval);
    CHECK(rep2.parse_failure_rate == doctest::Approx(0.2));
    CHECK(rep2.qwk.value() < 1.0);
}

TEST_CASE("config validation rejects bad settings") {
    Rig rig;
    auto cfg = aes_config();
    cfg.trials = 0;
    CHECK_THROWS_AS(Engine(cfg, rig.gateway, rig.templates), ConfigError);
    cfg = aes_config();
    cfg.roles.erase(Role::Judge);
    CHECK_THROWS_AS(Engine(cfg, rig.gateway, rig.templates), ConfigError);
    cfg = aes_config();
    cfg.scale = {5, 5};
    CHECK_THROWS_AS(Engine(cfg, rig.gateway, rig.templates), ConfigError);
}
