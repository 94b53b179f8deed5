#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "tide/report.hpp"

using namespace tide;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

/// Builds a run dir from hand-written records so the CSVs are checkable by eye.
std::string make_run_dir() {
    std::string dir = "/tmp/tide_test_report";
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::ofstream(dir + "/c0.txt") << "twelve chars";  // 12 bytes

    TokenLedger ledger;
    ledger.record(Role::Solver, Phase::Predict, {100, 50});
    ledger.record(Role::Judge, Phase::Debate, {30, 10});
    std::ofstream(dir + "/ledger.json") << ledger.to_json();

    auto rec = [](int iter, std::vector<int> ds, IterationOutcome outcome,
                  bool debated, DebateWinner winner, int version, int length) {
        IterationRecord r;
        r.iteration = iter;
        for (std::size_t i = 0; i < ds.size(); ++i)
            r.batch_sample_ids.push_back("s" + std::to_string(i));
        r.discrepancies = std::move(ds);
        r.outcome = outcome;
        r.debate_held = debated;
        if (debated) {
            DebateVerdict v;
            v.winner = winner;
            r.verdict = v;
            r.selected_sample_id = "s0";
        }
        r.criteria_version_after = version;
        r.criteria_length_after = length;
        return r;
    };

    std::ofstream log(dir + "/iterations.jsonl");
    log << rec(1, {0, 0}, IterationOutcome::SkipNoError, false,
               DebateWinner::Gold, 0, 12).to_json() << "\n";
    log << rec(2, {2, 1}, IterationOutcome::SkipDebateWin, true,
               DebateWinner::Prediction, 0, 12).to_json() << "\n";
    log << rec(3, {3, 0}, IterationOutcome::Update, true,
               DebateWinner::Gold, 1, 20).to_json() << "\n";
    log << rec(4, {1, 1}, IterationOutcome::Update, true,
               DebateWinner::Gold, 2, 25).to_json() << "\n";
    return dir;
}

}  // namespace

TEST_CASE("write_reports emits the five csv files") {
    std::string dir = make_run_dir();
    auto files = write_reports(dir, 2);

    auto dynamics = read_csv(files.error_dynamics);
    REQUIRE(dynamics.size() == 5);  // header + 4 iterations
    CHECK(dynamics[0][0] == "iteration");
    CHECK(dynamics[1] == std::vector<std::string>{"1", "0", "0", "skip-no-error"});
    CHECK(dynamics[2] == std::vector<std::string>{"2", "2", "3", "skip-debate-win"});
    CHECK(dynamics[3][1] == "3");  // max d
    CHECK(dynamics[3][2] == "3");  // sum d

    auto sampled = read_csv(files.error_dynamics_sampled);
    REQUIRE(sampled.size() == 3);  // header + iterations 2 and 4
    CHECK(sampled[1][0] == "2");
    CHECK(sampled[2][0] == "4");

    auto win = read_csv(files.win_rate);
    REQUIRE(win.size() == 4);  // header + 3 debated iterations
    CHECK(win[1][1] == "prediction");
    CHECK(std::stod(win[1][5]) == doctest::Approx(1.0));
    CHECK(std::stod(win[2][5]) == doctest::Approx(0.5));
    CHECK(std::stod(win[3][5]) == doctest::Approx(1.0 / 3));
    // cumulative rate stays in [0,1]
    for (std::size_t i = 1; i < win.size(); ++i) {
        double r = std::stod(win[i][5]);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }

    auto length = read_csv(files.criteria_length);
    REQUIRE(length.size() == 6);  // header + c0 row + 4 iterations
    CHECK(length[1] == std::vector<std::string>{"0", "0", "12"});
    CHECK(length[5] == std::vector<std::string>{"4", "2", "25"});

    auto tokens = read_csv(files.token_budget);
    REQUIRE(tokens.size() == 4);  // header + 2 cells + total
    CHECK(tokens.back()[0] == "total");
    CHECK(tokens.back()[4] == "190");

    fs::remove_all(dir);
}

TEST_CASE("report readers are idempotent") {
    std::string dir = make_run_dir();
    auto first = write_reports(dir, 2);
    auto dynamics1 = read_csv(first.error_dynamics);
    auto second = write_reports(dir, 2);
    CHECK(read_csv(second.error_dynamics) == dynamics1);
    fs::remove_all(dir);
}

TEST_CASE("missing log raises MissingLog") {
    std::string dir = "/tmp/tide_test_report_empty";
    fs::remove_all(dir);
    fs::create_directories(dir);
    CHECK_THROWS_AS(write_reports(dir, 30), MissingLog);
    CHECK_THROWS_AS(load_iteration_log(dir), MissingLog);
    fs::remove_all(dir);
}

TEST_CASE("load_iteration_log round-trips engine records") {
    std::string dir = make_run_dir();
    auto records = load_iteration_log(dir);
    REQUIRE(records.size() == 4);
    CHECK(records[0].outcome == IterationOutcome::SkipNoError);
    CHECK(records[2].criteria_version_after == 1);
    CHECK(records[3].debate_held);
    fs::remove_all(dir);
}
