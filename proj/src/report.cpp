#include "tide/report.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tide/gateway.hpp"

namespace tide {

namespace fs = std::filesystem;

std::vector<IterationRecord> load_iteration_log(const std::string& run_dir) {
    fs::path log = fs::path(run_dir) / "iterations.jsonl";
    std::ifstream in(log);
    if (!in) throw MissingLog("no iteration log at " + log.string());
    std::vector<IterationRecord> records;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) records.push_back(IterationRecord::from_json(line));
    return records;
}

ReportFiles write_reports(const std::string& run_dir, int sample_every) {
    auto records = load_iteration_log(run_dir);
    ReportFiles files;

    auto open_csv = [&run_dir](const std::string& name, const std::string& header,
                               std::string& path_out) {
        fs::path p = fs::path(run_dir) / name;
        path_out = p.string();
        std::ofstream out(p, std::ios::trunc);
        out << header << "\n";
        return out;
    };

    {
        auto out = open_csv("error_dynamics.csv",
                            "iteration,max_discrepancy,batch_discrepancy,outcome",
                            files.error_dynamics);
        auto sampled = open_csv("error_dynamics_sampled.csv",
                                "iteration,max_discrepancy,batch_discrepancy",
                                files.error_dynamics_sampled);
        for (const auto& r : records) {
            int max_d = 0, sum_d = 0;
            for (int d : r.discrepancies) {
                max_d = std::max(max_d, d);
                sum_d += d;
            }
            out << r.iteration << "," << max_d << "," << sum_d << ","
                << to_string(r.outcome) << "\n";
            if (sample_every > 0 && r.iteration % sample_every == 0)
                sampled << r.iteration << "," << max_d << "," << sum_d << "\n";
        }
    }

    {
        auto out = open_csv(
            "win_rate.csv",
            "iteration,winner,judge_failed,debates,prediction_wins,cumulative_win_rate",
            files.win_rate);
        long debates = 0, prediction_wins = 0;
        for (const auto& r : records) {
            if (!r.debate_held || !r.verdict) continue;
            ++debates;
            if (r.verdict->winner == DebateWinner::Prediction) ++prediction_wins;
            out << r.iteration << ","
                << (r.verdict->winner == DebateWinner::Prediction ? "prediction"
                                                                  : "gold")
                << "," << (r.verdict->judge_failed ? 1 : 0) << "," << debates << ","
                << prediction_wins << ","
                << static_cast<double>(prediction_wins) / debates << "\n";
        }
    }

    {
        auto out = open_csv("criteria_length.csv",
                            "iteration,criteria_version,criteria_length",
                            files.criteria_length);
        // row 0 is c_0: its length equals the first record's length unless
        // that record already adopted an update
        fs::path c0 = fs::path(run_dir) / "c0.txt";
        if (fs::exists(c0)) {
            std::ifstream in(c0, std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            out << "0,0," << buf.str().size() << "\n";
        }
        for (const auto& r : records)
            out << r.iteration << "," << r.criteria_version_after << ","
                << r.criteria_length_after << "\n";
    }

    {
        auto out = open_csv("token_budget.csv",
                            "role,phase,prompt_tokens,completion_tokens,total",
                            files.token_budget);
        fs::path ledger_path = fs::path(run_dir) / "ledger.json";
        if (fs::exists(ledger_path)) {
            std::ifstream in(ledger_path, std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            TokenLedger ledger = TokenLedger::from_json(buf.str());
            for (const auto& row : ledger.report())
                out << row.role << "," << row.phase << "," << row.prompt_tokens << ","
                    << row.completion_tokens << "," << row.total << "\n";
        }
    }

    return files;
}

}  // namespace tide
