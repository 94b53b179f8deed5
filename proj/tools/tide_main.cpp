// tide: criteria-optimization runner (init / optimize / eval / report).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tide/dataset.hpp"
#include "tide/engine.hpp"
#include "tide/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tide;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitBackend = 3;

struct CliOptions {
    std::string config_path;
    std::optional<std::string> task;
    std::optional<int> trials;
    std::optional<int> batch_size;
    std::optional<int> iterations;
    bool no_debate = false;
    std::optional<unsigned> seed;
    bool resume = false;
    std::optional<std::string> backend;
    std::optional<std::string> mock_script;
    std::optional<std::string> run_dir;
};

struct ResolvedRun {
    RunConfig config;
    std::string dataset_path;
    SplitSpec split;
    std::optional<int> bin_levels;
    std::string backend = "mock";
    std::string mock_script;
    std::string run_dir;
    std::string templates_dir;
    std::string demos_path;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RoleBinding role_from_config(Role role, const json& j, const RoleBinding& defaults) {
    RoleBinding b = defaults;
    b.role = role;
    if (j.contains("model")) b.model_name = j["model"].get<std::string>();
    if (j.contains("temperature")) b.temperature = j["temperature"].get<double>();
    if (j.contains("max_retries")) b.max_retries = j["max_retries"].get<int>();
    if (j.contains("endpoint")) b.endpoint = j["endpoint"].get<std::string>();
    if (j.contains("credential_env")) b.credential_env = j["credential_env"].get<std::string>();
    return b;
}

// precedence: CLI flag > config file > documented default
ResolvedRun resolve(const CliOptions& cli) {
    json j = json::object();
    if (!cli.config_path.empty()) {
        try {
            j = json::parse(slurp(cli.config_path));
        } catch (const json::parse_error& e) {
            throw ConfigError("config file: " + std::string(e.what()));
        }
    }

    ResolvedRun run;
    RunConfig& cfg = run.config;
    cfg.roles = default_roles();

    std::string task = cli.task.value_or(j.value("task", "aes"));
    cfg.task = task_from_string(task);
    cfg.trials = cli.trials.value_or(j.value("trials", 1));
    cfg.batch_size = cli.batch_size.value_or(j.value("batch_size", 2));
    cfg.iteration_budget = cli.iterations.value_or(j.value("iterations", 240));
    cfg.checkpoint_every = j.value("checkpoint_every", 30);
    cfg.debate_enabled = cli.no_debate ? false : j.value("debate", true);
    cfg.inverted_gate = j.value("inverted_gate", false);
    cfg.include_incumbent_in_trials = j.value("include_incumbent_in_trials", false);
    cfg.repair_budget = j.value("repair_budget", 2);
    cfg.seed = cli.seed.value_or(j.value("seed", 42u));
    cfg.discrepancy.ari_penalty = j.value("ari_penalty", 2);
    if (j.contains("scale")) {
        cfg.scale.min = j["scale"].value("min", 1);
        cfg.scale.max = j["scale"].value("max", 5);
    }
    cfg.task_name = j.value("task_name", to_string(cfg.task));
    cfg.task_description = j.value("task_description", "analyzing argumentative essays");
    cfg.labels = j.value("labels", "");
    if (j.contains("label_set"))
        cfg.label_set = j["label_set"].get<std::vector<std::string>>();
    cfg.standards = j.value("standards", "Use the task's annotation guidelines.");
    if (j.contains("roles")) {
        for (auto& [name, binding] : j["roles"].items()) {
            Role r = role_from_string(name);
            cfg.roles[r] = role_from_config(r, binding, cfg.roles[r]);
        }
    }

    run.dataset_path = j.value("dataset", "");
    run.split.seed = j.value("split_seed", 42u);
    run.split.train_fraction = j.value("train_fraction", 0.6);
    if (j.contains("sample_fraction") && !j["sample_fraction"].is_null())
        run.split.sample_fraction = j["sample_fraction"].get<double>();
    if (j.contains("sample_count") && !j["sample_count"].is_null())
        run.split.sample_count = j["sample_count"].get<std::size_t>();
    if (j.contains("bin_levels") && !j["bin_levels"].is_null())
        run.bin_levels = j["bin_levels"].get<int>();

    run.backend = cli.backend.value_or(j.value("backend", "mock"));
    run.mock_script = cli.mock_script.value_or(j.value("mock_script", ""));
    run.run_dir = cli.run_dir.value_or(j.value("run_dir", ""));
    if (run.run_dir.empty()) {
        std::ostringstream os;
        os << "runs/" << task << "_seed" << cfg.seed;
        run.run_dir = os.str();
    }
    run.templates_dir = j.value("templates_dir", "");
    run.demos_path = j.value("demos", "");
    return run;
}

std::shared_ptr<Backend> make_backend(const ResolvedRun& run) {
    if (run.backend == "mock") {
        auto mock = std::make_shared<MockBackend>(/*synthetic=*/true);
        if (!run.mock_script.empty()) {
            std::istringstream in(slurp(run.mock_script));
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                json j = json::parse(line);
                std::string text = j.at("text").get<std::string>();
                if (j.contains("role"))
                    mock->enqueue(role_from_string(j["role"].get<std::string>()), {text});
                else
                    mock->enqueue({text});
            }
        }
        return mock;
    }
    if (run.backend == "live") return std::make_shared<HttpBackend>();
    throw ConfigError("unknown backend: " + run.backend);
}

Dataset load_and_prepare(const ResolvedRun& run) {
    if (run.dataset_path.empty()) throw ConfigError("config has no \"dataset\" path");
    Dataset ds = load(run.dataset_path, run.config.task);
    if (run.bin_levels) ds = bin_scores(ds, *run.bin_levels);
    return ds;
}

int cmd_init(const ResolvedRun& run, TemplateStore& templates) {
    RunConfig cfg = run.config;
    if (!run.demos_path.empty()) cfg.demos = slurp(run.demos_path);

    GatewayConfig gw_cfg;
    fs::create_directories(run.run_dir);
    gw_cfg.audit_log_path = (fs::path(run.run_dir) / "audit.jsonl").string();
    Gateway gateway(make_backend(run), gw_cfg);
    Engine engine(cfg, gateway, templates);

    Criteria c0 = engine.init_criteria();
    std::ofstream out(fs::path(run.run_dir) / "c0.txt", std::ios::binary);
    out << c0.text;
    std::cout << "wrote c0 (" << criteria_length(c0) << " chars) to " << run.run_dir
              << "/c0.txt\n";
    return kExitOk;
}

int cmd_optimize(const ResolvedRun& run, TemplateStore& templates, bool resume) {
    RunConfig cfg = run.config;
    if (!run.demos_path.empty()) cfg.demos = slurp(run.demos_path);

    Dataset ds = load_and_prepare(run);
    auto [train, eval] = shuffle_split(ds, run.split);

    GatewayConfig gw_cfg;
    fs::create_directories(run.run_dir);
    gw_cfg.audit_log_path = (fs::path(run.run_dir) / "audit.jsonl").string();
    Gateway gateway(make_backend(run), gw_cfg);
    Engine engine(cfg, gateway, templates);

    // progress line per iteration via a thin wrapper run
    RunArtifacts artifacts = engine.optimize(train, run.run_dir, resume);
    for (const auto& r : artifacts.records) {
        int max_d = 0;
        for (int d : r.discrepancies) max_d = std::max(max_d, d);
        std::cout << "iter " << r.iteration << " " << to_string(r.outcome)
                  << " max-d=" << max_d << " tokens=" << r.token_delta << "\n";
    }
    std::cout << "final criteria version " << artifacts.final_criteria.version
              << " (" << criteria_length(artifacts.final_criteria) << " chars), "
              << artifacts.checkpoint_paths.size() << " checkpoints, total tokens "
              << gateway.ledger().grand_total() << "\n";
    return kExitOk;
}

int cmd_eval(const ResolvedRun& run, TemplateStore& templates,
             const std::string& criteria_path, const std::string& split) {
    RunConfig cfg = run.config;
    Dataset ds = load_and_prepare(run);
    auto [train, eval] = shuffle_split(ds, run.split);
    const Dataset& target = split == "train" ? train : eval;

    Criteria criteria;
    criteria.task = cfg.task;
    criteria.text = slurp(criteria_path);

    Gateway gateway(make_backend(run));
    Engine engine(cfg, gateway, templates);
    MetricsReport report = engine.evaluate(criteria, target);

    std::cout << report.to_table();
    fs::create_directories(run.run_dir);
    std::ofstream out(fs::path(run.run_dir) / "metrics.json", std::ios::binary);
    out << report.to_json() << "\n";
    return kExitOk;
}

int cmd_report(const ResolvedRun& run) {
    ReportFiles files = write_reports(run.run_dir, run.config.checkpoint_every);
    std::cout << "wrote " << files.error_dynamics << "\n"
              << "wrote " << files.error_dynamics_sampled << "\n"
              << "wrote " << files.win_rate << "\n"
              << "wrote " << files.criteria_length << "\n"
              << "wrote " << files.token_budget << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tide: criteria optimization for argument-mining tasks"};
    app.require_subcommand(1);

    CliOptions cli;
    app.add_option("--config", cli.config_path, "config file (JSON)");
    app.add_option("--task", cli.task, "aes | acd | ari");
    app.add_option("--trials", cli.trials, "trial candidates per update");
    app.add_option("--batch-size", cli.batch_size, "training batch size");
    app.add_option("--iterations", cli.iterations, "iteration budget");
    app.add_flag("--no-debate", cli.no_debate, "disable the debate gate");
    app.add_option("--seed", cli.seed, "run seed");
    app.add_option("--backend", cli.backend, "live | mock");
    app.add_option("--mock-script", cli.mock_script, "scripted mock responses (JSONL)");
    app.add_option("--run-dir", cli.run_dir, "run artifacts directory");

    auto* init = app.add_subcommand("init", "generate the initial criteria c0");
    auto* optimize = app.add_subcommand("optimize", "run the optimization loop");
    optimize->add_flag("--resume", cli.resume, "resume from the last checkpoint");
    auto* eval = app.add_subcommand("eval", "evaluate fixed criteria on a split");
    std::string criteria_path, split = "eval";
    eval->add_option("--criteria", criteria_path, "criteria text file")->required();
    eval->add_option("--split", split, "train | eval")
        ->check(CLI::IsMember({"train", "eval"}));
    auto* report = app.add_subcommand("report", "emit plot-ready CSVs from a run dir");

    CLI11_PARSE(app, argc, argv);

    try {
        ResolvedRun run = resolve(cli);
        TemplateStore templates;
        if (!run.templates_dir.empty()) templates.load_overrides(run.templates_dir);

        if (init->parsed()) return cmd_init(run, templates);
        if (optimize->parsed()) return cmd_optimize(run, templates, cli.resume);
        if (eval->parsed()) return cmd_eval(run, templates, criteria_path, split);
        if (report->parsed()) return cmd_report(run);
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const UnknownTemplate& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const MissingBinding& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const SchemaError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const TaskMismatch& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const EmptySplit& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const MissingLog& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const BackendUnavailable& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const AuthError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const ScriptExhausted& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackend;
    }
}
