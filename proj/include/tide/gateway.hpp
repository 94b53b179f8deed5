#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tide/errors.hpp"
#include "tide/task_model.hpp"

namespace tide {

enum class Role { Guider, Solver, Judge, Explainer };
enum class Phase { Init, Predict, Update, Debate, Explain, TrialEval };

std::string to_string(Role r);
std::string to_string(Phase p);
Role role_from_string(const std::string& s);
Phase phase_from_string(const std::string& s);

struct RoleBinding {
    Role role = Role::Solver;
    std::string model_name = "mock";
    double temperature = 0.7;
    int max_retries = 3;
    std::string endpoint;        // chat-completions base URL for live backends
    std::string credential_env;  // env var holding the API key
};

struct Message {
    std::string role;  // "system" | "user"
    std::string content;
};

struct CompletionRequest {
    Role role = Role::Solver;
    Phase phase = Phase::Predict;
    std::vector<Message> messages;
    std::optional<double> temperature;

    // Hints consumed only by the synthetic mock backend; live backends
    // ignore them entirely.
    std::string schema;  // score | update | verdict | rationale | unit_lines | criteria
    TaskKind task = TaskKind::AES;
    int unit_count = 0;
    ScoreScale scale;
    std::vector<std::string> label_set;
};

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long total() const { return prompt_tokens + completion_tokens; }
};

struct CompletionResponse {
    std::string text;
    Usage usage;
    double latency_ms = 0;
    std::string backend_id;
};

/// Transient failure (network, 429/5xx class); the gateway retries these.
struct TransientBackendError : Error { using Error::Error; };

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete(const RoleBinding& binding,
                                        const CompletionRequest& req) = 0;
    virtual std::string id() const = 0;
};

/// Deterministic test backend. Scripted responses (role-keyed or FIFO) take
/// priority; with synthetic mode on, any unscripted call gets a generated,
/// schema-conforming response that is a pure function of the prompt text.
class MockBackend : public Backend {
public:
    explicit MockBackend(bool synthetic = false) : synthetic_(synthetic) {}

    void enqueue(const std::vector<std::string>& responses);
    void enqueue(Role role, const std::vector<std::string>& responses);

    CompletionResponse complete(const RoleBinding& binding,
                                const CompletionRequest& req) override;
    std::string id() const override { return "mock"; }

private:
    bool synthetic_;
    std::mutex mu_;
    std::deque<std::string> fifo_;
    std::map<Role, std::deque<std::string>> by_role_;
};

/// OpenAI-compatible chat-completions client over HTTP.
class HttpBackend : public Backend {
public:
    CompletionResponse complete(const RoleBinding& binding,
                                const CompletionRequest& req) override;
    std::string id() const override { return "http"; }
};

struct LedgerRow {
    std::string role;
    std::string phase;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long total = 0;
};

/// Per-role, per-phase cumulative token counts.
class TokenLedger {
public:
    TokenLedger() = default;
    TokenLedger(TokenLedger&& o) noexcept : cells_(std::move(o.cells_)) {}

    void record(Role role, Phase phase, const Usage& usage);

    /// Rows sorted by (role, phase), plus a grand-total row last.
    std::vector<LedgerRow> report() const;
    long grand_total() const;

    std::string to_json() const;
    static TokenLedger from_json(const std::string& text);

private:
    mutable std::mutex mu_;
    std::map<std::pair<std::string, std::string>, Usage> cells_;
};

struct GatewayConfig {
    std::string audit_log_path;  // empty = no audit log
    int backoff_base_ms = 250;
    int backoff_cap_ms = 8000;
    std::uint32_t jitter_seed = 1;
};

/// The single place that performs completions: routes to the backend,
/// retries transient failures with exponential backoff and full jitter,
/// records token usage, and appends every response to the audit log.
class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, GatewayConfig cfg = {});

    CompletionResponse complete(const RoleBinding& binding,
                                const CompletionRequest& req);

    TokenLedger& ledger() { return ledger_; }
    const TokenLedger& ledger() const { return ledger_; }
    Backend& backend() { return *backend_; }

private:
    std::shared_ptr<Backend> backend_;
    GatewayConfig cfg_;
    TokenLedger ledger_;
    std::mutex audit_mu_;
    std::uint64_t jitter_state_;
};

struct AuditEntry {
    std::string role;
    std::string phase;
    std::uint64_t request_digest = 0;
    std::string response;
    Usage usage;
};

/// Reads an audit log back; feeding the responses into a role-keyed mock
/// script replays the run's decisions exactly.
std::vector<AuditEntry> load_audit_log(const std::string& path);

/// Stable FNV-1a over the concatenated message contents.
std::uint64_t request_digest(const CompletionRequest& req);

}  // namespace tide
