#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridroute/policy.hpp"
#include "hybridroute/router.hpp"

namespace hybridroute {

enum class ApiStyle { openai_chat, echo_mock };

std::string_view to_string(ApiStyle s);
ApiStyle parse_api_style(std::string_view s);

struct BackendConfig {
    std::string base_url;  // scheme://host[:port]
    ApiStyle api_style = ApiStyle::openai_chat;
    std::optional<std::string> auth_token;
    std::string model;  // "model" field of chat-completion requests
    std::string path;   // empty: style default
};

struct GatewayConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;
    BackendConfig small_backend;
    BackendConfig large_backend;
    std::filesystem::path model_artifact_path;
    std::string metric = "bart_score";
    std::optional<double> threshold_override;
    /// Selects the calibration row when a metric has several.
    std::optional<double> max_drop_pct;
    int request_timeout_ms = 30000;
    std::size_t max_body_bytes = 1 << 20;
    std::size_t pool_size = 8;
    std::optional<std::filesystem::path> route_log_path;
};

/// Parse the JSON config. Relative paths resolve against `base_dir`;
/// HYBRIDROUTE_SMALL_AUTH_TOKEN / HYBRIDROUTE_LARGE_AUTH_TOKEN override the
/// backend tokens. Throws ConfigError.
GatewayConfig parse_gateway_config(std::string_view text, const std::filesystem::path& base_dir = {});
GatewayConfig load_gateway_config(const std::filesystem::path& path);
void validate(const GatewayConfig& cfg);

enum class RouteOutcome { ok, backend_error, timeout };
std::string_view to_string(RouteOutcome o);

struct RouteRecord {
    std::string request_id;
    double score = 0.5;
    double threshold = 1.0;
    Target target = Target::large;
    double backend_latency_ms = 0.0;
    RouteOutcome outcome = RouteOutcome::ok;
};

struct RouteRequest {
    std::string query_text;
    std::optional<std::vector<double>> embedding;
};

struct RouteResponse {
    std::optional<std::string> response_text;
    std::optional<std::string> error;
    RouteRecord routing;
};

struct DryRunResult {
    double score = 0.5;
    Target target = Target::large;
    double threshold = 1.0;
};

struct GatewayStats {
    std::uint64_t requests_total = 0;
    std::uint64_t routed_small = 0;
    std::uint64_t routed_large = 0;
    std::optional<double> realized_cost_advantage_pct;
    std::uint64_t backend_errors = 0;
    std::uint64_t timeouts = 0;
    std::uint64_t rejected = 0;
};

/// Result of one call to a chat backend.
struct BackendReply {
    RouteOutcome outcome = RouteOutcome::ok;
    std::string text;  // response text, or error description
    double latency_ms = 0.0;
};

BackendReply call_backend(const BackendConfig& backend, std::string_view query_text, int timeout_ms);

/// Scores a query, applies the strict-threshold rule, and forwards it to
/// exactly one backend. The model is immutable after construction; counters
/// are atomic, so handle_route and dry_run may run concurrently.
class Gateway {
public:
    /// Throws ConfigError when neither an override nor a calibration entry
    /// for cfg.metric supplies a threshold.
    Gateway(GatewayConfig cfg, RouterModel model);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    static std::unique_ptr<Gateway> from_config(const GatewayConfig& cfg);

    /// Throws InputError for an invalid request (e.g. an embedding sent to a
    /// hashed-feature model).
    RouteResponse handle_route(const RouteRequest& request);
    DryRunResult dry_run(const RouteRequest& request) const;
    GatewayStats stats() const;
    double threshold() const noexcept { return threshold_; }
    const RouterModel& model() const noexcept { return model_; }
    const GatewayConfig& config() const noexcept { return cfg_; }

    /// Count a request rejected before scoring (oversized or malformed).
    void note_rejected() { rejected_.fetch_add(1, std::memory_order_relaxed); }

    /// Bind and serve HTTP in a background thread. Port 0 picks a free
    /// port. Returns the bound port.
    int start();
    /// Serve on the calling thread until stop().
    void serve_blocking();
    void stop();

private:
    int bind();
    double score_request(const RouteRequest& request) const;
    void log_record(const RouteRecord& rec, const RouteRequest& request);

    GatewayConfig cfg_;
    RouterModel model_;
    double threshold_ = 1.0;

    std::atomic<std::uint64_t> next_id_{0};
    std::atomic<std::uint64_t> routed_small_{0};
    std::atomic<std::uint64_t> routed_large_{0};
    std::atomic<std::uint64_t> backend_errors_{0};
    std::atomic<std::uint64_t> timeouts_{0};
    std::atomic<std::uint64_t> rejected_{0};

    std::mutex log_mutex_;

    struct Http;
    std::unique_ptr<Http> http_;
};

/// Bundled test backend. Answers both the echo_mock route (POST /v1/echo)
/// and an OpenAI-style POST /v1/chat/completions with its own name, and
/// counts requests. `fail` makes every call answer 500.
class EchoMockServer {
public:
    explicit EchoMockServer(std::string name, bool fail = false, std::string host = "127.0.0.1");
    ~EchoMockServer();

    EchoMockServer(const EchoMockServer&) = delete;
    EchoMockServer& operator=(const EchoMockServer&) = delete;

    /// Bind to `port` (0 = any free port) and serve in a background thread.
    int start(int port = 0);
    void serve_blocking(int port);
    void stop();
    int port() const noexcept { return port_; }
    std::string base_url() const;
    std::uint64_t requests() const noexcept { return requests_.load(); }

private:
    int bind(int port);

    std::string name_;
    bool fail_;
    std::string host_;
    int port_ = 0;
    std::atomic<std::uint64_t> requests_{0};

    struct Http;
    std::unique_ptr<Http> http_;
};

}  // namespace hybridroute
