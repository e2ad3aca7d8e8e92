#include "hybridroute/gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "hybridroute/errors.hpp"
#include "hybridroute/features.hpp"
#include "json.hpp"

namespace hybridroute {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ApiStyle s) { return s == ApiStyle::openai_chat ? "openai_chat" : "echo_mock"; }

ApiStyle parse_api_style(std::string_view s) {
    if (s == "openai_chat") return ApiStyle::openai_chat;
    if (s == "echo_mock") return ApiStyle::echo_mock;
    throw ConfigError("unknown api_style '" + std::string(s) + "'");
}

std::string_view to_string(RouteOutcome o) {
    switch (o) {
        case RouteOutcome::ok: return "ok";
        case RouteOutcome::backend_error: return "backend_error";
        case RouteOutcome::timeout: return "timeout";
    }
    return "ok";
}

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("backend base_url '" + url + "' lacks a scheme");
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ConfigError("unsupported scheme in '" + url + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https") throw ConfigError("https backends need a TLS-enabled build");
#endif
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    out.scheme_host_port = url.substr(0, path_start);
    if (path_start != std::string::npos) {
        out.path_prefix = url.substr(path_start);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    }
    if (out.scheme_host_port.size() <= scheme_end + 3) throw ConfigError("backend base_url '" + url + "' lacks a host");
    return out;
}

std::string default_path(ApiStyle s) { return s == ApiStyle::openai_chat ? "/v1/chat/completions" : "/v1/echo"; }

BackendConfig parse_backend(const json& j, const char* which, const char* env_token) {
    if (!j.is_object()) throw ConfigError(std::string(which) + " must be an object");
    BackendConfig b;
    if (!j.contains("base_url") || !j["base_url"].is_string())
        throw ConfigError(std::string(which) + ".base_url is required");
    b.base_url = j["base_url"].get<std::string>();
    b.api_style = parse_api_style(j.value("api_style", std::string("openai_chat")));
    if (j.contains("auth_token") && j["auth_token"].is_string()) b.auth_token = j["auth_token"].get<std::string>();
    b.model = j.value("model", std::string{});
    b.path = j.value("path", std::string{});
    if (const char* env = std::getenv(env_token); env != nullptr && *env != '\0') b.auth_token = std::string(env);
    return b;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

void validate(const GatewayConfig& cfg) {
    if (cfg.listen_port < 0 || cfg.listen_port > 65535) throw ConfigError("listen port out of range");
    if (cfg.threshold_override && !(*cfg.threshold_override >= 0.0 && *cfg.threshold_override <= 1.0))
        throw ConfigError("threshold_override must lie in [0,1]");
    if (cfg.request_timeout_ms <= 0) throw ConfigError("request_timeout_ms must be > 0");
    if (cfg.max_body_bytes == 0) throw ConfigError("max_body_bytes must be > 0");
    if (cfg.pool_size == 0) throw ConfigError("pool_size must be > 0");
    if (cfg.metric.empty()) throw ConfigError("metric is required");
    split_url(cfg.small_backend.base_url);
    split_url(cfg.large_backend.base_url);
}

GatewayConfig parse_gateway_config(std::string_view text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be an object");
    GatewayConfig cfg;
    try {
        const std::string listen = j.value("listen_address", std::string("127.0.0.1:8080"));
        const auto colon = listen.rfind(':');
        if (colon == std::string::npos) throw ConfigError("listen_address must be host:port");
        cfg.listen_host = listen.substr(0, colon);
        try {
            cfg.listen_port = std::stoi(listen.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("listen_address has a bad port");
        }
        if (!j.contains("small_backend") || !j.contains("large_backend"))
            throw ConfigError("small_backend and large_backend are required");
        cfg.small_backend = parse_backend(j["small_backend"], "small_backend", "HYBRIDROUTE_SMALL_AUTH_TOKEN");
        cfg.large_backend = parse_backend(j["large_backend"], "large_backend", "HYBRIDROUTE_LARGE_AUTH_TOKEN");
        if (!j.contains("model_artifact_path") || !j["model_artifact_path"].is_string())
            throw ConfigError("model_artifact_path is required");
        cfg.model_artifact_path = j["model_artifact_path"].get<std::string>();
        if (cfg.model_artifact_path.is_relative() && !base_dir.empty())
            cfg.model_artifact_path = base_dir / cfg.model_artifact_path;
        cfg.metric = j.value("metric", std::string("bart_score"));
        if (j.contains("threshold_override") && !j["threshold_override"].is_null())
            cfg.threshold_override = j["threshold_override"].get<double>();
        if (j.contains("max_drop_pct") && !j["max_drop_pct"].is_null())
            cfg.max_drop_pct = j["max_drop_pct"].get<double>();
        cfg.request_timeout_ms = j.value("request_timeout_ms", cfg.request_timeout_ms);
        cfg.max_body_bytes = j.value("max_body_bytes", cfg.max_body_bytes);
        cfg.pool_size = j.value("pool_size", cfg.pool_size);
        if (j.contains("route_log_path") && j["route_log_path"].is_string()) {
            std::filesystem::path p = j["route_log_path"].get<std::string>();
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            cfg.route_log_path = p;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

GatewayConfig load_gateway_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_gateway_config(buf.str(), path.parent_path());
}

BackendReply call_backend(const BackendConfig& backend, std::string_view query_text, int timeout_ms) {
    const ParsedUrl url = split_url(backend.base_url);
    httplib::Client client(url.scheme_host_port);
    const auto sec = timeout_ms / 1000;
    const auto usec = (timeout_ms % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    if (backend.auth_token) client.set_bearer_token_auth(*backend.auth_token);

    const std::string path = url.path_prefix + (backend.path.empty() ? default_path(backend.api_style) : backend.path);
    json body;
    if (backend.api_style == ApiStyle::openai_chat) {
        body["model"] = backend.model;
        body["messages"] = json::array({{{"role", "user"}, {"content", std::string(query_text)}}});
    } else {
        body["query_text"] = std::string(query_text);
    }

    const auto t0 = std::chrono::steady_clock::now();
    auto res = client.Post(path, body.dump(), "application/json");
    BackendReply reply;
    reply.latency_ms = elapsed_ms(t0);
    if (!res) {
        const auto err = res.error();
        const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                               (err == httplib::Error::Read && reply.latency_ms >= 0.9 * timeout_ms);
        reply.outcome = timed_out ? RouteOutcome::timeout : RouteOutcome::backend_error;
        reply.text = "backend request failed: " + httplib::to_string(err);
        return reply;
    }
    if (res->status < 200 || res->status >= 300) {
        reply.outcome = RouteOutcome::backend_error;
        reply.text = "backend answered HTTP " + std::to_string(res->status);
        return reply;
    }
    try {
        const json out = json::parse(res->body);
        if (backend.api_style == ApiStyle::openai_chat) {
            reply.text = out.at("choices").at(0).at("message").at("content").get<std::string>();
        } else {
            reply.text = out.at("response_text").get<std::string>();
        }
    } catch (const json::exception& e) {
        reply.outcome = RouteOutcome::backend_error;
        reply.text = std::string("unreadable backend response: ") + e.what();
    }
    return reply;
}

struct Gateway::Http {
    httplib::Server server;
    std::thread thread;
};

Gateway::Gateway(GatewayConfig cfg, RouterModel model) : cfg_(std::move(cfg)), model_(std::move(model)) {
    validate(cfg_);
    if (cfg_.threshold_override) {
        threshold_ = *cfg_.threshold_override;
    } else if (const auto* entry = model_.find_threshold(cfg_.metric, cfg_.max_drop_pct)) {
        threshold_ = entry->threshold;
    } else {
        throw ConfigError("model has no unique calibrated threshold for metric '" + cfg_.metric +
                          "' and no threshold_override is set");
    }
}

Gateway::~Gateway() { stop(); }

std::unique_ptr<Gateway> Gateway::from_config(const GatewayConfig& cfg) {
    RouterModel model;
    try {
        model = load_model(cfg.model_artifact_path);
    } catch (const Error& e) {
        throw ConfigError(std::string("cannot load model artifact: ") + e.what());
    }
    return std::make_unique<Gateway>(cfg, std::move(model));
}

double Gateway::score_request(const RouteRequest& request) const {
    const bool embedding_model = model_.featurizer.kind == FeaturizerKind::external_embedding;
    if (request.embedding && !embedding_model)
        throw InputError("this router uses hashed text features; requests must not carry an embedding");
    if (!request.embedding && embedding_model) throw InputError("this router requires an embedding");
    const auto features = featurize(model_.featurizer, request.query_text,
                                    request.embedding ? &*request.embedding : nullptr);
    return score(model_, features);
}

DryRunResult Gateway::dry_run(const RouteRequest& request) const {
    const double s = score_request(request);
    return {s, route_by_threshold(s, threshold_), threshold_};
}

RouteResponse Gateway::handle_route(const RouteRequest& request) {
    RouteResponse out;
    auto& rec = out.routing;
    rec.score = score_request(request);
    rec.threshold = threshold_;
    rec.target = route_by_threshold(rec.score, threshold_);
    rec.request_id = "r" + std::to_string(next_id_.fetch_add(1, std::memory_order_relaxed));
    (rec.target == Target::small ? routed_small_ : routed_large_).fetch_add(1, std::memory_order_relaxed);

    const auto& backend = rec.target == Target::small ? cfg_.small_backend : cfg_.large_backend;
    BackendReply reply = call_backend(backend, request.query_text, cfg_.request_timeout_ms);
    rec.backend_latency_ms = reply.latency_ms;
    rec.outcome = reply.outcome;
    if (reply.outcome == RouteOutcome::ok) {
        out.response_text = std::move(reply.text);
    } else {
        (reply.outcome == RouteOutcome::timeout ? timeouts_ : backend_errors_).fetch_add(1, std::memory_order_relaxed);
        out.error = std::move(reply.text);
    }
    log_record(rec, request);
    return out;
}

void Gateway::log_record(const RouteRecord& rec, const RouteRequest& request) {
    if (!cfg_.route_log_path) return;
    ordered_json j;
    j["request_id"] = rec.request_id;
    j["query_text"] = request.query_text;
    j["score"] = rec.score;
    j["threshold"] = rec.threshold;
    j["target"] = std::string(to_string(rec.target));
    j["backend_latency_ms"] = rec.backend_latency_ms;
    j["outcome"] = std::string(to_string(rec.outcome));
    const std::string line = j.dump() + "\n";
    std::lock_guard lock(log_mutex_);
    std::ofstream out(*cfg_.route_log_path, std::ios::binary | std::ios::app);
    out << line;
}

GatewayStats Gateway::stats() const {
    GatewayStats s;
    s.routed_small = routed_small_.load();
    s.routed_large = routed_large_.load();
    s.requests_total = s.routed_small + s.routed_large;
    if (s.requests_total > 0)
        s.realized_cost_advantage_pct = 100.0 * static_cast<double>(s.routed_small) / static_cast<double>(s.requests_total);
    s.backend_errors = backend_errors_.load();
    s.timeouts = timeouts_.load();
    s.rejected = rejected_.load();
    return s;
}

namespace {

ordered_json record_json(const RouteRecord& rec) {
    ordered_json j;
    j["request_id"] = rec.request_id;
    j["score"] = rec.score;
    j["threshold"] = rec.threshold;
    j["target"] = std::string(to_string(rec.target));
    j["backend_latency_ms"] = rec.backend_latency_ms;
    j["outcome"] = std::string(to_string(rec.outcome));
    return j;
}

void reply_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

RouteRequest parse_request(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error&) {
        throw InputError("request body is not valid JSON");
    }
    if (!j.is_object() || !j.contains("query_text") || !j["query_text"].is_string())
        throw InputError("request needs a string 'query_text'");
    RouteRequest r;
    r.query_text = j["query_text"].get<std::string>();
    if (j.contains("embedding") && !j["embedding"].is_null()) {
        if (!j["embedding"].is_array()) throw InputError("'embedding' must be an array of numbers");
        std::vector<double> e;
        for (const auto& v : j["embedding"]) {
            if (!v.is_number()) throw InputError("'embedding' must be an array of numbers");
            e.push_back(v.get<double>());
        }
        r.embedding = std::move(e);
    }
    return r;
}

}  // namespace

int Gateway::bind() {
    if (http_) throw Error("gateway already started");
    http_ = std::make_unique<Http>();
    auto& srv = http_->server;
    const std::size_t pool = cfg_.pool_size;
    srv.new_task_queue = [pool] { return new httplib::ThreadPool(pool); };

    auto guarded = [this](const httplib::Request& req, httplib::Response& res, auto&& body) {
        if (req.body.size() > cfg_.max_body_bytes) {
            note_rejected();
            reply_json(res, 413, {{"error", "request body exceeds " + std::to_string(cfg_.max_body_bytes) + " bytes"}});
            return;
        }
        try {
            body(parse_request(req.body));
        } catch (const InputError& e) {
            note_rejected();
            reply_json(res, 400, {{"error", e.what()}});
        }
    };

    srv.Post("/v1/route", [this, guarded](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [&](const RouteRequest& r) {
            RouteResponse out = handle_route(r);
            ordered_json j;
            j["response_text"] = out.response_text ? ordered_json(*out.response_text) : ordered_json(nullptr);
            if (out.error) j["error"] = *out.error;
            j["routing"] = record_json(out.routing);
            const int status = out.routing.outcome == RouteOutcome::ok        ? 200
                               : out.routing.outcome == RouteOutcome::timeout ? 504
                                                                              : 502;
            reply_json(res, status, j);
        });
    });
    srv.Post("/v1/dry-run", [this, guarded](const httplib::Request& req, httplib::Response& res) {
        guarded(req, res, [&](const RouteRequest& r) {
            const auto d = dry_run(r);
            reply_json(res, 200,
                       {{"score", d.score}, {"target", std::string(to_string(d.target))}, {"threshold", d.threshold}});
        });
    });
    srv.Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
        const auto s = stats();
        ordered_json j;
        j["requests_total"] = s.requests_total;
        j["routed_small"] = s.routed_small;
        j["routed_large"] = s.routed_large;
        j["realized_cost_advantage_pct"] =
            s.realized_cost_advantage_pct ? ordered_json(*s.realized_cost_advantage_pct) : ordered_json(nullptr);
        j["error_counts"] = {{"backend_error", s.backend_errors}, {"timeout", s.timeouts}, {"rejected", s.rejected}};
        reply_json(res, 200, j);
    });
    srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { reply_json(res, 200, {{"status", "ok"}}); });

    int port = cfg_.listen_port;
    if (port == 0) {
        port = srv.bind_to_any_port(cfg_.listen_host);
    } else if (!srv.bind_to_port(cfg_.listen_host, port)) {
        port = -1;
    }
    if (port < 0) {
        http_.reset();
        throw ConfigError("cannot bind " + cfg_.listen_host + ":" + std::to_string(cfg_.listen_port));
    }
    return port;
}

int Gateway::start() {
    const int port = bind();
    http_->thread = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    return port;
}

void Gateway::serve_blocking() {
    bind();
    http_->server.listen_after_bind();
}

void Gateway::stop() {
    if (!http_) return;
    http_->server.stop();
    if (http_->thread.joinable()) http_->thread.join();
    http_.reset();
}

struct EchoMockServer::Http {
    httplib::Server server;
    std::thread thread;
};

EchoMockServer::EchoMockServer(std::string name, bool fail, std::string host)
    : name_(std::move(name)), fail_(fail), host_(std::move(host)) {}

EchoMockServer::~EchoMockServer() { stop(); }

std::string EchoMockServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

int EchoMockServer::bind(int port) {
    if (http_) throw Error("mock backend already started");
    http_ = std::make_unique<Http>();
    auto& srv = http_->server;
    srv.Post("/v1/echo", [this](const httplib::Request&, httplib::Response& res) {
        requests_.fetch_add(1);
        if (fail_) {
            reply_json(res, 500, {{"error", name_ + " is failing"}});
            return;
        }
        reply_json(res, 200, {{"response_text", name_}, {"backend", name_}});
    });
    srv.Post("/v1/chat/completions", [this](const httplib::Request&, httplib::Response& res) {
        requests_.fetch_add(1);
        if (fail_) {
            reply_json(res, 500, {{"error", {{"message", name_ + " is failing"}}}});
            return;
        }
        ordered_json j;
        j["id"] = "chatcmpl-mock";
        j["object"] = "chat.completion";
        j["model"] = name_;
        j["choices"] = ordered_json::array(
            {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", name_}}}, {"finish_reason", "stop"}}});
        reply_json(res, 200, j);
    });
    port_ = port == 0 ? srv.bind_to_any_port(host_) : (srv.bind_to_port(host_, port) ? port : -1);
    if (port_ < 0) {
        http_.reset();
        throw ConfigError("mock backend cannot bind " + host_ + ":" + std::to_string(port));
    }
    return port_;
}

int EchoMockServer::start(int port) {
    bind(port);
    http_->thread = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    return port_;
}

void EchoMockServer::serve_blocking(int port) {
    bind(port);
    http_->server.listen_after_bind();
}

void EchoMockServer::stop() {
    if (!http_) return;
    http_->server.stop();
    if (http_->thread.joinable()) http_->thread.join();
    http_.reset();
}

}  // namespace hybridroute
