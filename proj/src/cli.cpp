#include "hybridroute/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "hybridroute/dataset.hpp"
#include "hybridroute/errors.hpp"
#include "hybridroute/evaluation.hpp"
#include "hybridroute/gateway.hpp"
#include "hybridroute/kernels.hpp"
#include "hybridroute/labeling.hpp"
#include "hybridroute/policy.hpp"
#include "hybridroute/router.hpp"
#include "hybridroute/synth.hpp"
#include "json.hpp"

namespace hybridroute::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    int threads = 0;
    bool quiet = false;
    std::string out_dir;

    fs::path output(const std::string& p) const {
        fs::path path(p);
        if (out_dir.empty() || path.is_absolute()) return path;
        fs::create_directories(out_dir);
        return fs::path(out_dir) / path;
    }
};

void note(const Globals& g, const std::string& msg) {
    if (!g.quiet) std::cerr << msg << '\n';
}

std::vector<double> parse_grid(const std::string& spec, const std::vector<QuerySample>& train,
                               const std::string& metric) {
    if (spec == "auto") return default_t_grid(train, metric);
    std::vector<double> grid;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            grid.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InputError("bad --t-grid entry '" + item + "'");
        }
    }
    if (grid.empty()) throw InputError("--t-grid is empty");
    return grid;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct LabelArgs {
    std::string dataset;
    std::string metric = "bart_score";
    std::string scheme = "prob";
    std::optional<double> t;
    std::string t_grid = "auto";
    std::string split = "train";
};

void add_label_flags(CLI::App* cmd, LabelArgs& a) {
    cmd->add_option("--dataset", a.dataset, "Dataset file (one JSON record per line)")->required();
    cmd->add_option("--metric", a.metric, "Quality metric used for labels")->capture_default_str();
    cmd->add_option("--scheme", a.scheme, "Label scheme")
        ->check(CLI::IsMember({"det", "prob", "trans", "deterministic", "probabilistic", "transformed"}))
        ->capture_default_str();
    cmd->add_option("--t", a.t, "Relaxation offset for --scheme trans (skips the grid search)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--t-grid", a.t_grid, "Grid for the t* search: 'auto' or a comma-separated list")
        ->capture_default_str();
    cmd->add_option("--split", a.split, "Split to label")
        ->check(CLI::IsMember({"train", "validation", "test"}))
        ->capture_default_str();
}

/// Resolves the scheme, running the t* search when needed.
LabelScheme resolve_scheme(const LabelArgs& a, const std::vector<QuerySample>& samples, const Globals& g) {
    const LabelKind kind = parse_label_kind(a.scheme);
    if (kind != LabelKind::transformed) return {kind, 0.0};
    if (a.t) return LabelScheme::transformed(*a.t);
    const auto grid = parse_grid(a.t_grid, samples, a.metric);
    const auto res = find_t_star(samples, a.metric, grid);
    note(g, "t* = " + fmt(res.t_star) + " over " + std::to_string(grid.size()) + " grid points");
    return LabelScheme::transformed(res.t_star);
}

std::vector<QuerySample> load_split(const std::string& path, const std::string& split, const std::string& metric) {
    const Dataset d = load_dataset(path, std::set<std::string>{metric});
    auto samples = split_view(d, parse_split(split));
    if (samples.empty()) throw InputError("split '" + split + "' of '" + path + "' is empty");
    return samples;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Cost-aware small/large LLM query router"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads for parallel stages (0 = runtime default)")
        ->check(CLI::NonNegativeNumber);
    app.add_flag("--quiet", g.quiet, "Suppress progress messages");
    app.add_option("--out-dir", g.out_dir, "Directory for relative output paths");
    app.fallthrough();

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset with planted ground truth");
    std::string preset;
    std::size_t synth_n = 0;
    std::string synth_out = "dataset.jsonl";
    synth_cmd->add_option("--preset", preset, "separable | gap_correlated | symmetric_random")
        ->required()
        ->check(CLI::IsMember({"separable", "gap_correlated", "symmetric_random"}));
    synth_cmd->add_option("--n", synth_n, "Number of queries")->required()->check(CLI::PositiveNumber);
    synth_cmd->add_option("--out", synth_out, "Output dataset file")->capture_default_str();

    // labels
    auto* labels_cmd = app.add_subcommand("labels", "Compute training labels for one scheme");
    LabelArgs label_args;
    std::string labels_out = "labels.jsonl";
    add_label_flags(labels_cmd, label_args);
    labels_cmd->add_option("--out", labels_out, "Output label file")->capture_default_str();

    // find-t
    auto* findt_cmd = app.add_subcommand("find-t", "Grid search for the relaxation offset t*");
    std::string findt_dataset;
    std::string findt_metric = "bart_score";
    std::string findt_grid = "auto";
    std::string findt_split = "train";
    std::string findt_out = "t_star.json";
    std::string findt_csv;
    findt_cmd->add_option("--dataset", findt_dataset, "Dataset file")->required();
    findt_cmd->add_option("--metric", findt_metric, "Quality metric")->capture_default_str();
    findt_cmd->add_option("--t-grid", findt_grid, "'auto' or a comma-separated list")->capture_default_str();
    findt_cmd->add_option("--split", findt_split, "Split to search on")
        ->check(CLI::IsMember({"train", "validation", "test"}))
        ->capture_default_str();
    findt_cmd->add_option("--out", findt_out, "Output JSON with t* and the objective curve")->capture_default_str();
    findt_cmd->add_option("--csv", findt_csv, "Optional CSV of the objective curve (t,objective)");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a router");
    LabelArgs train_labels;
    TrainHyper hyper;
    FeaturizerConfig fcfg;
    std::string featurizer = "hashed";
    bool no_lowercase = false;
    std::string train_out = "model.json";
    add_label_flags(train_cmd, train_labels);
    train_cmd->add_option("--epochs", hyper.epochs, "Training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--lr", hyper.learning_rate, "Initial learning rate (decays as lr/sqrt(epoch))")
        ->capture_default_str();
    train_cmd->add_option("--l2", hyper.l2, "L2 penalty on the weights")->capture_default_str();
    train_cmd->add_option("--batch-size", hyper.batch_size, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
    train_cmd->add_option("--dim", fcfg.dim, "Feature dimension (hash buckets or embedding length)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--featurizer", featurizer, "hashed | embedding")
        ->check(CLI::IsMember({"hashed", "embedding", "hashed_ngrams", "external_embedding"}))
        ->capture_default_str();
    train_cmd->add_option("--ngram-min", fcfg.ngram_min, "Shortest word n-gram")->capture_default_str();
    train_cmd->add_option("--ngram-max", fcfg.ngram_max, "Longest word n-gram")->capture_default_str();
    train_cmd->add_option("--hash-seed", fcfg.hash_seed, "Feature hash seed")->capture_default_str();
    train_cmd->add_flag("--no-lowercase", no_lowercase, "Keep token case");
    train_cmd->add_flag("--select-checkpoint", hyper.select_checkpoint,
                        "Keep the epoch with the lowest validation-split BCE");
    train_cmd->add_option("--out", train_out, "Output model artifact")->capture_default_str();

    // calibrate
    auto* cal_cmd = app.add_subcommand("calibrate", "Choose a routing threshold under a quality-drop limit");
    std::string cal_model;
    std::string cal_dataset;
    std::string cal_metric = "bart_score";
    double cal_max_drop = 1.0;
    std::size_t cal_samples = kDefaultCalibrationSamples;
    std::string cal_split = "validation";
    std::string cal_out;
    cal_cmd->add_option("--model", cal_model, "Model artifact to calibrate")->required();
    cal_cmd->add_option("--dataset", cal_dataset, "Dataset file")->required();
    cal_cmd->add_option("--metric", cal_metric, "Quality metric")->capture_default_str();
    cal_cmd->add_option("--max-drop-pct", cal_max_drop, "Largest allowed quality drop vs all-at-large, in %")
        ->capture_default_str();
    cal_cmd->add_option("--val-samples", cal_samples, "Seeded subsample size (0 = whole split)")->capture_default_str();
    cal_cmd->add_option("--split", cal_split, "Calibration split")
        ->check(CLI::IsMember({"train", "validation", "test"}))
        ->capture_default_str();
    cal_cmd->add_option("--out", cal_out, "Output model artifact (default: update --model in place)");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Tradeoff curve, gap differences, and baselines");
    std::string eval_model;
    std::string eval_dataset;
    std::string eval_metric = "bart_score";
    std::string eval_alt_metric;
    std::string eval_split = "test";
    std::string eval_out = "report.json";
    std::string eval_csv;
    std::string pair_name;
    eval_cmd->add_option("--model", eval_model, "Model artifact")->required();
    eval_cmd->add_option("--dataset", eval_dataset, "Dataset file")->required();
    eval_cmd->add_option("--metric", eval_metric, "Metric the router was trained on")->capture_default_str();
    eval_cmd->add_option("--eval-metric", eval_alt_metric, "Evaluate under this metric instead (adds gap correlations)");
    eval_cmd->add_option("--split", eval_split, "Evaluation split")
        ->check(CLI::IsMember({"train", "validation", "test"}))
        ->capture_default_str();
    eval_cmd->add_option("--out", eval_out, "Report JSON")->capture_default_str();
    eval_cmd->add_option("--csv", eval_csv, "Tradeoff curve CSV");
    eval_cmd->add_option("--pair-name", pair_name, "Label for the model pair in the report");

    // route
    auto* route_cmd = app.add_subcommand("route", "Offline routing decisions for a dataset split");
    std::string route_model;
    std::string route_dataset;
    std::optional<double> route_threshold;
    std::optional<double> route_max_drop;
    std::string route_metric = "bart_score";
    std::string route_split = "test";
    std::string route_out = "decisions.jsonl";
    route_cmd->add_option("--model", route_model, "Model artifact")->required();
    route_cmd->add_option("--dataset", route_dataset, "Dataset file")->required();
    route_cmd->add_option("--threshold", route_threshold, "Explicit threshold (score > threshold goes small)")
        ->check(CLI::Range(0.0, 1.0));
    route_cmd->add_option("--max-drop-pct", route_max_drop, "Use the calibrated threshold for this limit");
    route_cmd->add_option("--metric", route_metric, "Metric keying the calibration table")->capture_default_str();
    route_cmd->add_option("--split", route_split, "Split to route")
        ->check(CLI::IsMember({"train", "validation", "test"}))
        ->capture_default_str();
    route_cmd->add_option("--out", route_out, "Decision file (one JSON record per line)")->capture_default_str();

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP routing gateway");
    std::string serve_config;
    serve_cmd->add_option("--config", serve_config, "Gateway config (JSON)")->required();

    // mock-backend
    auto* mock_cmd = app.add_subcommand("mock-backend", "Run an echo backend that answers with its name");
    std::string mock_name = "mock";
    int mock_port = 0;
    std::string mock_host = "127.0.0.1";
    bool mock_fail = false;
    mock_cmd->add_option("--name", mock_name, "Name returned in every response")->capture_default_str();
    mock_cmd->add_option("--port", mock_port, "Port to listen on")->required();
    mock_cmd->add_option("--host", mock_host, "Interface to bind")->capture_default_str();
    mock_cmd->add_flag("--fail", mock_fail, "Answer every request with HTTP 500");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        kernels::set_threads(g.threads);

        if (synth_cmd->parsed()) {
            const Dataset d = synth(parse_synth_preset(preset), synth_n, g.seed);
            const auto path = g.output(synth_out);
            save_dataset(d, path);
            note(g, "wrote " + std::to_string(d.samples.size()) + " queries to " + path.string());
        } else if (labels_cmd->parsed()) {
            const auto samples = load_split(label_args.dataset, label_args.split, label_args.metric);
            const LabelScheme scheme = resolve_scheme(label_args, samples, g);
            const auto labels = build_labels(samples, label_args.metric, scheme);
            const auto path = g.output(labels_out);
            save_labels(labels, scheme, path);
            note(g, "wrote " + std::to_string(labels.size()) + " labels to " + path.string());
        } else if (findt_cmd->parsed()) {
            const auto samples = load_split(findt_dataset, findt_split, findt_metric);
            const auto grid = parse_grid(findt_grid, samples, findt_metric);
            const auto res = find_t_star(samples, findt_metric, grid);
            ordered_json j;
            j["metric"] = findt_metric;
            j["t_star"] = res.t_star;
            j["curve"] = ordered_json::array();
            std::string csv = "t,objective\n";
            for (const auto& [t, obj] : res.curve) {
                j["curve"].push_back({{"t", t}, {"objective", obj}});
                char buf[96];
                std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t, obj);
                csv += buf;
            }
            write_text_file(g.output(findt_out), j.dump(2) + "\n");
            if (!findt_csv.empty()) write_text_file(g.output(findt_csv), csv);
            note(g, "t* = " + fmt(res.t_star));
        } else if (train_cmd->parsed()) {
            fcfg.kind = parse_featurizer_kind(featurizer);
            fcfg.lowercase = !no_lowercase;
            hyper.seed = g.seed;
            validate(fcfg);
            const Dataset d = load_dataset(train_labels.dataset, std::set<std::string>{train_labels.metric});
            const auto samples = split_view(d, parse_split(train_labels.split));
            if (samples.empty()) throw InputError("split '" + train_labels.split + "' is empty");
            const LabelScheme scheme = resolve_scheme(train_labels, samples, g);
            auto examples = build_labels(samples, train_labels.metric, scheme);
            attach_features(examples, samples, fcfg);
            std::vector<LabeledExample> validation;
            if (hyper.select_checkpoint) {
                const auto val_samples = split_view(d, Split::validation);
                if (val_samples.empty()) throw InputError("--select-checkpoint needs a validation split");
                validation = build_labels(val_samples, train_labels.metric, scheme);
                attach_features(validation, val_samples, fcfg);
            }
            RouterModel m = train(examples, fcfg, hyper, scheme, validation);
            m.meta.metric = train_labels.metric;
            const auto path = g.output(train_out);
            save_model(m, path);
            note(g, "trained " + std::string(to_string(scheme.kind)) + " router, final loss " +
                        fmt(m.meta.final_loss) + ", wrote " + path.string());
        } else if (cal_cmd->parsed()) {
            RouterModel m = load_model(cal_model);
            auto samples = load_split(cal_dataset, cal_split, cal_metric);
            if (cal_samples > 0) samples = subsample(samples, cal_samples, g.seed);
            const auto scores = score_all(m, samples);
            const auto res = calibrate_threshold(samples, scores, cal_metric, cal_max_drop);
            CalibrationEntry e;
            e.metric = cal_metric;
            e.max_drop_pct = cal_max_drop;
            e.threshold = res.threshold;
            e.achieved_drop_pct = res.achieved_drop_pct;
            e.achieved_cost_advantage_pct = res.achieved_cost_advantage_pct;
            e.feasible = res.feasible;
            e.val_samples = samples.size();
            e.seed = g.seed;
            m.set_threshold(e);
            const auto path = cal_out.empty() ? fs::path(cal_model) : g.output(cal_out);
            save_model(m, path);
            if (!res.feasible) note(g, "warning: no threshold meets the drop limit; falling back to all-at-large");
            note(g, "threshold " + fmt(res.threshold) + ": drop " + fmt(res.achieved_drop_pct) +
                        "%, cost advantage " + fmt(res.achieved_cost_advantage_pct) + "% on " +
                        std::to_string(samples.size()) + " samples");
        } else if (eval_cmd->parsed()) {
            const RouterModel m = load_model(eval_model);
            std::set<std::string> metrics{eval_metric};
            if (!eval_alt_metric.empty()) metrics.insert(eval_alt_metric);
            const Dataset d = load_dataset(eval_dataset, metrics);
            const auto samples = split_view(d, parse_split(eval_split));
            if (samples.empty()) throw InputError("split '" + eval_split + "' is empty");
            const auto scores = score_all(m, samples);
            const EvaluationReport r =
                eval_alt_metric.empty()
                    ? evaluate(scores, samples, eval_metric, g.seed, pair_name)
                    : cross_metric_report(scores, samples, eval_metric, eval_alt_metric, g.seed, pair_name);
            write_text_file(g.output(eval_out), report_to_json(r));
            if (!eval_csv.empty()) write_text_file(g.output(eval_csv), curve_to_csv(r.points));
            note(g, "evaluated " + std::to_string(samples.size()) + " queries, " + std::to_string(r.points.size()) +
                        " curve points; all-at-small drop " + fmt(r.all_small_drop_pct) + "%");
        } else if (route_cmd->parsed()) {
            const RouterModel m = load_model(route_model);
            double threshold = 0.0;
            if (route_threshold) {
                threshold = *route_threshold;
            } else {
                const auto* e = m.find_threshold(route_metric, route_max_drop);
                if (e == nullptr) throw InputError("no --threshold given and no matching calibration entry");
                threshold = e->threshold;
            }
            const Dataset d = load_dataset(route_dataset);
            const auto samples = split_view(d, parse_split(route_split));
            if (samples.empty()) throw InputError("split '" + route_split + "' is empty");
            const auto scores = score_all(m, samples);
            const auto decisions = route_all(samples, scores, threshold);
            std::string out;
            for (const auto& dec : decisions) {
                ordered_json j;
                j["query_id"] = dec.query_id;
                j["target"] = std::string(to_string(dec.target));
                j["score"] = *dec.score;
                j["threshold"] = threshold;
                out += j.dump() + "\n";
            }
            write_text_file(g.output(route_out), out);
            std::cout << "cost_advantage_pct " << fmt(cost_advantage_pct(decisions)) << '\n';
        } else if (serve_cmd->parsed()) {
            const auto cfg = load_gateway_config(serve_config);
            auto gw = Gateway::from_config(cfg);
            note(g, "serving on " + cfg.listen_host + ":" + std::to_string(cfg.listen_port) + " with threshold " +
                        fmt(gw->threshold()));
            gw->serve_blocking();
        } else if (mock_cmd->parsed()) {
            EchoMockServer mock(mock_name, mock_fail, mock_host);
            note(g, "mock backend '" + mock_name + "' on " + mock_host + ":" + std::to_string(mock_port));
            mock.serve_blocking(mock_port);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("hybridroute");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace hybridroute::cli
