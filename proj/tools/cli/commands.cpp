#include "commands.hpp"

#include "psld/checkpoint.hpp"
#include "psld/gradcheck.hpp"
#include "psld/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#ifndef PSLD_VERSION
#define PSLD_VERSION "0.0.0"
#endif

namespace psld::cli {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSeriesFile = "series.csv";
constexpr const char* kAdjacencyFile = "adjacency.csv";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kCheckpointFile = "model.psld";
constexpr const char* kMetricsFile = "metrics.json";
constexpr const char* kEpochLogFile = "epochs.csv";

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

ordered_json read_json(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    try {
        return ordered_json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

ordered_json metrics_json(const Metrics& m) { return {{"mse", m.mse}, {"mae", m.mae}}; }

ordered_json config_json(const TrainConfig& c) {
    return {
        {"l_in", c.l_in},
        {"l_out", c.l_out},
        {"decomposer", to_string(c.decomposer.kind)},
        {"mode", to_string(c.mode)},
        {"hidden", c.hidden},
        {"dropout", c.dropout},
        {"lr", c.lr},
        {"lambda", c.lambda},
        {"epochs", c.epochs},
        {"n_subgraphs", c.n_subgraphs},
        {"windows_per_step", c.windows_per_step},
        {"seed", c.seed},
        {"epsilon", c.decomposer.mvd.epsilon},
        {"kappa_t", c.decomposer.stl.kappa_t},
        {"kappa_s", c.decomposer.stl.kappa_s},
        {"sigma_floor", c.sigma_floor},
        {"train_ratio", c.train_ratio},
        {"val_ratio", c.val_ratio},
        {"test_ratio", c.test_ratio},
    };
}

TrainConfig config_from_json(const ordered_json& j) {
    TrainConfig c;
    try {
        c.l_in = j.at("l_in").get<std::size_t>();
        c.l_out = j.at("l_out").get<std::size_t>();
        c.decomposer.kind = decomposer_from_string(j.at("decomposer").get<std::string>());
        c.mode = head_mode_from_string(j.at("mode").get<std::string>());
        c.hidden = j.at("hidden").get<std::size_t>();
        c.dropout = j.at("dropout").get<double>();
        c.lr = j.at("lr").get<double>();
        c.lambda = j.at("lambda").get<double>();
        c.epochs = j.at("epochs").get<std::size_t>();
        c.n_subgraphs = j.at("n_subgraphs").get<std::size_t>();
        c.windows_per_step = j.at("windows_per_step").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.decomposer.mvd.epsilon = j.at("epsilon").get<double>();
        c.decomposer.stl.kappa_t = j.at("kappa_t").get<std::size_t>();
        c.decomposer.stl.kappa_s = j.at("kappa_s").get<std::size_t>();
        c.sigma_floor = j.at("sigma_floor").get<double>();
        c.train_ratio = j.at("train_ratio").get<double>();
        c.val_ratio = j.at("val_ratio").get<double>();
        c.test_ratio = j.at("test_ratio").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint sidecar: ") + e.what());
    }
    return c;
}

ordered_json input_digest(const std::string& path) {
    return {{"path", path}, {"sha256", sha256_file(path)}, {"bytes", fs::file_size(path)}};
}

struct Manifest {
    fs::path path;
    ordered_json doc;

    Manifest(fs::path p, const std::string& command, const std::vector<std::string>& args)
        : path(std::move(p)) {
        doc["command"] = command;
        doc["argv"] = args;
        doc["version"] = PSLD_VERSION;
        doc["started_at"] = utc_now();
    }
    void write() const { write_json(path, doc); }
    void finish() {
        doc["finished_at"] = utc_now();
        write();
    }
};

// --- synth -------------------------------------------------------------------

struct SynthArgs {
    std::size_t nodes = 64;
    std::size_t length = 600;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
    if (a.length < 64) throw UsageError("--length: generator needs at least 64 timesteps, got " + std::to_string(a.length));
    if (a.nodes < 1) throw UsageError("--nodes must be >= 1");
    const fs::path dir(a.out);
    ensure_dir(dir);

    Manifest manifest(dir / kManifestFile, "synth", argv);
    manifest.doc["config"] = {{"nodes", a.nodes}, {"length", a.length}};
    manifest.doc["seed"] = a.seed;
    manifest.doc["inputs"] = ordered_json::array();
    manifest.doc["outputs"] = {{"series", (dir / kSeriesFile).string()},
                               {"adjacency", (dir / kAdjacencyFile).string()}};
    manifest.write();

    Rng rng(a.seed);
    const auto store = generate_synthetic(a.nodes, a.length, rng);
    save_csv(store, dir / kSeriesFile);
    save_adjacency_csv(store, dir / kAdjacencyFile);
    manifest.finish();

    out << ordered_json{{"nodes", a.nodes}, {"length", a.length}, {"edges", store.adjacency.size()},
                        {"outputs", manifest.doc["outputs"]}}
               .dump(2)
        << "\n";
    return kExitOk;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
    TrainConfig config;
    std::string decomposer = "mvd";
    std::string mode = "separate";
    std::string data;
    std::string adjacency;
    std::string out;
    bool skip_mlp_baseline = false;
};

void check_train_flags(TrainArgs& a) {
    TrainConfig& c = a.config;
    c.decomposer.kind = decomposer_from_string(a.decomposer);
    c.mode = head_mode_from_string(a.mode);
    if (c.hidden < 1) throw UsageError("--hidden must be >= 1");
    if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw UsageError("--dropout must be in [0, 1)");
    if (!(c.lr >= 0.0)) throw UsageError("--lr must be >= 0");
    if (!(c.lambda >= 0.0)) throw UsageError("--lambda must be >= 0");
    if (c.epochs < 1) throw UsageError("--epochs must be >= 1");
    if (c.n_subgraphs < 1) throw UsageError("--n-sub must be >= 1");
    if (c.windows_per_step < 1) throw UsageError("--windows-per-step must be >= 1");
    if (c.l_in < 1) throw UsageError("--l-in must be >= 1");
    if (c.l_out < 1) throw UsageError("--l-out must be >= 1");
    if (!(c.decomposer.mvd.epsilon > 0.0)) throw UsageError("--epsilon must be > 0");
    if (c.decomposer.stl.kappa_t % 2 == 0) throw UsageError("--kappa-t must be odd");
    if (c.decomposer.stl.kappa_s % 2 == 0) throw UsageError("--kappa-s must be odd");
}

void check_against_data(const TrainConfig& c, const SeriesStore& raw) {
    if (c.n_subgraphs > raw.n_nodes())
        throw UsageError("--n-sub " + std::to_string(c.n_subgraphs) + " exceeds the " +
                         std::to_string(raw.n_nodes()) + " nodes in the dataset");
    const auto plan = split_by_ratio(raw.length(), c.train_ratio, c.val_ratio, c.test_ratio);
    const std::size_t need = c.l_in + c.l_out;
    for (const auto* r : {&plan.train, &plan.val, &plan.test})
        if (r->length() < need)
            throw UsageError("--l-in/--l-out: each split needs at least " + std::to_string(need) +
                             " timesteps, the shortest has " + std::to_string(r->length()));
}

std::string epoch_log_csv(const std::vector<EpochReport>& epochs) {
    std::string s = "epoch,train_total,train_cbn,train_cpn,val_mse,val_mae\n";
    for (const auto& e : epochs) {
        s += std::to_string(e.epoch) + "," + fmt_double(e.train_total) + "," + fmt_double(e.train_cbn) +
             "," + fmt_double(e.train_cpn) + "," + fmt_double(e.val.mse) + "," + fmt_double(e.val.mae) +
             "\n";
    }
    return s;
}

int cmd_train(TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out,
              std::ostream& err) {
    check_train_flags(a);
    const TrainConfig& c = a.config;
    const fs::path dir(a.out);
    ensure_dir(dir);

    Manifest manifest(dir / kManifestFile, "train", argv);
    manifest.doc["config"] = config_json(c);
    manifest.doc["seed"] = c.seed;
    ordered_json inputs = ordered_json::array();
    inputs.push_back(input_digest(a.data));
    if (!a.adjacency.empty()) inputs.push_back(input_digest(a.adjacency));
    manifest.doc["inputs"] = inputs;
    const fs::path ckpt = dir / kCheckpointFile;
    manifest.doc["outputs"] = {{"checkpoint", ckpt.string()},
                               {"checkpoint_sidecar", ckpt.string() + ".json"},
                               {"metrics", (dir / kMetricsFile).string()},
                               {"epoch_log", (dir / kEpochLogFile).string()}};
    manifest.write();

    const auto raw = a.adjacency.empty() ? load_csv(a.data) : load_csv(a.data, a.adjacency);
    check_against_data(c, raw);
    const auto data = prepare_data(raw, c);

    TrainResult<PsldParams> result;
    try {
        result = train(data, c);
    } catch (const TrainingAborted& e) {
        err << ordered_json{{"error", "training aborted"}, {"message", e.what()},
                            {"epoch", e.epoch}, {"batch", e.batch}}
                   .dump(2)
            << "\n";
        manifest.doc["status"] = "aborted";
        manifest.finish();
        return kExitRuntime;
    }

    const Metrics test = evaluate(result.params, data, c, Split::test);
    ordered_json baselines;
    baselines["last_value"] = metrics_json(baseline_last_value(data, c, Split::test));
    if (!a.skip_mlp_baseline) baselines["plain_mlp"] = metrics_json(baseline_plain_mlp(data, c));

    write_checkpoint(ckpt, named_tensors(std::as_const(result.params)));
    ordered_json shapes;
    for (const auto& t : named_tensors(std::as_const(result.params)))
        shapes[t.name] = {t.value->rows(), t.value->cols()};
    write_json(ckpt.string() + ".json",
               ordered_json{{"format", kCheckpointMagic}, {"config", config_json(c)}, {"tensors", shapes}});

    ordered_json log = ordered_json::array();
    for (const auto& e : result.epochs)
        log.push_back({{"epoch", e.epoch},
                       {"train_total", e.train_total},
                       {"train_cbn", e.train_cbn},
                       {"train_cpn", e.train_cpn},
                       {"val", metrics_json(e.val)}});
    const ordered_json metrics{{"config", config_json(c)},
                               {"epochs", {{"count", result.epochs.size()},
                                           {"best", result.best_epoch},
                                           {"log", log}}},
                               {"test", metrics_json(test)},
                               {"baselines", baselines},
                               {"seed", c.seed}};
    write_json(dir / kMetricsFile, metrics);
    write_text(dir / kEpochLogFile, epoch_log_csv(result.epochs));
    manifest.doc["status"] = "ok";
    manifest.finish();

    out << ordered_json{{"test", metrics_json(test)}, {"baselines", baselines},
                        {"best_epoch", result.best_epoch}}
               .dump(2)
        << "\n";
    return kExitOk;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string adjacency;
    std::string split = "test";
    std::string dump_predictions;
    bool denormalized = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const Split split = a.split == "train" ? Split::train : a.split == "val" ? Split::val : Split::test;
    const auto stored = read_checkpoint(a.checkpoint);
    const auto sidecar = read_json(a.checkpoint + ".json");
    if (!sidecar.contains("config")) throw FormatError("checkpoint sidecar has no config");
    const TrainConfig c = config_from_json(sidecar["config"]);

    Rng unused(0);
    PsldParams params = init_params(c.model_shape(), unused);
    assign_stored(stored, named_tensors(params));

    const auto raw = a.adjacency.empty() ? load_csv(a.data) : load_csv(a.data, a.adjacency);
    const auto data = prepare_data(raw, c);
    auto windows = make_windows(data.normalized, c.l_in, c.l_out, data.range(split));
    auto preds = predict_windows(params, data, c, split);

    if (a.denormalized) {
        const std::size_t d = raw.n_nodes();
        auto rescale = [&](Matrix& m) {
            for (std::size_t t = 0; t < m.rows(); ++t)
                for (std::size_t j = 0; j < d; ++j)
                    m(t, j) = m(t, j) * std::max(data.stats.sigma[j], c.sigma_floor) + data.stats.mu[j];
        };
        for (auto& w : windows) rescale(w.y);
        for (auto& p : preds) rescale(p);
    }
    const Metrics m = metrics_from_predictions(windows, preds);

    if (!a.dump_predictions.empty()) {
        std::ofstream f(a.dump_predictions, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + a.dump_predictions + " for writing");
        f << "t0,node,step,y,y_hat\n";
        for (std::size_t w = 0; w < windows.size(); ++w)
            for (std::size_t j = 0; j < raw.n_nodes(); ++j) {
                const std::string node = raw.node_ids.empty() ? std::to_string(j) : raw.node_ids[j];
                for (std::size_t t = 0; t < c.l_out; ++t)
                    f << windows[w].t0 << ',' << node << ',' << t << ',' << fmt_double(windows[w].y(t, j))
                      << ',' << fmt_double(preds[w](t, j)) << '\n';
            }
        if (!f) throw std::runtime_error("write failed: " + a.dump_predictions);
    }

    out << ordered_json{{"split", to_string(split)},
                        {"mse", m.mse},
                        {"mae", m.mae},
                        {"windows", windows.size()},
                        {"denormalized", a.denormalized}}
               .dump(2)
        << "\n";
    return kExitOk;
}

// --- rss-check ---------------------------------------------------------------

struct RssArgs {
    std::size_t nodes = 50;
    std::size_t trials = 20000;
    double prob = 0.5;
    std::uint64_t seed = 0;
};

int cmd_rss_check(const RssArgs& a, std::ostream& out, std::ostream& err) {
    if (!(a.prob > 0.0 && a.prob <= 1.0))
        throw UsageError("--prob must be in (0, 1], got " + fmt_double(a.prob));
    if (a.nodes < 3) throw UsageError("--nodes must be >= 3");
    if (a.trials < 2) throw UsageError("--trials must be >= 2");
    if (a.trials < kMinReliableTrials)
        err << "warning: " << a.trials << " trials is below " << kMinReliableTrials
            << "; the 5-sigma bound is unreliable\n";

    const auto setup = rss_check_setup(a.nodes, a.prob, a.seed);
    const auto report = unbiasedness_mc_check(setup.graph, setup.design, a.trials, setup.mc_rng);
    out << ordered_json{{"nodes", report.nodes},
                        {"trials", report.trials},
                        {"max_rel_err", report.max_rel_err},
                        {"max_z", report.max_z},
                        {"pass", report.pass}}
               .dump(2)
        << "\n";
    return report.pass ? kExitOk : kExitRuntime;
}

// --- gradcheck ---------------------------------------------------------------

struct GradArgs {
    std::string decomposer = "mvd";
    std::string mode = "separate";
    std::uint64_t seed = 0;
};

int cmd_gradcheck(const GradArgs& a, std::ostream& out) {
    GradcheckConfig cfg;
    cfg.kind = decomposer_from_string(a.decomposer);
    cfg.mode = head_mode_from_string(a.mode);
    cfg.seed = a.seed;
    const auto report = run_gradcheck(cfg);
    ordered_json groups;
    for (const auto& [name, worst] : report.per_group) groups[name] = worst;
    out << ordered_json{{"decomposer", a.decomposer},
                        {"mode", a.mode},
                        {"seed", a.seed},
                        {"max_rel_err", report.max_rel_err},
                        {"worst_tensor", report.worst_tensor},
                        {"checked", report.n_checked},
                        {"tolerance", cfg.tolerance},
                        {"per_group", groups},
                        {"pass", report.pass}}
               .dump(2)
        << "\n";
    return report.pass ? kExitOk : kExitRuntime;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") + 1 - b);
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
}

// Expands `--config FILE` into explicit flags for every key the command line
// does not already set.
std::vector<std::string> merge_config_file(std::vector<std::string> args, const CLI::App& sub) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
            path = args[i + 1];
            args.erase(args.begin() + long(i), args.begin() + long(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + long(i));
            break;
        }
    }
    if (path.empty()) return args;

    std::ifstream f(path);
    if (!f) throw UsageError("--config: cannot read " + path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> extra;
    while (std::getline(f, line)) {
        ++line_no;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("--config: line " + std::to_string(line_no) + " is not key=value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
            value = value.substr(1, value.size() - 2);
        for (char& ch : key)
            if (ch == '_') ch = '-';
        const std::string flag = "--" + key;
        const CLI::Option* opt = sub.get_option_no_throw(flag);
        if (opt == nullptr || key == "config")
            throw UsageError("--config: unknown key '" + key + "' on line " + std::to_string(line_no));
        if (has_flag(args, flag)) continue;
        if (opt->get_type_size() == 0) {
            if (value == "true" || value == "1") extra.push_back(flag);
            else if (value != "false" && value != "0")
                throw UsageError("--config: " + key + " expects true or false");
        } else {
            extra.push_back(flag);
            extra.push_back(value);
        }
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

} // namespace

RssCheckSetup rss_check_setup(std::size_t nodes, double prob, std::uint64_t seed) {
    const Rng root(seed);
    Rng graph_rng = root.split(0);
    auto graph = random_graph(nodes, 4, 2, 0.1, graph_rng);
    return {std::move(graph), SampleDesign::uniform(nodes, prob), root.split(1)};
}

std::string sha256_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 init failed");
    char buf[1 << 16];
    while (f.read(buf, sizeof buf) || f.gcount() > 0)
        EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(f.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Progressive label-decomposition forecasting toolkit", "psld"};
    app.require_subcommand(1);
    app.set_version_flag("--version", PSLD_VERSION);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic multi-node dataset");
    s->add_option("--nodes", synth.nodes, "Number of nodes")->capture_default_str();
    s->add_option("--length", synth.length, "Timesteps per node (>= 64)")->capture_default_str();
    s->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
    s->add_option("--out", synth.out, "Output directory")->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a model and write checkpoint, metrics and logs");
    std::string config_file;
    t->add_option("--config", config_file, "key=value file; explicit flags take precedence");
    t->add_option("--data", tr.data, "Series CSV (one row per node)")->required()->check(CLI::ExistingFile);
    t->add_option("--adjacency", tr.adjacency, "Edge list CSV (src,dst[,weight])")->check(CLI::ExistingFile);
    t->add_option("--out", tr.out, "Output directory")->required();
    t->add_option("--decomposer", tr.decomposer, "mvd or stl")
        ->check(CLI::IsMember({"mvd", "stl"}))->capture_default_str();
    t->add_option("--mode", tr.mode, "separate or merged heads")
        ->check(CLI::IsMember({"separate", "merged"}))->capture_default_str();
    t->add_option("--l-in", tr.config.l_in, "Input window length")->capture_default_str();
    t->add_option("--l-out", tr.config.l_out, "Forecast horizon")->capture_default_str();
    t->add_option("--hidden", tr.config.hidden, "Hidden units per head")->capture_default_str();
    t->add_option("--dropout", tr.config.dropout, "Dropout rate")->capture_default_str();
    t->add_option("--lr", tr.config.lr, "ADAM learning rate")->capture_default_str();
    t->add_option("--lambda", tr.config.lambda, "Component loss weight")->capture_default_str();
    t->add_option("--epochs", tr.config.epochs, "Training epochs")->capture_default_str();
    t->add_option("--n-sub", tr.config.n_subgraphs, "Subgraphs per epoch")->capture_default_str();
    t->add_option("--windows-per-step", tr.config.windows_per_step, "Windows per optimisation step")
        ->capture_default_str();
    t->add_option("--seed", tr.config.seed, "RNG seed")->capture_default_str();
    t->add_option("--epsilon", tr.config.decomposer.mvd.epsilon, "MVD variance offset")->capture_default_str();
    t->add_option("--kappa-t", tr.config.decomposer.stl.kappa_t, "STL trend kernel (odd)")->capture_default_str();
    t->add_option("--kappa-s", tr.config.decomposer.stl.kappa_s, "STL seasonal kernel (odd)")
        ->capture_default_str();
    t->add_flag("--skip-mlp-baseline", tr.skip_mlp_baseline, "Do not train the plain MLP baseline");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    e->add_option("--checkpoint", ev.checkpoint, "Checkpoint written by train")->required();
    e->add_option("--data", ev.data, "Series CSV")->required()->check(CLI::ExistingFile);
    e->add_option("--adjacency", ev.adjacency, "Edge list CSV")->check(CLI::ExistingFile);
    e->add_option("--split", ev.split, "train, val or test")
        ->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();
    e->add_option("--dump-predictions", ev.dump_predictions, "Write per-window predictions CSV");
    e->add_flag("--denormalized", ev.denormalized, "Report metrics on the original scale");

    RssArgs rs;
    auto* r = app.add_subcommand("rss-check", "Monte-Carlo check of the sampled aggregation estimator");
    r->add_option("--nodes", rs.nodes, "Graph size")->capture_default_str();
    r->add_option("--trials", rs.trials, "Monte-Carlo trials")->capture_default_str();
    r->add_option("--prob", rs.prob, "Inclusion probability in (0, 1]")->capture_default_str();
    r->add_option("--seed", rs.seed, "RNG seed")->capture_default_str();

    GradArgs gr;
    auto* g = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
    g->add_option("--decomposer", gr.decomposer, "mvd or stl")
        ->check(CLI::IsMember({"mvd", "stl"}))->capture_default_str();
    g->add_option("--mode", gr.mode, "separate or merged heads")
        ->check(CLI::IsMember({"separate", "merged"}))->capture_default_str();
    g->add_option("--seed", gr.seed, "RNG seed")->capture_default_str();

    std::vector<std::string> effective = args;
    try {
        if (!args.empty() && args.front() == "train") effective = merge_config_file(args, *t);
    } catch (const UsageError& ue) {
        err << "usage error: " << ue.what() << "\n";
        return kExitUsage;
    }

    try {
        std::vector<std::string> reversed(effective.rbegin(), effective.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& pe) {
        const int code = app.exit(pe, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*s) return cmd_synth(synth, args, out);
        if (*t) return cmd_train(tr, effective, out, err);
        if (*e) return cmd_eval(ev, out);
        if (*r) return cmd_rss_check(rs, out, err);
        if (*g) return cmd_gradcheck(gr, out);
    } catch (const UsageError& ue) {
        err << "usage error: " << ue.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace psld::cli
