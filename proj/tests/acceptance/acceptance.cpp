// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include "cli/commands.hpp"

#include "psld/decomposition.hpp"
#include "psld/model.hpp"
#include "psld/rss.hpp"
#include "psld/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

using namespace psld;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool ok = o.pass && in_time;
    if (!ok) ++failures;
    std::printf("[%s] %d. %s: %s (%.2f s, budget %.0f s%s)\n", ok ? "PASS" : "FAIL", id, title,
                o.detail.c_str(), secs, budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Matrix random_rows(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& x : m.data()) x = 3.0 * rng.normal() + rng.uniform(-5.0, 5.0);
    return m;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
    std::ostringstream o, e;
    const int code = cli::run(args, o, e);
    if (out) *out = o.str();
    return code;
}

Outcome round_trips() {
    Rng rng(2024);
    double worst_mvd = 0.0, worst_stl = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Matrix y = random_rows(1, 36, rng);
        worst_mvd = std::max(worst_mvd, max_abs_diff(mvd_recombine(mvd_decompose(y)), y));
    }
    for (int i = 0; i < 1000; ++i) {
        const Matrix y = random_rows(1, 36, rng);
        worst_stl = std::max(worst_stl, max_abs_diff(stl_recombine(stl_decompose(y)), y));
    }
    return {worst_mvd <= 1e-12 && worst_stl <= 1e-12,
            "max error mvd " + fmt("%.3g", worst_mvd) + ", stl " + fmt("%.3g", worst_stl) + " (tol 1e-12)"};
}

Outcome gradients() {
    double worst = 0.0;
    int passed = 0, total = 0;
    for (const char* dec : {"mvd", "stl"})
        for (const char* mode : {"separate", "merged"})
            for (int seed = 0; seed < 20; ++seed) {
                std::string out;
                const int code = run_cli({"gradcheck", "--decomposer", dec, "--mode", mode, "--seed",
                                          std::to_string(seed)},
                                         &out);
                ++total;
                if (code == 0) ++passed;
                worst = std::max(worst, nlohmann::json::parse(out)["max_rel_err"].get<double>());
            }
    return {passed == total, std::to_string(passed) + "/" + std::to_string(total) +
                                 " runs pass, worst relative error " + fmt("%.3g", worst) + " (tol 1e-4)"};
}

Outcome merged_equivalence() {
    double worst_fwd = 0.0, worst_grad = 0.0;
    for (auto kind : {DecomposerKind::mvd, DecomposerKind::stl}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng rng(seed);
            ModelShape shape;
            shape.kind = kind;
            shape.l_in = 36;
            shape.l_out = 12;
            shape.hidden = 16;
            shape.dropout = 0.1;
            auto sep = init_params(shape, rng);
            for (auto& t : named_tensors(sep))
                if (t.name.ends_with(".bias"))
                    for (double& b : t.value->data()) b = rng.uniform(-0.1, 0.1);
            const auto merged = to_merged(sep);

            DecomposerConfig dcfg;
            dcfg.kind = kind;
            dcfg.stl = {9, 3, Padding::replicate};
            Matrix x(10, 36), y(10, 12);
            for (double& v : x.data()) v = rng.normal();
            for (double& v : y.data()) v = rng.normal();
            const auto xc = decompose(x, dcfg);
            const auto yc = decompose(y, dcfg);

            ForwardCache cs, cm;
            const Rng drop = rng.split(99);
            const auto os = forward(sep, xc, true, drop, &cs);
            const auto om = forward(merged, xc, true, drop, &cm);
            worst_fwd = std::max({worst_fwd, max_abs_diff(os.y_hat, om.y_hat), max_abs_diff(os.c1, om.c1),
                                  max_abs_diff(os.c2, om.c2), max_abs_diff(os.c3, om.c3)});

            auto gs = zeros_like(sep);
            auto gm = zeros_like(merged);
            loss_and_backward(sep, os, cs, yc, y, 1.0, gs);
            loss_and_backward(merged, om, cm, yc, y, 1.0, gm);

            std::vector<Head> ones = sep.heads;
            for (auto& h : ones)
                for (Matrix* m : {&h.learner.layer1.weight, &h.learner.layer1.bias, &h.learner.layer2.weight,
                                  &h.learner.layer2.bias, &h.predictor.weight, &h.predictor.bias})
                    std::fill(m->data().begin(), m->data().end(), 1.0);
            const Head mask = embed_block_diagonal(ones);
            const Head want = embed_block_diagonal(gs.heads);
            const Head& got = gm.heads[0];
            auto cmp = [&](const Matrix& w, const Matrix& g, const Matrix& pattern) {
                for (std::size_t i = 0; i < w.size(); ++i)
                    if (pattern.data()[i] != 0.0)
                        worst_grad = std::max(worst_grad, std::abs(w.data()[i] - g.data()[i]));
            };
            cmp(want.learner.layer1.weight, got.learner.layer1.weight, mask.learner.layer1.weight);
            cmp(want.learner.layer1.bias, got.learner.layer1.bias, mask.learner.layer1.bias);
            cmp(want.learner.layer2.weight, got.learner.layer2.weight, mask.learner.layer2.weight);
            cmp(want.learner.layer2.bias, got.learner.layer2.bias, mask.learner.layer2.bias);
            cmp(want.predictor.weight, got.predictor.weight, mask.predictor.weight);
            cmp(want.predictor.bias, got.predictor.bias, mask.predictor.bias);
            const auto ca = named_tensors(std::as_const(gs));
            const auto cb = named_tensors(std::as_const(gm));
            for (std::size_t i = 0; i < ca.size(); ++i)
                if (ca[i].name.rfind("combinator", 0) == 0)
                    for (std::size_t j = 0; j < cb.size(); ++j)
                        if (cb[j].name == ca[i].name)
                            worst_grad = std::max(worst_grad, max_abs_diff(*ca[i].value, *cb[j].value));
        }
    }
    return {worst_fwd <= 1e-10 && worst_grad <= 1e-10,
            "forward " + fmt("%.3g", worst_fwd) + ", gradients " + fmt("%.3g", worst_grad) + " (tol 1e-10)"};
}

Outcome rss_partition_law() {
    Rng rng(64);
    std::size_t partitions = 0;
    bool ok = true;
    for (std::size_t n = 1; n <= 64 && ok; ++n) {
        SeriesStore store;
        store.values = Matrix(n, 2);
        for (std::size_t i = 0; i < n; ++i) {
            store.values(i, 0) = double(i);
            for (std::size_t j = 0; j < n; ++j)
                if (i != j && rng.bernoulli(0.2)) store.adjacency.push_back({i, j, 1.0 + rng.uniform()});
        }
        const Matrix e = dense_adjacency(store);
        for (std::size_t s = 1; s <= n && ok; ++s)
            for (bool training : {false, true}) {
                const auto batches = rss_partition(store, s, training, rng);
                ++partitions;
                std::vector<std::size_t> all;
                for (const auto& b : batches) {
                    all.insert(all.end(), b.node_index.begin(), b.node_index.end());
                    for (std::size_t i = 0; i < b.node_index.size(); ++i) {
                        ok = ok && b.series.values(i, 0) == double(b.node_index[i]);
                        for (std::size_t j = 0; j < b.node_index.size(); ++j)
                            ok = ok && b.e_sub(i, j) == e(b.node_index[i], b.node_index[j]);
                    }
                }
                std::vector<std::size_t> sorted = all;
                std::sort(sorted.begin(), sorted.end());
                std::vector<std::size_t> expected(n);
                std::iota(expected.begin(), expected.end(), std::size_t{0});
                ok = ok && batches.size() == s && sorted == expected;
                if (!training) ok = ok && all == expected;
            }
    }
    return {ok, std::to_string(partitions) + " partitions checked"};
}

Outcome unbiasedness() {
    constexpr std::uint64_t seed = 0;
    const auto setup = cli::rss_check_setup(50, 0.5, seed);
    const auto full = unbiasedness_mc_check(setup.graph, setup.design, 20000, setup.mc_rng);
    const auto small = unbiasedness_mc_check(setup.graph, setup.design, 400, setup.mc_rng);
    const auto large = unbiasedness_mc_check(setup.graph, setup.design, 40000, setup.mc_rng);
    std::size_t shrunk = 0;
    for (std::size_t v = 0; v < 50; ++v)
        if (large.rel_err[v] < small.rel_err[v]) ++shrunk;
    const double frac = double(shrunk) / 50.0;
    return {full.max_z <= 5.0 && frac >= 0.9,
            "max z " + fmt("%.3f", full.max_z) + " at 20000 trials (bound 5); error shrinks 400 -> 40000 for " +
                std::to_string(shrunk) + "/50 nodes (need 90%)"};
}

Outcome ablation() {
    Rng data_rng(0);
    const auto raw = generate_synthetic(64, 600, data_rng);
    int psld_beats_plain = 0, both_beat_last = 0;
    std::string table;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TrainConfig c;
        c.seed = seed;
        const auto data = prepare_data(raw, c);
        const auto result = train(data, c);
        const double psld = evaluate(result.params, data, c, Split::test).mse;
        const double plain = baseline_plain_mlp(data, c).mse;
        const double last = baseline_last_value(data, c, Split::test).mse;
        if (psld < plain) ++psld_beats_plain;
        if (psld < last && plain < last) ++both_beat_last;
        table += (seed ? "; " : "") + fmt("psld %.3f", psld) + fmt(" mlp %.3f", plain) + fmt(" last %.3f", last);
    }
    return {psld_beats_plain >= 4 && both_beat_last >= 4,
            "PSLD < MLP in " + std::to_string(psld_beats_plain) + "/5, both < last value in " +
                std::to_string(both_beat_last) + "/5 [" + table + "]"};
}

fs::path standard_dataset() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "psld_acceptance" / "data";
        fs::remove_all(d);
        if (run_cli({"synth", "--out", d.string()}) != 0) throw std::runtime_error("synth failed");
        return d;
    }();
    return dir;
}

fs::path default_run(const std::string& name) {
    const auto out = fs::temp_directory_path() / "psld_acceptance" / name;
    fs::remove_all(out);
    const int code = run_cli({"train", "--data", (standard_dataset() / "series.csv").string(), "--adjacency",
                              (standard_dataset() / "adjacency.csv").string(), "--out", out.string()});
    if (code != 0) throw std::runtime_error("train exited with " + std::to_string(code));
    return out;
}

Outcome determinism() {
    const auto a = default_run("run_a");
    const auto b = default_run("run_b");
    const bool metrics = slurp(a / "metrics.json") == slurp(b / "metrics.json");
    const bool ckpt = slurp(a / "model.psld") == slurp(b / "model.psld");
    const bool log = slurp(a / "epochs.csv") == slurp(b / "epochs.csv");
    return {metrics && ckpt && log, std::string("metrics ") + (metrics ? "identical" : "DIFFER") +
                                        ", checkpoint " + (ckpt ? "identical" : "DIFFER") + ", epoch log " +
                                        (log ? "identical" : "DIFFER")};
}

Outcome hyperparameters() {
    const auto run = fs::temp_directory_path() / "psld_acceptance" / "run_a";
    if (!fs::exists(run / "manifest.json")) default_run("run_a");
    const auto c = nlohmann::json::parse(slurp(run / "manifest.json"))["config"];
    const bool ok = c["hidden"] == 128 && c["dropout"] == 0.05 && c["lr"] == 1e-4 && c["epochs"] == 10 &&
                    c["n_subgraphs"] == 24;
    return {ok, "manifest: hidden " + c["hidden"].dump() + ", dropout " + c["dropout"].dump() + ", lr " +
                    c["lr"].dump() + ", epochs " + c["epochs"].dump() + ", n_subgraphs " +
                    c["n_subgraphs"].dump()};
}

} // namespace

int main() {
    criterion(1, "decomposition round trips", 1, round_trips);
    criterion(2, "gradient check, 4 combinations x 20 seeds", 30, gradients);
    criterion(3, "merged / separate equivalence", 5, merged_equivalence);
    criterion(4, "RSS partition law", 10, rss_partition_law);
    criterion(5, "sampled aggregation is unbiased (Monte Carlo)", 60, unbiasedness);
    criterion(6, "ablation direction on synthetic data", 600, ablation);
    criterion(7, "train determinism", 600, determinism);
    criterion(8, "default hyperparameters in manifest", 60, hyperparameters);
    std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
