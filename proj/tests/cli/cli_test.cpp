#include "doctest.h"

#include "cli/commands.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using psld::cli::run;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
    nlohmann::json json() const { return nlohmann::json::parse(out); }
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "psld_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream f(p);
    std::size_t n = 0;
    for (std::string line; std::getline(f, line);) ++n;
    return n;
}

// Small dataset shared by the train / eval cases.
const fs::path& small_dataset() {
    static const fs::path dir = [] {
        const auto d = scratch("data");
        REQUIRE(invoke({"synth", "--nodes", "8", "--length", "120", "--seed", "1", "--out", d.string()}).code == 0);
        return d;
    }();
    return dir;
}

std::vector<std::string> small_train(const fs::path& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> a{"train", "--data", (small_dataset() / "series.csv").string(),
                               "--adjacency", (small_dataset() / "adjacency.csv").string(),
                               "--out", out.string(), "--l-in", "12", "--l-out", "6",
                               "--n-sub", "2", "--epochs", "2", "--hidden", "16",
                               "--skip-mlp-baseline"};
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes an 8 x 120 series and is reproducible") {
    const auto a = scratch("synth_a"), b = scratch("synth_b");
    REQUIRE(invoke({"synth", "--nodes", "8", "--length", "120", "--seed", "1", "--out", a.string()}).code == 0);
    REQUIRE(invoke({"synth", "--nodes", "8", "--length", "120", "--seed", "1", "--out", b.string()}).code == 0);
    CHECK(count_lines(a / "series.csv") == 8);
    std::ifstream f(a / "series.csv");
    std::string first;
    std::getline(f, first);
    CHECK(std::count(first.begin(), first.end(), ',') == 120);  // id column plus 120 values
    CHECK(slurp(a / "series.csv") == slurp(b / "series.csv"));
    CHECK(slurp(a / "adjacency.csv") == slurp(b / "adjacency.csv"));
    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["command"] == "synth");
    CHECK(manifest["seed"] == 1);
}

TEST_CASE("synth rejects short series") {
    const auto r = invoke({"synth", "--length", "10", "--out", scratch("short").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("64") != std::string::npos);
}

TEST_CASE("synth reports unwritable output") {
    const auto blocker = scratch("blocked") / "file";
    std::ofstream(blocker) << "x";
    CHECK(invoke({"synth", "--out", (blocker / "sub").string()}).code == 2);
}

TEST_CASE("usage errors exit 1") {
    CHECK(invoke({}).code == 1);
    CHECK(invoke({"nonsense"}).code == 1);
    CHECK(invoke({"gradcheck", "--decomposer", "fft"}).code == 1);
    CHECK(invoke({"rss-check", "--prob", "0"}).code == 1);
    CHECK(invoke({"rss-check", "--prob", "1.5"}).code == 1);
    CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("train writes every artifact and the metrics schema") {
    const auto out = scratch("train");
    const auto r = invoke(small_train(out));
    REQUIRE(r.code == 0);
    for (const char* f : {"manifest.json", "model.psld", "model.psld.json", "metrics.json", "epochs.csv"})
        CHECK(fs::exists(out / f));
    const auto m = nlohmann::json::parse(slurp(out / "metrics.json"));
    std::vector<std::string> keys;
    for (const auto& [k, v] : m.items()) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    CHECK(keys == std::vector<std::string>{"baselines", "config", "epochs", "seed", "test"});
    CHECK(m["test"].contains("mse"));
    CHECK(m["test"].contains("mae"));
    CHECK(m["baselines"].contains("last_value"));
    CHECK(count_lines(out / "epochs.csv") == 3);

    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["inputs"].size() == 2);
    CHECK(manifest["inputs"][0]["sha256"] == psld::cli::sha256_file((small_dataset() / "series.csv").string()));
    CHECK(manifest["status"] == "ok");
}

TEST_CASE("default hyperparameters are echoed in the manifest") {
    const auto out = scratch("defaults");
    const auto r = invoke({"train", "--data", (small_dataset() / "series.csv").string(), "--out",
                           out.string(), "--l-in", "12", "--l-out", "6", "--n-sub", "2"});
    // 8 nodes cannot host 24 subgraphs, so n-sub is lowered; the rest stay default.
    REQUIRE(r.code == 0);
    const auto c = nlohmann::json::parse(slurp(out / "manifest.json"))["config"];
    CHECK(c["hidden"] == 128);
    CHECK(c["dropout"] == 0.05);
    CHECK(c["lr"] == 1e-4);
    CHECK(c["epochs"] == 10);
    CHECK(c["lambda"] == 1.0);
}

TEST_CASE("lambda 0 keeps the component loss out of the total") {
    const auto out = scratch("lambda0");
    REQUIRE(invoke(small_train(out, {"--lambda", "0"})).code == 0);
    std::ifstream f(out / "epochs.csv");
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
        std::stringstream ss(line);
        std::string epoch, total, cbn, cpn;
        std::getline(ss, epoch, ',');
        std::getline(ss, total, ',');
        std::getline(ss, cbn, ',');
        std::getline(ss, cpn, ',');
        CHECK(std::abs(std::stod(total) - std::stod(cbn)) <= 1e-12);
        CHECK(std::stod(cpn) > 0.0);
    }
}

TEST_CASE("stl kernels are recorded") {
    const auto out = scratch("stl");
    REQUIRE(invoke(small_train(out, {"--decomposer", "stl", "--kappa-t", "25", "--kappa-s", "7"})).code == 0);
    const auto c = nlohmann::json::parse(slurp(out / "manifest.json"))["config"];
    CHECK(c["decomposer"] == "stl");
    CHECK(c["kappa_t"] == 25);
    CHECK(c["kappa_s"] == 7);
}

TEST_CASE("config file sits beneath explicit flags") {
    const auto out = scratch("config");
    const auto cfg = out / "run.cfg";
    std::ofstream(cfg) << "# comment\nhidden = 8\nlambda=0.5\nepochs=5\n";
    REQUIRE(invoke(small_train(out / "run", {"--config", cfg.string()})).code == 0);
    const auto c = nlohmann::json::parse(slurp(out / "run" / "manifest.json"))["config"];
    CHECK(c["hidden"] == 16);     // flag wins
    CHECK(c["epochs"] == 2);      // flag wins
    CHECK(c["lambda"] == 0.5);    // from file

    std::ofstream(out / "bad.cfg") << "no_such_key=1\n";
    const auto r = invoke(small_train(out / "bad", {"--config", (out / "bad.cfg").string()}));
    CHECK(r.code == 1);
    CHECK(r.err.find("no-such-key") != std::string::npos);
}

TEST_CASE("invalid flag combinations name the flag") {
    const auto out = scratch("invalid");
    auto r = invoke(small_train(out, {"--kappa-t", "4", "--decomposer", "stl"}));
    CHECK(r.code == 1);
    CHECK(r.err.find("--kappa-t") != std::string::npos);
    r = invoke(small_train(out, {"--dropout", "1"}));
    CHECK(r.code == 1);
    CHECK(r.err.find("--dropout") != std::string::npos);
    auto args = small_train(out);
    args[8] = "40";  // l-in
    r = invoke(args);
    CHECK(r.code == 1);
    CHECK(r.err.find("--l-in") != std::string::npos);
}

TEST_CASE("train is byte-for-byte reproducible") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    REQUIRE(invoke(small_train(a, {"--seed", "9"})).code == 0);
    REQUIRE(invoke(small_train(b, {"--seed", "9"})).code == 0);
    CHECK(slurp(a / "metrics.json") == slurp(b / "metrics.json"));
    CHECK(slurp(a / "model.psld") == slurp(b / "model.psld"));
    CHECK(slurp(a / "epochs.csv") == slurp(b / "epochs.csv"));
}

TEST_CASE("eval reproduces the training-time test metrics") {
    const auto out = scratch("eval");
    REQUIRE(invoke(small_train(out)).code == 0);
    const auto m = nlohmann::json::parse(slurp(out / "metrics.json"));
    const auto dump = out / "pred.csv";
    const auto r = invoke({"eval", "--checkpoint", (out / "model.psld").string(), "--data",
                           (small_dataset() / "series.csv").string(), "--dump-predictions", dump.string()});
    REQUIRE(r.code == 0);
    const auto e = r.json();
    CHECK(e["mse"] == m["test"]["mse"]);
    CHECK(e["mae"] == m["test"]["mae"]);
    // header + windows x l_out x D
    const std::size_t windows = e["windows"];
    CHECK(count_lines(dump) == 1 + windows * 6 * 8);

    const auto d = invoke({"eval", "--checkpoint", (out / "model.psld").string(), "--data",
                           (small_dataset() / "series.csv").string(), "--denormalized"});
    REQUIRE(d.code == 0);
    CHECK(d.json()["denormalized"] == true);
    CHECK(d.json()["mse"] != e["mse"]);
}

TEST_CASE("eval rejects corrupt or mismatched checkpoints") {
    const auto out = scratch("eval_bad");
    REQUIRE(invoke(small_train(out)).code == 0);
    const auto ckpt = out / "model.psld";
    const std::string data = (small_dataset() / "series.csv").string();

    {
        std::string bytes = slurp(ckpt);
        bytes[0] = 'X';
        std::ofstream(out / "bad.psld", std::ios::binary) << bytes;
        fs::copy_file(out / "model.psld.json", out / "bad.psld.json");
        const auto r = invoke({"eval", "--checkpoint", (out / "bad.psld").string(), "--data", data});
        CHECK(r.code == 2);
        CHECK(r.err.find("bad magic") != std::string::npos);
    }
    {
        auto side = nlohmann::json::parse(slurp(out / "model.psld.json"));
        side["config"]["hidden"] = 17;
        fs::copy_file(ckpt, out / "shape.psld");
        std::ofstream(out / "shape.psld.json") << side.dump();
        CHECK(invoke({"eval", "--checkpoint", (out / "shape.psld").string(), "--data", data}).code == 2);
    }
    CHECK(invoke({"eval", "--checkpoint", (out / "missing.psld").string(), "--data", data}).code == 2);
}

TEST_CASE("rss-check") {
    auto r = invoke({"rss-check", "--prob", "1.0", "--nodes", "20", "--trials", "200"});
    REQUIRE(r.code == 0);
    auto j = r.json();
    CHECK(j["max_rel_err"] == 0.0);
    CHECK(j["pass"] == true);
    std::vector<std::string> keys;
    const auto ordered = nlohmann::ordered_json::parse(r.out);
    for (const auto& [k, v] : ordered.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"nodes", "trials", "max_rel_err", "max_z", "pass"});

    r = invoke({"rss-check", "--trials", "10"});
    CHECK(r.code == 0);
    CHECK(r.err.find("unreliable") != std::string::npos);
    CHECK(r.json()["trials"] == 10);

    r = invoke({"rss-check", "--nodes", "50", "--trials", "20000", "--prob", "0.5", "--seed", "0"});
    CHECK(r.code == 0);
    CHECK(r.json()["max_z"].get<double>() <= 5.0);
}

TEST_CASE("gradcheck subcommand") {
    for (const char* dec : {"mvd", "stl"})
        for (const char* mode : {"separate", "merged"}) {
            const auto r = invoke({"gradcheck", "--decomposer", dec, "--mode", mode, "--seed", "2"});
            CHECK(r.code == 0);
            const auto j = r.json();
            CHECK(j["max_rel_err"].get<double>() <= 1e-4);
            CHECK(j["per_group"].contains("combinator"));
        }
}

} // TEST_SUITE
