#include "psld/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace psld {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::vector<std::string_view> nonblank_lines(const std::string& text) {
    std::vector<std::string_view> lines;
    std::string_view rest(text);
    while (!rest.empty()) {
        const auto pos = rest.find('\n');
        auto line = rest.substr(0, pos);
        if (!trim(line).empty()) lines.push_back(line);
        if (pos == std::string_view::npos) break;
        rest.remove_prefix(pos + 1);
    }
    return lines;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void SeriesStore::validate() const {
    if (values.rows() < 1) throw FormatError("SeriesStore: need at least one node");
    if (values.cols() < 2) throw FormatError("SeriesStore: need at least two timesteps");
    if (!node_ids.empty() && node_ids.size() != values.rows())
        throw FormatError("SeriesStore: node id count does not match node count");
    for (const auto& e : adjacency) {
        if (e.src >= n_nodes() || e.dst >= n_nodes())
            throw FormatError("SeriesStore: edge (" + std::to_string(e.src) + "," +
                              std::to_string(e.dst) + ") out of range");
        if (e.src == e.dst && !allow_self_loops)
            throw FormatError("SeriesStore: self-loop on node " + std::to_string(e.src));
    }
}

Matrix dense_adjacency(const SeriesStore& store) {
    Matrix e(store.n_nodes(), store.n_nodes());
    for (const auto& edge : store.adjacency) e(edge.src, edge.dst) = edge.weight;
    return e;
}

SeriesStore select_nodes(const SeriesStore& store, std::span<const std::size_t> nodes) {
    SeriesStore out;
    out.values = Matrix(nodes.size(), store.length());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i] >= store.n_nodes())
            throw ShapeError("select_nodes: index " + std::to_string(nodes[i]) +
                             " out of range");
        auto src = store.values.row_span(nodes[i]);
        std::copy(src.begin(), src.end(), out.values.row_span(i).begin());
        if (!store.node_ids.empty()) out.node_ids.push_back(store.node_ids[nodes[i]]);
    }
    return out;
}

SeriesStore parse_series_csv(const std::string& text) {
    const auto lines = nonblank_lines(text);
    if (lines.empty()) throw FormatError("series CSV: empty file");

    // An id column is present when the first token of the first row is not numeric.
    const bool has_ids = !parse_double(split_commas(lines.front()).front()).has_value();

    SeriesStore store;
    std::vector<double> data;
    std::size_t width = 0;
    for (std::size_t r = 0; r < lines.size(); ++r) {
        auto cells = split_commas(lines[r]);
        std::size_t first = 0;
        if (has_ids) {
            store.node_ids.emplace_back(cells.front());
            first = 1;
        }
        const std::size_t n = cells.size() - first;
        if (r == 0) {
            width = n;
        } else if (n != width) {
            throw FormatError("series CSV: row " + std::to_string(r + 1) + " has " +
                              std::to_string(n) + " values, expected " +
                              std::to_string(width));
        }
        for (std::size_t c = first; c < cells.size(); ++c) {
            const auto v = parse_double(cells[c]);
            if (!v) {
                throw FormatError("series CSV: non-numeric cell '" + std::string(cells[c]) +
                                  "' at row " + std::to_string(r + 1) + ", column " +
                                  std::to_string(c + 1));
            }
            data.push_back(*v);
        }
    }
    store.values = Matrix(lines.size(), width, std::move(data));
    return store;
}

std::vector<Edge> parse_adjacency_csv(const std::string& text, bool undirected) {
    std::vector<Edge> edges;
    const auto lines = nonblank_lines(text);
    for (std::size_t r = 0; r < lines.size(); ++r) {
        const auto cells = split_commas(lines[r]);
        if (cells.size() != 2 && cells.size() != 3) {
            throw FormatError("adjacency CSV: line " + std::to_string(r + 1) +
                              " must be src,dst[,weight]");
        }
        std::size_t idx[2] = {0, 0};
        for (int k = 0; k < 2; ++k) {
            const auto s = cells[k];
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), idx[k]);
            if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
                throw FormatError("adjacency CSV: bad node index '" + std::string(s) +
                                  "' on line " + std::to_string(r + 1));
            }
        }
        double w = 1.0;
        if (cells.size() == 3) {
            const auto v = parse_double(cells[2]);
            if (!v) {
                throw FormatError("adjacency CSV: bad weight '" + std::string(cells[2]) +
                                  "' on line " + std::to_string(r + 1));
            }
            w = *v;
        }
        edges.push_back({idx[0], idx[1], w});
        if (undirected && idx[0] != idx[1]) edges.push_back({idx[1], idx[0], w});
    }
    return edges;
}

SeriesStore load_csv(const std::filesystem::path& path,
                     const std::optional<std::filesystem::path>& adjacency_path) {
    SeriesStore store = parse_series_csv(read_file(path));
    if (adjacency_path) store.adjacency = parse_adjacency_csv(read_file(*adjacency_path));
    store.validate();
    return store;
}

void save_csv(const SeriesStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < store.n_nodes(); ++i) {
        if (!store.node_ids.empty()) out << store.node_ids[i] << ',';
        auto row = store.values.row_span(i);
        for (std::size_t t = 0; t < row.size(); ++t) {
            if (t) out << ',';
            out << format_double(row[t]);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void save_adjacency_csv(const SeriesStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& e : store.adjacency) {
        if (e.src > e.dst) continue;
        out << e.src << ',' << e.dst << ',' << format_double(e.weight) << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

SeriesStore generate_synthetic(std::size_t n_nodes, std::size_t l_data, Rng& rng,
                               const SynthOptions& options) {
    if (n_nodes < 1) throw std::invalid_argument("generate_synthetic: n_nodes must be >= 1");
    if (l_data < 64)
        throw std::invalid_argument("generate_synthetic: l_data must be >= 64, got " +
                                    std::to_string(l_data));

    constexpr double two_pi = 2.0 * std::numbers::pi;
    SeriesStore store;
    store.values = Matrix(n_nodes, l_data);
    std::vector<std::pair<double, double>> pos(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const double a = rng.uniform(0.5, 2.0);
        const double long_period = rng.uniform(80.0, 160.0);
        const double short_period = rng.uniform(12.0, 24.0);
        const double slope = rng.uniform(-1.0, 1.0);
        pos[i] = {rng.uniform(), rng.uniform()};
        auto row = store.values.row_span(i);
        for (std::size_t t = 0; t < l_data; ++t) {
            const double td = static_cast<double>(t);
            const double envelope =
                options.amplitude_modulation ? 1.0 + 0.5 * std::sin(two_pi * td / long_period)
                                             : 1.0;
            double v = a * envelope * std::sin(two_pi * td / short_period);
            if (options.trend) v += slope * td / static_cast<double>(l_data);
            // Draw noise even when sigma is zero so the stream layout is fixed.
            v += options.noise_sigma * rng.normal();
            row[t] = v;
        }
        store.node_ids.push_back("n" + std::to_string(i));
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
        for (std::size_t j = i + 1; j < n_nodes; ++j) {
            const double dx = pos[i].first - pos[j].first;
            const double dy = pos[i].second - pos[j].second;
            if (std::sqrt(dx * dx + dy * dy) < options.radius) {
                store.adjacency.push_back({i, j, 1.0});
                store.adjacency.push_back({j, i, 1.0});
            }
        }
    }
    std::sort(store.adjacency.begin(), store.adjacency.end(),
              [](const Edge& a, const Edge& b) {
                  return a.src != b.src ? a.src < b.src : a.dst < b.dst;
              });
    return store;
}

NormStats fit_norm_stats(const SeriesStore& store, std::size_t train_len) {
    if (train_len < 2)
        throw std::invalid_argument("fit_norm_stats: train_len must be >= 2");
    if (train_len > store.length())
        throw std::invalid_argument("fit_norm_stats: train_len exceeds series length");
    NormStats stats;
    const double n = static_cast<double>(train_len);
    for (std::size_t i = 0; i < store.n_nodes(); ++i) {
        auto row = store.values.row_span(i).first(train_len);
        double sum = 0.0;
        for (double v : row) sum += v;
        const double mu = sum / n;
        double ss = 0.0;
        for (double v : row) ss += (v - mu) * (v - mu);
        stats.mu.push_back(mu);
        stats.sigma.push_back(std::sqrt(ss / n));
    }
    return stats;
}

namespace {
void check_stats(const SeriesStore& store, const NormStats& stats, const char* op) {
    if (stats.mu.size() != store.n_nodes() || stats.sigma.size() != store.n_nodes()) {
        throw ShapeError(std::string(op) + ": stats cover " + std::to_string(stats.mu.size()) +
                         " nodes, store has " + std::to_string(store.n_nodes()));
    }
}
} // namespace

SeriesStore apply_norm(const SeriesStore& store, const NormStats& stats, double sigma_floor) {
    check_stats(store, stats, "apply_norm");
    SeriesStore out = store;
    for (std::size_t i = 0; i < store.n_nodes(); ++i) {
        const double s = std::max(stats.sigma[i], sigma_floor);
        for (double& v : out.values.row_span(i)) v = (v - stats.mu[i]) / s;
    }
    return out;
}

SeriesStore denormalize(const SeriesStore& store, const NormStats& stats, double sigma_floor) {
    check_stats(store, stats, "denormalize");
    SeriesStore out = store;
    for (std::size_t i = 0; i < store.n_nodes(); ++i) {
        const double s = std::max(stats.sigma[i], sigma_floor);
        for (double& v : out.values.row_span(i)) v = v * s + stats.mu[i];
    }
    return out;
}

SplitPlan split_by_ratio(std::size_t l_data, double train, double val, double test) {
    const double total = train + val + test;
    if (!(train > 0.0) || val < 0.0 || test < 0.0 || !(total > 0.0))
        throw std::invalid_argument("split_by_ratio: ratios must be non-negative, train > 0");
    const auto n_train =
        static_cast<std::size_t>(std::floor(static_cast<double>(l_data) * train / total));
    const auto n_val =
        static_cast<std::size_t>(std::floor(static_cast<double>(l_data) * val / total));
    SplitPlan plan;
    plan.train = {0, n_train};
    plan.val = {n_train, n_train + n_val};
    plan.test = {n_train + n_val, l_data};
    return plan;
}

WindowPair window_at(const SeriesStore& store, std::size_t l_in, std::size_t l_out,
                     std::size_t t0) {
    const std::size_t d = store.n_nodes();
    WindowPair w{Matrix(l_in, d), Matrix(l_out, d), t0};
    for (std::size_t node = 0; node < d; ++node) {
        auto row = store.values.row_span(node);
        for (std::size_t k = 0; k < l_in; ++k) w.x(k, node) = row[t0 + k];
        for (std::size_t k = 0; k < l_out; ++k) w.y(k, node) = row[t0 + l_in + k];
    }
    return w;
}

std::vector<WindowPair> make_windows(const SeriesStore& store, std::size_t l_in,
                                     std::size_t l_out, SplitRange split) {
    if (l_in < 1 || l_out < 1)
        throw std::invalid_argument("make_windows: l_in and l_out must be >= 1");
    if (split.end > store.length() || split.begin > split.end)
        throw std::invalid_argument("make_windows: split outside the series");
    if (l_in + l_out > split.length()) {
        throw std::invalid_argument("make_windows: split of length " +
                                    std::to_string(split.length()) + " needs at least " +
                                    std::to_string(l_in + l_out) + " timesteps");
    }
    const std::size_t n = window_count(split.length(), l_in, l_out);
    std::vector<WindowPair> out;
    out.reserve(n);
    for (std::size_t t = 0; t < n; ++t) out.push_back(window_at(store, l_in, l_out, split.begin + t));
    return out;
}

} // namespace psld
