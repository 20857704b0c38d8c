#pragma once

#include "psld/numerics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace psld {

struct Edge {
    std::size_t src = 0;
    std::size_t dst = 0;
    double weight = 1.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Node x time value matrix with optional graph structure.
struct SeriesStore {
    Matrix values;                      // n_nodes rows, l_data cols
    std::vector<std::string> node_ids;  // empty when the CSV had no id column
    std::vector<Edge> adjacency;        // directed; undirected input adds both directions
    bool allow_self_loops = false;

    std::size_t n_nodes() const noexcept { return values.rows(); }
    std::size_t length() const noexcept { return values.cols(); }

    /// Throws FormatError when an invariant is violated.
    void validate() const;
};

/// Dense n_nodes x n_nodes weight matrix built from the edge list.
Matrix dense_adjacency(const SeriesStore& store);

/// Restricts values and node ids to `nodes` (in that order); edges are dropped.
SeriesStore select_nodes(const SeriesStore& store, std::span<const std::size_t> nodes);

SeriesStore load_csv(const std::filesystem::path& path,
                     const std::optional<std::filesystem::path>& adjacency_path = std::nullopt);

/// Values are written with 17 significant digits so load_csv restores them exactly.
void save_csv(const SeriesStore& store, const std::filesystem::path& path);
/// One "src,dst,weight" line per undirected pair (src <= dst).
void save_adjacency_csv(const SeriesStore& store, const std::filesystem::path& path);

SeriesStore parse_series_csv(const std::string& text);
std::vector<Edge> parse_adjacency_csv(const std::string& text, bool undirected = true);

struct SynthOptions {
    double noise_sigma = 0.1;
    bool amplitude_modulation = true;
    bool trend = true;
    double radius = 0.2;
};

/// Per node i:
///   s_i(t) = a_i (1 + 0.5 sin(2 pi t / P_i)) sin(2 pi t / p_i) + c_i t / l_data + sigma e(t)
/// with a_i ~ U[0.5, 2], P_i ~ U[80, 160], p_i ~ U[12, 24], c_i ~ U[-1, 1] and
/// e ~ N(0, 1). Nodes get a position in the unit square and are linked when
/// closer than `radius`.
SeriesStore generate_synthetic(std::size_t n_nodes, std::size_t l_data, Rng& rng,
                               const SynthOptions& options = {});

struct NormStats {
    std::vector<double> mu;
    std::vector<double> sigma;
};

inline constexpr double kDefaultSigmaFloor = 1e-8;

/// Per-node mean and population standard deviation over [0, train_len).
NormStats fit_norm_stats(const SeriesStore& store, std::size_t train_len);
SeriesStore apply_norm(const SeriesStore& store, const NormStats& stats,
                       double sigma_floor = kDefaultSigmaFloor);
SeriesStore denormalize(const SeriesStore& store, const NormStats& stats,
                        double sigma_floor = kDefaultSigmaFloor);

/// Half-open timestep range [begin, end).
struct SplitRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t length() const noexcept { return end - begin; }
};

struct SplitPlan {
    SplitRange train;
    SplitRange val;
    SplitRange test;
};

/// Chronological split by ratio (default 6:2:2). Rounding remainders go to test.
SplitPlan split_by_ratio(std::size_t l_data, double train = 0.6, double val = 0.2,
                         double test = 0.2);

struct WindowPair {
    Matrix x;  // l_in x n_nodes (time x node)
    Matrix y;  // l_out x n_nodes
    std::size_t t0 = 0;
};

inline std::size_t window_count(std::size_t split_len, std::size_t l_in, std::size_t l_out) {
    return split_len - l_in - l_out + 1;
}

/// Stride-1 windows fully inside `split`; t0 is absolute.
std::vector<WindowPair> make_windows(const SeriesStore& store, std::size_t l_in,
                                     std::size_t l_out, SplitRange split);

/// The single window starting at absolute timestep t0.
WindowPair window_at(const SeriesStore& store, std::size_t l_in, std::size_t l_out,
                     std::size_t t0);

} // namespace psld
