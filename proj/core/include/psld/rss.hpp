#pragma once

#include "psld/dataset.hpp"
#include "psld/numerics.hpp"

#include <vector>

namespace psld {

/// One random subgraph: the node subset, its restricted series, and the
/// double-sliced adjacency E[I][:, I].
struct SubgraphBatch {
    std::vector<std::size_t> node_index;
    SeriesStore series;  // rows follow node_index
    Matrix e_sub;

    std::vector<WindowPair> windows(std::size_t l_in, std::size_t l_out, SplitRange split) const {
        return make_windows(series, l_in, l_out, split);
    }
};

/// Sizes of the contiguous groups: n_nodes / n_subgraphs each, with the
/// remainder added to the last group.
std::vector<std::size_t> rss_group_sizes(std::size_t n_nodes, std::size_t n_subgraphs);

/// Random Subgraph Sampling. Shuffles the node order when `training`, keeps
/// identity order otherwise, then cuts it into `n_subgraphs` groups.
std::vector<SubgraphBatch> rss_partition(const SeriesStore& store, std::size_t n_subgraphs,
                                         bool training, Rng& rng);

// --- Aggregation estimator ---------------------------------------------------

enum class NormMode { target_degree, symmetric_sqrt };

struct GraphSpec {
    std::vector<std::vector<std::size_t>> neighbors;  // sorted, deduplicated
    Matrix features;                                  // n_nodes x d
    Matrix weight;                                    // d x d'
    NormMode norm_mode = NormMode::target_degree;

    std::size_t n_nodes() const noexcept { return neighbors.size(); }
    void validate() const;
};

/// Inclusion probability per node.
struct SampleDesign {
    std::vector<double> inclusion_prob;

    static SampleDesign uniform(std::size_t n_nodes, double p) {
        return {std::vector<double>(n_nodes, p)};
    }
};

double normalization_constant(const GraphSpec& g, std::size_t v, std::size_t u);

/// A(v) = sum_{u in N(v)} (1 / C_vu) W h_u, returned as a row of length d'.
/// An isolated node aggregates to the zero vector.
std::vector<double> aggregate_true(const GraphSpec& g, std::size_t v);

/// Horvitz-Thompson estimate over the sampled neighbours:
/// sum_{u in N(v)} 1[u sampled] / (C_vu P(u)) W h_u.
std::vector<double> aggregate_sampled(const GraphSpec& g, std::size_t v,
                                      const std::vector<bool>& sampled,
                                      const SampleDesign& design);
std::vector<double> aggregate_sampled(const GraphSpec& g, std::size_t v,
                                      std::span<const std::size_t> sampled_set,
                                      const SampleDesign& design);

struct UnbiasednessReport {
    std::size_t nodes = 0;
    std::size_t trials = 0;
    std::vector<double> rel_err;  // per node
    std::vector<double> z;        // per node, max over output coordinates
    double max_rel_err = 0.0;
    double max_z = 0.0;
    bool reliable = true;  // false below kMinReliableTrials
    bool pass = false;     // max_z <= z_bound

    std::vector<std::vector<double>> mc_mean;  // per node estimator mean
};

inline constexpr double kUnbiasedZBound = 5.0;
inline constexpr std::size_t kMinReliableTrials = 100;

/// Draws independent Bernoulli(P(u)) inclusion for every node per trial
/// (trial t uses rng.split(t)), averages aggregate_sampled and compares it
/// with aggregate_true.
UnbiasednessReport unbiasedness_mc_check(const GraphSpec& g, const SampleDesign& design,
                                         std::size_t n_trials, const Rng& rng,
                                         double z_bound = kUnbiasedZBound);

/// Connected random graph: a ring plus each remaining pair with probability
/// `edge_prob`; N(0,1) features and weights.
GraphSpec random_graph(std::size_t n_nodes, std::size_t d_in, std::size_t d_out,
                       double edge_prob, Rng& rng);

/// Node 0 joined to `leaves` leaf nodes; unit features and W = [1].
GraphSpec star_graph(std::size_t leaves);

} // namespace psld
