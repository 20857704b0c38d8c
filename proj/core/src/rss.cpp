#include "psld/rss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace psld {

std::vector<std::size_t> rss_group_sizes(std::size_t n_nodes, std::size_t n_subgraphs) {
    if (n_subgraphs < 1 || n_subgraphs > n_nodes) {
        throw std::invalid_argument("rss_partition: n_subgraphs must be in [1, " +
                                    std::to_string(n_nodes) + "], got " +
                                    std::to_string(n_subgraphs));
    }
    const std::size_t size = n_nodes / n_subgraphs;
    std::vector<std::size_t> sizes(n_subgraphs, size);
    sizes.back() += n_nodes - size * n_subgraphs;
    return sizes;
}

std::vector<SubgraphBatch> rss_partition(const SeriesStore& store, std::size_t n_subgraphs,
                                         bool training, Rng& rng) {
    const std::size_t n = store.n_nodes();
    const auto sizes = rss_group_sizes(n, n_subgraphs);

    std::vector<std::size_t> order;
    if (training) {
        order = shuffle_indices(n, rng);
    } else {
        order.resize(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
    }

    const Matrix e = dense_adjacency(store);
    std::vector<SubgraphBatch> batches;
    batches.reserve(n_subgraphs);
    std::size_t offset = 0;
    for (std::size_t size : sizes) {
        SubgraphBatch b;
        b.node_index.assign(order.begin() + static_cast<std::ptrdiff_t>(offset),
                            order.begin() + static_cast<std::ptrdiff_t>(offset + size));
        b.series = select_nodes(store, b.node_index);
        b.e_sub = Matrix(size, size);
        for (std::size_t i = 0; i < size; ++i)
            for (std::size_t j = 0; j < size; ++j)
                b.e_sub(i, j) = e(b.node_index[i], b.node_index[j]);
        batches.push_back(std::move(b));
        offset += size;
    }
    return batches;
}

void GraphSpec::validate() const {
    if (features.rows() != n_nodes())
        throw ShapeError("GraphSpec: features have " + std::to_string(features.rows()) +
                         " rows for " + std::to_string(n_nodes()) + " nodes");
    if (weight.rows() != features.cols())
        throw ShapeError("GraphSpec: weight " + weight.shape_string() +
                         " does not match feature width " + std::to_string(features.cols()));
    for (std::size_t v = 0; v < n_nodes(); ++v) {
        const auto& nb = neighbors[v];
        for (std::size_t k = 0; k < nb.size(); ++k) {
            if (nb[k] >= n_nodes())
                throw std::invalid_argument("GraphSpec: neighbour index out of range");
            if (k > 0 && nb[k] <= nb[k - 1])
                throw std::invalid_argument("GraphSpec: neighbour lists must be sorted and unique");
        }
    }
}

double normalization_constant(const GraphSpec& g, std::size_t v, std::size_t u) {
    const auto dv = static_cast<double>(g.neighbors[v].size());
    if (g.norm_mode == NormMode::target_degree) return dv;
    const auto du = static_cast<double>(g.neighbors[u].size());
    return std::sqrt(dv * du);
}

namespace {

// out += coeff * (h_u W)
void accumulate_message(const GraphSpec& g, std::size_t u, double coeff,
                        std::vector<double>& out) {
    const std::size_t d = g.features.cols();
    for (std::size_t j = 0; j < out.size(); ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += g.features(u, k) * g.weight(k, j);
        out[j] += coeff * acc;
    }
}

void check_node(const GraphSpec& g, std::size_t v) {
    if (v >= g.n_nodes())
        throw std::invalid_argument("node " + std::to_string(v) + " out of range");
}

} // namespace

std::vector<double> aggregate_true(const GraphSpec& g, std::size_t v) {
    check_node(g, v);
    std::vector<double> out(g.weight.cols(), 0.0);
    for (std::size_t u : g.neighbors[v])
        accumulate_message(g, u, 1.0 / normalization_constant(g, v, u), out);
    return out;
}

std::vector<double> aggregate_sampled(const GraphSpec& g, std::size_t v,
                                      const std::vector<bool>& sampled,
                                      const SampleDesign& design) {
    check_node(g, v);
    if (sampled.size() != g.n_nodes() || design.inclusion_prob.size() != g.n_nodes())
        throw ShapeError("aggregate_sampled: sample mask or design does not cover all nodes");
    std::vector<double> out(g.weight.cols(), 0.0);
    for (std::size_t u : g.neighbors[v]) {
        if (!sampled[u]) continue;
        const double p = design.inclusion_prob[u];
        if (!(p > 0.0)) {
            throw std::invalid_argument("aggregate_sampled: sampled neighbour " +
                                        std::to_string(u) + " has inclusion probability 0");
        }
        accumulate_message(g, u, 1.0 / (normalization_constant(g, v, u) * p), out);
    }
    return out;
}

std::vector<double> aggregate_sampled(const GraphSpec& g, std::size_t v,
                                      std::span<const std::size_t> sampled_set,
                                      const SampleDesign& design) {
    std::vector<bool> mask(g.n_nodes(), false);
    for (std::size_t u : sampled_set) {
        check_node(g, u);
        mask[u] = true;
    }
    return aggregate_sampled(g, v, mask, design);
}

UnbiasednessReport unbiasedness_mc_check(const GraphSpec& g, const SampleDesign& design,
                                         std::size_t n_trials, const Rng& rng,
                                         double z_bound) {
    g.validate();
    if (n_trials < 2) throw std::invalid_argument("unbiasedness_mc_check: need >= 2 trials");
    const std::size_t n = g.n_nodes();
    const std::size_t width = g.weight.cols();

    // Welford running mean / sum of squared deviations per node coordinate.
    std::vector<std::vector<double>> mean(n, std::vector<double>(width, 0.0));
    std::vector<std::vector<double>> m2(n, std::vector<double>(width, 0.0));
    std::vector<bool> mask(n);
    for (std::size_t t = 0; t < n_trials; ++t) {
        Rng trial_rng = rng.split(t);
        for (std::size_t u = 0; u < n; ++u) mask[u] = trial_rng.bernoulli(design.inclusion_prob[u]);
        for (std::size_t v = 0; v < n; ++v) {
            const auto est = aggregate_sampled(g, v, mask, design);
            const auto k = static_cast<double>(t + 1);
            for (std::size_t j = 0; j < width; ++j) {
                const double delta = est[j] - mean[v][j];
                mean[v][j] += delta / k;
                m2[v][j] += delta * (est[j] - mean[v][j]);
            }
        }
    }

    UnbiasednessReport report;
    report.nodes = n;
    report.trials = n_trials;
    report.reliable = n_trials >= kMinReliableTrials;
    const auto trials = static_cast<double>(n_trials);
    for (std::size_t v = 0; v < n; ++v) {
        const auto truth = aggregate_true(g, v);
        double err = 0.0;
        double scale = 0.0;
        double z = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            const double var = m2[v][j] / (trials - 1.0);
            const double se = std::sqrt(var / trials);
            const double diff = std::abs(mean[v][j] - truth[j]);
            err = std::max(err, diff);
            scale = std::max(scale, std::abs(truth[j]));
            // A zero-variance coordinate is exact only when its error is at
            // rounding level.
            if (se > 0.0) {
                z = std::max(z, diff / se);
            } else if (diff > 1e-12 * std::max(1.0, std::abs(truth[j]))) {
                z = std::numeric_limits<double>::infinity();
            }
        }
        report.rel_err.push_back(scale > 0.0 ? err / scale : err);
        report.z.push_back(z);
        report.max_rel_err = std::max(report.max_rel_err, report.rel_err.back());
        report.max_z = std::max(report.max_z, z);
        report.mc_mean.push_back(mean[v]);
    }
    report.pass = report.max_z <= z_bound;
    return report;
}

GraphSpec random_graph(std::size_t n_nodes, std::size_t d_in, std::size_t d_out,
                       double edge_prob, Rng& rng) {
    if (n_nodes < 2) throw std::invalid_argument("random_graph: need at least 2 nodes");
    GraphSpec g;
    g.neighbors.assign(n_nodes, {});
    auto link = [&](std::size_t a, std::size_t b) {
        g.neighbors[a].push_back(b);
        g.neighbors[b].push_back(a);
    };
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const std::size_t next = (i + 1) % n_nodes;
        if (next != i && !(n_nodes == 2 && i == 1)) link(i, next);
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
        for (std::size_t j = i + 2; j < n_nodes; ++j) {
            if (i == 0 && j == n_nodes - 1) continue;  // ring edge
            if (rng.bernoulli(edge_prob)) link(i, j);
        }
    }
    for (auto& nb : g.neighbors) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    g.features = Matrix(n_nodes, d_in);
    for (double& x : g.features.data()) x = rng.normal();
    g.weight = Matrix(d_in, d_out);
    for (double& x : g.weight.data()) x = rng.normal();
    return g;
}

GraphSpec star_graph(std::size_t leaves) {
    GraphSpec g;
    g.neighbors.assign(leaves + 1, {});
    for (std::size_t i = 1; i <= leaves; ++i) {
        g.neighbors[0].push_back(i);
        g.neighbors[i].push_back(0);
    }
    g.features = Matrix(leaves + 1, 1, 1.0);
    g.weight = Matrix(1, 1, 1.0);
    return g;
}

} // namespace psld
