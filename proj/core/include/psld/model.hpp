#pragma once

#include "psld/decomposition.hpp"
#include "psld/numerics.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace psld {

// Row convention: every head input is a matrix whose rows are individual
// (window, variable) series and whose columns run along time. Heads are
// shared across rows, so the parameter count does not depend on how many
// nodes a subgraph holds.

/// y = x W^T + b, with W (out x in) and b (1 x out).
struct LinearLayer {
    Matrix weight;
    Matrix bias;

    std::size_t in() const noexcept { return weight.cols(); }
    std::size_t out() const noexcept { return weight.rows(); }
};

/// linear -> ReLU -> dropout -> linear
struct MlpLearner {
    LinearLayer layer1;  // hidden x in
    LinearLayer layer2;  // hidden x hidden
    double dropout_rate = 0.0;
};

/// A learner followed by its linear predictor.
struct Head {
    MlpLearner learner;
    LinearLayer predictor;  // out x hidden
};

enum class HeadMode { separate, merged };

const char* to_string(HeadMode mode) noexcept;
HeadMode head_mode_from_string(const std::string& name);

inline constexpr std::size_t kDefaultHidden = 128;
inline constexpr double kDefaultDropout = 0.05;

struct ModelShape {
    DecomposerKind kind = DecomposerKind::mvd;
    HeadMode mode = HeadMode::separate;
    std::size_t l_in = 0;
    std::size_t l_out = 0;
    std::size_t hidden = kDefaultHidden;
    double dropout = kDefaultDropout;

    /// Input / output widths of the three component heads.
    std::array<std::size_t, 3> head_in() const;
    std::array<std::size_t, 3> head_out() const;
};

/// Parameter groups theta, phi, psi (component heads) and xi (combinator).
/// Separate mode holds three heads; merged mode holds one head whose widths
/// are the concatenation of the three.
struct PsldParams {
    ModelShape shape;
    std::vector<Head> heads;
    Head combinator;
};

/// Single-head control model mapping X straight to Y.
struct PlainParams {
    std::size_t l_in = 0;
    std::size_t l_out = 0;
    Head head;
};

struct NamedTensor {
    std::string name;
    Matrix* value;
};
struct ConstNamedTensor {
    std::string name;
    const Matrix* value;
};

/// Every tensor in a fixed order (the same order for any two objects of the
/// same shape). Names are stable and used by the checkpoint format.
std::vector<NamedTensor> named_tensors(PsldParams& p);
std::vector<ConstNamedTensor> named_tensors(const PsldParams& p);
std::vector<NamedTensor> named_tensors(PlainParams& p);
std::vector<ConstNamedTensor> named_tensors(const PlainParams& p);

/// Same layout, all entries zero.
PsldParams zeros_like(const PsldParams& p);
PlainParams zeros_like(const PlainParams& p);

/// Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), biases zero.
PsldParams init_params(const ModelShape& shape, Rng& rng);
PlainParams init_plain_params(std::size_t l_in, std::size_t l_out, std::size_t hidden,
                              double dropout, Rng& rng);

/// Embeds three separate heads block-diagonally into one merged head.
Head embed_block_diagonal(const std::vector<Head>& heads);
/// Separate-mode parameters converted to an equivalent merged model.
PsldParams to_merged(const PsldParams& separate);

// --- forward / backward ----------------------------------------------------

struct HeadCache {
    Matrix input;
    Matrix pre1;      // layer1 pre-activation
    Matrix dropmask;  // per-entry scale (0 or 1/(1-p)); empty when dropout inactive
    Matrix act1;      // relu(pre1) after dropout
    Matrix features;  // learner output
};

/// Dropout masks come from rng.split(key_base + b), one stream per block of
/// hidden units; a merged head with three blocks therefore draws the same
/// masks as three separate heads with keys key_base, key_base + 1, key_base + 2.
Matrix head_forward(const Head& head, const Matrix& input, bool training, const Rng& rng,
                    HeadCache* cache = nullptr, std::uint64_t key_base = 0,
                    std::size_t dropout_blocks = 1);

/// Writes parameter gradients into `grad` (accumulating) and returns dL/dinput
/// when `want_input_grad`.
Matrix head_backward(const Head& head, const HeadCache& cache, const Matrix& d_out,
                     Head& grad, bool want_input_grad);

/// c1, c2, c3 are the predicted components (M, V, R or T, S, R).
struct HeadOutputs {
    DecomposerKind kind = DecomposerKind::mvd;
    Matrix c1;
    Matrix c2;
    Matrix c3;
    Matrix y_hat;
};

struct ForwardCache {
    std::vector<HeadCache> heads;
    HeadCache combinator;
};

/// x_components: decomposition of the input rows (rows x l_in).
HeadOutputs forward(const PsldParams& params, const ComponentBundle& x_components,
                    bool training, const Rng& rng, ForwardCache* cache = nullptr);

struct LossBreakdown {
    double total = 0.0;
    double cbn = 0.0;
    double cpn = 0.0;
    std::array<double, 3> per_head{};
};

/// Component losses are the mean squared error of each head against its
/// label component, summed over heads; the combinator loss is the mean
/// squared error of y_hat. total = cbn + lambda * cpn.
LossBreakdown compute_loss(const HeadOutputs& outputs, const ComponentBundle& labels,
                           const Matrix& y, double lambda);

/// Loss plus gradients for every parameter group. Combinator gradients flow
/// into the component heads.
LossBreakdown loss_and_backward(const PsldParams& params, const HeadOutputs& outputs,
                                const ForwardCache& cache, const ComponentBundle& labels,
                                const Matrix& y, double lambda, PsldParams& grads);

Matrix plain_forward(const PlainParams& params, const Matrix& x, bool training, const Rng& rng,
                     HeadCache* cache = nullptr);
double plain_loss_and_backward(const PlainParams& params, const Matrix& y_hat,
                               const HeadCache& cache, const Matrix& y, PlainParams& grads);

// --- ADAM ----------------------------------------------------------------

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline constexpr double kDefaultLearningRate = 1e-4;

template <typename Params>
struct AdamState {
    Params m;
    Params v;
    std::uint64_t t = 0;
    AdamConfig config;

    explicit AdamState(const Params& like, AdamConfig cfg = {})
        : m(zeros_like(like)), v(zeros_like(like)), config(cfg) {}
};

void adam_update(std::span<const NamedTensor> params, std::span<const ConstNamedTensor> grads,
                 std::span<const NamedTensor> m, std::span<const NamedTensor> v,
                 std::uint64_t t, const AdamConfig& cfg, double lr);

template <typename Params>
void adam_step(Params& params, const Params& grads, AdamState<Params>& state, double lr) {
    state.t += 1;
    auto p = named_tensors(params);
    auto g = named_tensors(grads);
    auto m = named_tensors(state.m);
    auto v = named_tensors(state.v);
    adam_update(p, g, m, v, state.t, state.config, lr);
}

} // namespace psld
