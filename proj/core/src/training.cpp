#include "psld/training.hpp"

#include "psld/rss.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace psld {

void TrainConfig::validate() const {
    if (l_in < 1 || l_out < 1) throw std::invalid_argument("l_in and l_out must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
    if (n_subgraphs < 1) throw std::invalid_argument("n_subgraphs must be >= 1");
    if (windows_per_step < 1) throw std::invalid_argument("windows_per_step must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
    if (!(lr >= 0.0)) throw std::invalid_argument("lr must be >= 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (!(decomposer.mvd.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    for (auto k : {decomposer.stl.kappa_t, decomposer.stl.kappa_s})
        if (k == 0 || k % 2 == 0) throw std::invalid_argument("kappa_t and kappa_s must be odd");
}

ModelShape TrainConfig::model_shape() const {
    ModelShape s;
    s.kind = decomposer.kind;
    s.mode = mode;
    s.l_in = l_in;
    s.l_out = l_out;
    s.hidden = hidden;
    s.dropout = dropout;
    return s;
}

const char* to_string(Split split) noexcept {
    switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

SplitRange PreparedData::range(Split split) const {
    switch (split) {
    case Split::train: return plan.train;
    case Split::val: return plan.val;
    case Split::test: return plan.test;
    }
    return {};
}

PreparedData prepare_data(const SeriesStore& raw, const TrainConfig& config) {
    config.validate();
    PreparedData d;
    d.plan = split_by_ratio(raw.length(), config.train_ratio, config.val_ratio, config.test_ratio);
    const std::size_t need = config.l_in + config.l_out;
    for (Split s : {Split::train, Split::val, Split::test}) {
        if (d.range(s).length() < need)
            throw std::invalid_argument(std::string("prepare_data: ") + to_string(s) +
                                        " split has " + std::to_string(d.range(s).length()) +
                                        " timesteps, needs at least " + std::to_string(need));
    }
    d.stats = fit_norm_stats(raw, d.plan.train.length());
    d.normalized = apply_norm(raw, d.stats, config.sigma_floor);
    return d;
}

StackedRows stack_windows(std::span<const WindowPair> windows) {
    if (windows.empty()) return {};
    const std::size_t d = windows.front().x.cols();
    const std::size_t l_in = windows.front().x.rows();
    const std::size_t l_out = windows.front().y.rows();
    StackedRows out{Matrix(windows.size() * d, l_in), Matrix(windows.size() * d, l_out)};
    for (std::size_t w = 0; w < windows.size(); ++w) {
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t t = 0; t < l_in; ++t) out.x(w * d + j, t) = windows[w].x(t, j);
            for (std::size_t t = 0; t < l_out; ++t) out.y(w * d + j, t) = windows[w].y(t, j);
        }
    }
    return out;
}

namespace {

// Stream layout under the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEpochStream = 2;

struct StepLoss {
    double total = 0.0;
    double cbn = 0.0;
    double cpn = 0.0;
};

struct PsldAdapter {
    using Params = PsldParams;
    const TrainConfig& config;

    Params init(Rng& rng) const { return init_params(config.model_shape(), rng); }

    StepLoss step(const Params& p, const StackedRows& rows, const Rng& dropout_rng,
                  Params& grads) const {
        const auto xc = decompose(rows.x, config.decomposer);
        const auto yc = decompose(rows.y, config.decomposer);
        ForwardCache cache;
        const auto out = forward(p, xc, true, dropout_rng, &cache);
        const auto l = loss_and_backward(p, out, cache, yc, rows.y, config.lambda, grads);
        return {l.total, l.cbn, l.cpn};
    }

    Matrix predict(const Params& p, const Matrix& x) const {
        return forward(p, decompose(x, config.decomposer), false, Rng(0)).y_hat;
    }
};

struct PlainAdapter {
    using Params = PlainParams;
    const TrainConfig& config;

    Params init(Rng& rng) const {
        return init_plain_params(config.l_in, config.l_out, config.hidden, config.dropout, rng);
    }

    StepLoss step(const Params& p, const StackedRows& rows, const Rng& dropout_rng,
                  Params& grads) const {
        HeadCache cache;
        const Matrix y_hat = plain_forward(p, rows.x, true, dropout_rng, &cache);
        const double loss = plain_loss_and_backward(p, y_hat, cache, rows.y, grads);
        return {loss, loss, 0.0};
    }

    Matrix predict(const Params& p, const Matrix& x) const {
        return plain_forward(p, x, false, Rng(0));
    }
};

constexpr std::size_t kEvalChunk = 64;

template <typename Adapter>
std::vector<Matrix> predict_with(const Adapter& adapter, const typename Adapter::Params& params,
                                 const PreparedData& data, const TrainConfig& config, Split split) {
    const auto windows = make_windows(data.normalized, config.l_in, config.l_out, data.range(split));
    const std::size_t d = data.normalized.n_nodes();
    std::vector<Matrix> preds;
    preds.reserve(windows.size());
    for (std::size_t begin = 0; begin < windows.size(); begin += kEvalChunk) {
        const std::size_t count = std::min(kEvalChunk, windows.size() - begin);
        const auto rows = stack_windows(std::span(windows).subspan(begin, count));
        const Matrix y_hat = adapter.predict(params, rows.x);
        for (std::size_t w = 0; w < count; ++w) {
            Matrix p(config.l_out, d);
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t t = 0; t < config.l_out; ++t) p(t, j) = y_hat(w * d + j, t);
            preds.push_back(std::move(p));
        }
    }
    return preds;
}

template <typename Adapter>
Metrics evaluate_with(const Adapter& adapter, const typename Adapter::Params& params,
                      const PreparedData& data, const TrainConfig& config, Split split) {
    const auto windows = make_windows(data.normalized, config.l_in, config.l_out, data.range(split));
    const auto preds = predict_with(adapter, params, data, config, split);
    return metrics_from_predictions(windows, preds);
}

template <typename Adapter>
TrainResult<typename Adapter::Params> run_training(const Adapter& adapter, const PreparedData& data,
                                                   const TrainConfig& config) {
    using Params = typename Adapter::Params;
    config.validate();
    const Rng root(config.seed);
    Rng init_rng = root.split(kInitStream);
    Params params = adapter.init(init_rng);
    AdamState<Params> adam(params);

    TrainResult<Params> result{params, {}, 0};
    double best_val = std::numeric_limits<double>::infinity();
    const SplitRange train_range = data.plan.train;
    const std::size_t n_train_windows = window_count(train_range.length(), config.l_in, config.l_out);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const Rng epoch_rng = root.split(kEpochStream).split(epoch);
        Rng partition_rng = epoch_rng.split(0);
        const auto batches = rss_partition(data.normalized, config.n_subgraphs, true, partition_rng);

        EpochReport report;
        report.epoch = epoch;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const Rng batch_rng = epoch_rng.split(1 + b);
            Rng sample_rng = batch_rng.split(0);
            const Rng dropout_rng = batch_rng.split(1);

            auto order = shuffle_indices(n_train_windows, sample_rng);
            order.resize(std::min(config.windows_per_step, n_train_windows));
            std::vector<WindowPair> windows;
            windows.reserve(order.size());
            for (std::size_t idx : order)
                windows.push_back(window_at(batches[b].series, config.l_in, config.l_out,
                                            train_range.begin + idx));
            const auto rows = stack_windows(windows);

            Params grads = zeros_like(params);
            StepLoss loss;
            try {
                loss = adapter.step(params, rows, dropout_rng, grads);
            } catch (const NumericError& e) {
                throw TrainingAborted(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                          ", batch " + std::to_string(b),
                                      epoch, b);
            }
            adam_step(params, grads, adam, config.lr);
            report.train_total += loss.total;
            report.train_cbn += loss.cbn;
            report.train_cpn += loss.cpn;
        }
        const auto nb = static_cast<double>(batches.size());
        report.train_total /= nb;
        report.train_cbn /= nb;
        report.train_cpn /= nb;
        report.val = evaluate_with(adapter, params, data, config, Split::val);
        if (!std::isfinite(report.val.mse))
            throw TrainingAborted("non-finite validation loss at epoch " + std::to_string(epoch),
                                  epoch, batches.size());
        if (report.val.mse < best_val) {
            best_val = report.val.mse;
            result.params = params;
            result.best_epoch = epoch;
        }
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.epochs.push_back(report);
    }
    return result;
}

} // namespace

TrainResult<PsldParams> train(const PreparedData& data, const TrainConfig& config) {
    return run_training(PsldAdapter{config}, data, config);
}

TrainResult<PsldParams> train(const SeriesStore& raw, const TrainConfig& config) {
    return train(prepare_data(raw, config), config);
}

TrainResult<PlainParams> train_plain(const PreparedData& data, const TrainConfig& config) {
    return run_training(PlainAdapter{config}, data, config);
}

std::vector<Matrix> predict_windows(const PsldParams& params, const PreparedData& data,
                                    const TrainConfig& config, Split split) {
    return predict_with(PsldAdapter{config}, params, data, config, split);
}

std::vector<Matrix> predict_windows(const PlainParams& params, const PreparedData& data,
                                    const TrainConfig& config, Split split) {
    return predict_with(PlainAdapter{config}, params, data, config, split);
}

Metrics metrics_from_predictions(std::span<const WindowPair> windows,
                                 std::span<const Matrix> predictions) {
    if (windows.size() != predictions.size())
        throw ShapeError("metrics: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(windows.size()) + " windows");
    double se = 0.0, ae = 0.0;
    std::size_t count = 0;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const Matrix& y = windows[w].y;
        const Matrix& p = predictions[w];
        if (!y.same_shape(p))
            throw ShapeError("metrics: prediction " + p.shape_string() + " vs label " +
                             y.shape_string());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double diff = p.data()[i] - y.data()[i];
            se += diff * diff;
            ae += std::abs(diff);
        }
        count += y.size();
    }
    if (count == 0) return {};
    return {se / static_cast<double>(count), ae / static_cast<double>(count)};
}

Metrics evaluate(const PsldParams& params, const PreparedData& data, const TrainConfig& config,
                 Split split) {
    if (params.shape.l_in != config.l_in || params.shape.l_out != config.l_out ||
        params.shape.kind != config.decomposer.kind)
        throw ShapeError("evaluate: parameters do not match the configuration");
    return evaluate_with(PsldAdapter{config}, params, data, config, split);
}

Metrics evaluate(const PlainParams& params, const PreparedData& data, const TrainConfig& config,
                 Split split) {
    if (params.l_in != config.l_in || params.l_out != config.l_out)
        throw ShapeError("evaluate: parameters do not match the configuration");
    return evaluate_with(PlainAdapter{config}, params, data, config, split);
}

Metrics baseline_last_value(const PreparedData& data, const TrainConfig& config, Split split) {
    const auto windows = make_windows(data.normalized, config.l_in, config.l_out, data.range(split));
    std::vector<Matrix> preds;
    preds.reserve(windows.size());
    for (const auto& w : windows) {
        Matrix p(config.l_out, w.x.cols());
        for (std::size_t t = 0; t < config.l_out; ++t)
            for (std::size_t j = 0; j < w.x.cols(); ++j) p(t, j) = w.x(config.l_in - 1, j);
        preds.push_back(std::move(p));
    }
    return metrics_from_predictions(windows, preds);
}

Metrics baseline_plain_mlp(const PreparedData& data, const TrainConfig& config) {
    const auto result = train_plain(data, config);
    return evaluate(result.params, data, config, Split::test);
}

} // namespace psld
