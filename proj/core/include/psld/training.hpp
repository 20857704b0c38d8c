#pragma once

#include "psld/dataset.hpp"
#include "psld/decomposition.hpp"
#include "psld/model.hpp"

#include <optional>
#include <vector>

namespace psld {

inline constexpr std::size_t kDefaultEpochs = 10;
inline constexpr std::size_t kDefaultSubgraphs = 24;
inline constexpr std::size_t kDefaultWindowsPerStep = 32;

struct TrainConfig {
    std::size_t l_in = 36;
    std::size_t l_out = 36;
    DecomposerConfig decomposer;
    HeadMode mode = HeadMode::separate;
    std::size_t hidden = kDefaultHidden;
    double dropout = kDefaultDropout;
    double lr = kDefaultLearningRate;
    double lambda = 1.0;
    std::size_t epochs = kDefaultEpochs;
    std::size_t n_subgraphs = kDefaultSubgraphs;
    std::size_t windows_per_step = kDefaultWindowsPerStep;
    std::uint64_t seed = 0;
    double sigma_floor = kDefaultSigmaFloor;
    double train_ratio = 0.6;
    double val_ratio = 0.2;
    double test_ratio = 0.2;

    void validate() const;
    ModelShape model_shape() const;
};

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
};

struct EpochReport {
    std::size_t epoch = 0;
    double train_total = 0.0;
    double train_cbn = 0.0;
    double train_cpn = 0.0;
    Metrics val;
    double wall_seconds = 0.0;  // not part of any reproducible output
};

/// Non-finite loss during training, with the step that produced it.
class TrainingAborted : public NumericError {
public:
    TrainingAborted(const std::string& what, std::size_t epoch, std::size_t batch)
        : NumericError(what), epoch(epoch), batch(batch) {}
    std::size_t epoch;
    std::size_t batch;
};

enum class Split { train, val, test };
const char* to_string(Split split) noexcept;

/// Normalised series plus the split plan and the statistics used.
struct PreparedData {
    SeriesStore normalized;
    NormStats stats;
    SplitPlan plan;

    SplitRange range(Split split) const;
};

PreparedData prepare_data(const SeriesStore& raw, const TrainConfig& config);

/// Rows of every window stacked window-major: row (w * D + j) is variable j
/// of window w, laid out along time.
struct StackedRows {
    Matrix x;
    Matrix y;
};
StackedRows stack_windows(std::span<const WindowPair> windows);

template <typename Params>
struct TrainResult {
    Params params;  // best-validation parameters
    std::vector<EpochReport> epochs;
    std::size_t best_epoch = 0;
};

/// Trains PSLD. Every epoch re-partitions the nodes with RSS and takes one
/// ADAM step per subgraph on a freshly sampled minibatch of its windows.
TrainResult<PsldParams> train(const SeriesStore& raw, const TrainConfig& config);
TrainResult<PsldParams> train(const PreparedData& data, const TrainConfig& config);

/// Same loop, same budget, one head mapping X to Y and no component losses.
TrainResult<PlainParams> train_plain(const PreparedData& data, const TrainConfig& config);

std::vector<Matrix> predict_windows(const PsldParams& params, const PreparedData& data,
                                    const TrainConfig& config, Split split);
std::vector<Matrix> predict_windows(const PlainParams& params, const PreparedData& data,
                                    const TrainConfig& config, Split split);

/// Mean squared / absolute error over every window, horizon step and variable.
Metrics metrics_from_predictions(std::span<const WindowPair> windows,
                                 std::span<const Matrix> predictions);

Metrics evaluate(const PsldParams& params, const PreparedData& data, const TrainConfig& config,
                 Split split);
Metrics evaluate(const PlainParams& params, const PreparedData& data, const TrainConfig& config,
                 Split split);

/// Repeats the last observed input step across the horizon.
Metrics baseline_last_value(const PreparedData& data, const TrainConfig& config, Split split);

/// Trains the plain MLP control and reports its test metrics.
Metrics baseline_plain_mlp(const PreparedData& data, const TrainConfig& config);

} // namespace psld
