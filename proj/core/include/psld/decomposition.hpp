#pragma once

#include "psld/numerics.hpp"

namespace psld {

// All decomposers work on matrices whose rows are individual series and
// whose columns run along time.

enum class DecomposerKind { mvd, stl };

const char* to_string(DecomposerKind kind) noexcept;
DecomposerKind decomposer_from_string(const std::string& name);

struct MvdConfig {
    double epsilon = 1e-5;
};

enum class Padding { replicate };

struct StlConfig {
    std::size_t kappa_t = 25;
    std::size_t kappa_s = 7;
    Padding padding = Padding::replicate;
};

/// Decomposed parts of a batch of series.
///   mvd: c1 = M (rows x 1), c2 = V (rows x 1), c3 = R (rows x len)
///   stl: c1 = T, c2 = S, c3 = R, all rows x len
struct ComponentBundle {
    DecomposerKind kind = DecomposerKind::mvd;
    Matrix c1;
    Matrix c2;
    Matrix c3;
};

/// Per row: M = mean, Y' = Y - M, V = population variance of Y',
/// R = Y' / (V + epsilon).
ComponentBundle mvd_decompose(const Matrix& y, const MvdConfig& cfg = {});
/// R (V + epsilon) + M.
Matrix mvd_recombine(const ComponentBundle& bundle, const MvdConfig& cfg = {});

/// Centred moving average along each row, replicate-padded by (kernel - 1) / 2.
Matrix moving_average(const Matrix& series, std::size_t kernel,
                      Padding padding = Padding::replicate);

/// T = MA(Y, kappa_t), S = MA(Y - T, kappa_s), R = Y - T - S.
ComponentBundle stl_decompose(const Matrix& y, const StlConfig& cfg = {});
/// T + S + R.
Matrix stl_recombine(const ComponentBundle& bundle);

struct DecomposerConfig {
    DecomposerKind kind = DecomposerKind::mvd;
    MvdConfig mvd;
    StlConfig stl;
};

ComponentBundle decompose(const Matrix& y, const DecomposerConfig& cfg);
Matrix recombine(const ComponentBundle& bundle, const DecomposerConfig& cfg);

} // namespace psld
