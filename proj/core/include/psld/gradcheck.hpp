#pragma once

#include "psld/model.hpp"

#include <map>
#include <string>

namespace psld {

/// Tiny configuration used for finite-difference verification.
struct GradcheckConfig {
    DecomposerKind kind = DecomposerKind::mvd;
    HeadMode mode = HeadMode::separate;
    std::uint64_t seed = 0;
    std::size_t hidden = 4;
    std::size_t l_in = 6;
    std::size_t l_out = 3;
    std::size_t n_vars = 2;
    std::size_t n_windows = 2;
    double dropout = 0.2;  // masks are held fixed across evaluations
    double lambda = 1.0;
    double step = 1e-5;
    double tolerance = 1e-4;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, kGradcheckFloor).
inline constexpr double kGradcheckFloor = 1e-6;

double gradcheck_relative_error(double analytic, double numeric) noexcept;

struct GradcheckReport {
    double max_rel_err = 0.0;
    std::string worst_tensor;
    std::size_t n_checked = 0;
    std::map<std::string, double> per_group;  // group prefix -> worst error
    bool pass = false;
};

/// Central differences over every parameter entry of a freshly initialised
/// model on random inputs.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

} // namespace psld
