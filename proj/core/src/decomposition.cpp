#include "psld/decomposition.hpp"

#include <algorithm>

namespace psld {

const char* to_string(DecomposerKind kind) noexcept {
    return kind == DecomposerKind::mvd ? "mvd" : "stl";
}

DecomposerKind decomposer_from_string(const std::string& name) {
    if (name == "mvd") return DecomposerKind::mvd;
    if (name == "stl") return DecomposerKind::stl;
    throw std::invalid_argument("unknown decomposer '" + name + "' (expected mvd or stl)");
}

ComponentBundle mvd_decompose(const Matrix& y, const MvdConfig& cfg) {
    if (y.cols() < 1) throw ShapeError("mvd_decompose: empty time axis");
    if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("mvd_decompose: epsilon must be > 0");
    const auto len = static_cast<double>(y.cols());
    ComponentBundle b{DecomposerKind::mvd, Matrix(y.rows(), 1), Matrix(y.rows(), 1),
                      Matrix(y.rows(), y.cols())};
    for (std::size_t i = 0; i < y.rows(); ++i) {
        auto row = y.row_span(i);
        double sum = 0.0;
        for (double v : row) sum += v;
        const double mean = sum / len;
        double ss = 0.0;
        for (double v : row) ss += (v - mean) * (v - mean);
        const double var = ss / len;
        const double denom = var + cfg.epsilon;
        auto r = b.c3.row_span(i);
        for (std::size_t t = 0; t < row.size(); ++t) r[t] = (row[t] - mean) / denom;
        b.c1(i, 0) = mean;
        b.c2(i, 0) = var;
    }
    return b;
}

Matrix mvd_recombine(const ComponentBundle& bundle, const MvdConfig& cfg) {
    if (bundle.kind != DecomposerKind::mvd)
        throw std::invalid_argument("mvd_recombine: bundle is not an mvd bundle");
    const auto& r = bundle.c3;
    if (bundle.c1.rows() != r.rows() || bundle.c1.cols() != 1 || !bundle.c1.same_shape(bundle.c2))
        throw ShapeError("mvd_recombine: M " + bundle.c1.shape_string() + ", V " +
                         bundle.c2.shape_string() + " do not match R " + r.shape_string());
    Matrix out(r.rows(), r.cols());
    for (std::size_t i = 0; i < r.rows(); ++i) {
        const double denom = bundle.c2(i, 0) + cfg.epsilon;
        const double mean = bundle.c1(i, 0);
        auto src = r.row_span(i);
        auto dst = out.row_span(i);
        for (std::size_t t = 0; t < src.size(); ++t) dst[t] = src[t] * denom + mean;
    }
    return out;
}

Matrix moving_average(const Matrix& series, std::size_t kernel, Padding /*padding*/) {
    if (kernel == 0 || kernel % 2 == 0)
        throw std::invalid_argument("moving_average: kernel must be odd, got " +
                                    std::to_string(kernel));
    const std::size_t n = series.cols();
    const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
    const auto last = static_cast<std::ptrdiff_t>(n) - 1;
    const auto k = static_cast<double>(kernel);
    Matrix out(series.rows(), n);
    for (std::size_t i = 0; i < series.rows(); ++i) {
        auto src = series.row_span(i);
        auto dst = out.row_span(i);
        for (std::ptrdiff_t t = 0; t <= last; ++t) {
            double acc = 0.0;
            for (std::ptrdiff_t o = -half; o <= half; ++o) {
                const auto idx = std::clamp(t + o, std::ptrdiff_t{0}, last);
                acc += src[static_cast<std::size_t>(idx)];
            }
            dst[static_cast<std::size_t>(t)] = acc / k;
        }
    }
    return out;
}

ComponentBundle stl_decompose(const Matrix& y, const StlConfig& cfg) {
    if (y.cols() < 1) throw ShapeError("stl_decompose: empty time axis");
    ComponentBundle b;
    b.kind = DecomposerKind::stl;
    b.c1 = moving_average(y, cfg.kappa_t, cfg.padding);
    Matrix detrended = subtract(y, b.c1);
    b.c2 = moving_average(detrended, cfg.kappa_s, cfg.padding);
    b.c3 = subtract(detrended, b.c2);
    return b;
}

Matrix stl_recombine(const ComponentBundle& bundle) {
    if (bundle.kind != DecomposerKind::stl)
        throw std::invalid_argument("stl_recombine: bundle is not an stl bundle");
    if (!bundle.c1.same_shape(bundle.c2) || !bundle.c1.same_shape(bundle.c3))
        throw ShapeError("stl_recombine: T " + bundle.c1.shape_string() + ", S " +
                         bundle.c2.shape_string() + ", R " + bundle.c3.shape_string());
    // (S + R) + T mirrors the combinator's grouping and inverts Y - T - S.
    return add(add(bundle.c2, bundle.c3), bundle.c1);
}

ComponentBundle decompose(const Matrix& y, const DecomposerConfig& cfg) {
    return cfg.kind == DecomposerKind::mvd ? mvd_decompose(y, cfg.mvd) : stl_decompose(y, cfg.stl);
}

Matrix recombine(const ComponentBundle& bundle, const DecomposerConfig& cfg) {
    return bundle.kind == DecomposerKind::mvd ? mvd_recombine(bundle, cfg.mvd)
                                              : stl_recombine(bundle);
}

} // namespace psld
