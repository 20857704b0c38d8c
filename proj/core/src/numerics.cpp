#include "psld/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace psld {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw ShapeError("Matrix: ragged initializer list");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape_string() const {
    std::ostringstream os;
    os << rows_ << "x" << cols_;
    return os.str();
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() +
                         " vs " + b.shape_string());
    }
}

template <typename F>
Matrix zip(const Matrix& a, const Matrix& b, const char* op, F f) {
    require_same_shape(a, b, op);
    Matrix out(a.rows(), a.cols());
    const auto& x = a.data();
    const auto& y = b.data();
    auto& z = out.data();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = f(x[i], y[i]);
    return out;
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: shape mismatch " + a.shape_string() + " x " +
                         b.shape_string());
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t n = a.cols();
    const std::size_t m = b.cols();
    // i-k-j order: each out(i, j) still accumulates k = 0, 1, ... in sequence.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.data().data() + i * m;
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = a(i, k);
            const double* brow = b.data().data() + k * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_bt: shape mismatch " + a.shape_string() + " x (" +
                         b.shape_string() + ")^T");
    }
    Matrix out(a.rows(), b.rows());
    const std::size_t n = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.data().data() + i * n;
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* br = b.data().data() + j * n;
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += ar[k] * br[k];
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_at: shape mismatch (" + a.shape_string() + ")^T x " +
                         b.shape_string());
    }
    Matrix out(a.cols(), b.cols());
    // Row-of-a outer loop keeps memory access sequential; each output entry
    // still accumulates over k in increasing order.
    for (std::size_t k = 0; k < a.rows(); ++k) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            double* orow = out.data().data() + i * out.cols();
            const double* brow = b.data().data() + k * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix relu(const Matrix& a) {
    Matrix out = a;
    for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    return zip(a, b, "subtract", [](double x, double y) { return x - y; });
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    return zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}

Matrix scale(const Matrix& a, double factor) {
    Matrix out = a;
    for (double& x : out.data()) x *= factor;
    return out;
}

Matrix add_row_vector(const Matrix& a, std::span<const double> v) {
    if (v.size() != a.cols()) {
        throw ShapeError("add_row_vector: vector length " + std::to_string(v.size()) +
                         " vs matrix " + a.shape_string());
    }
    Matrix out = a;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = out.row_span(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += v[j];
    }
    return out;
}

Matrix add_column_broadcast(const Matrix& a, const Matrix& col) {
    if (col.cols() != 1 || col.rows() != a.rows()) {
        throw ShapeError("add_column_broadcast: " + col.shape_string() +
                         " does not broadcast over " + a.shape_string());
    }
    Matrix out = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (double& x : out.row_span(i)) x += col(i, 0);
    return out;
}

Matrix mul_column_broadcast(const Matrix& a, const Matrix& col) {
    if (col.cols() != 1 || col.rows() != a.rows()) {
        throw ShapeError("mul_column_broadcast: " + col.shape_string() +
                         " does not broadcast over " + a.shape_string());
    }
    Matrix out = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (double& x : out.row_span(i)) x *= col(i, 0);
    return out;
}

std::vector<double> column_sums(const Matrix& a) {
    std::vector<double> out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row_span(i);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
    }
    return out;
}

Matrix row_sums(const Matrix& a) {
    Matrix out(a.rows(), 1);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (double x : a.row_span(i)) acc += x;
        out(i, 0) = acc;
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

bool all_finite(const Matrix& a) noexcept {
    return std::all_of(a.data().begin(), a.data().end(),
                       [](double x) { return std::isfinite(x); });
}

Matrix hconcat(std::span<const Matrix> parts) {
    if (parts.empty()) return {};
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) {
            throw ShapeError("hconcat: row count mismatch " + p.shape_string() + " vs " +
                             parts.front().shape_string());
        }
        cols += p.cols();
    }
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t offset = 0;
        for (const auto& p : parts) {
            auto src = p.row_span(i);
            std::copy(src.begin(), src.end(), out.row_span(i).begin() + offset);
            offset += p.cols();
        }
    }
    return out;
}

Matrix column_block(const Matrix& a, std::size_t begin, std::size_t count) {
    if (begin + count > a.cols()) {
        throw ShapeError("column_block: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         a.shape_string());
    }
    Matrix out(a.rows(), count);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto src = a.row_span(i).subspan(begin, count);
        std::copy(src.begin(), src.end(), out.row_span(i).begin());
    }
    return out;
}

Matrix vconcat(std::span<const Matrix> parts) {
    if (parts.empty()) return {};
    const std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) {
            throw ShapeError("vconcat: column count mismatch " + p.shape_string() +
                             " vs " + parts.front().shape_string());
        }
        rows += p.rows();
    }
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
    return Matrix(rows, cols, std::move(data));
}

// --- Rng -------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {
constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
}
} // namespace

Rng::Rng(std::uint64_t seed) noexcept : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    // Reject the top partial bucket so every residue is equally likely.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % bound;
    }
}

double Rng::normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t key) const noexcept {
    std::uint64_t sm = seed_ ^ (0xd1b54a32d192ed03ULL * (key + 1));
    const std::uint64_t a = splitmix64(sm);
    return Rng(a ^ rotl(seed_, 17));
}

std::vector<std::size_t> shuffle_indices(std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("shuffle_indices: empty input (n == 0)");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

} // namespace psld
