#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace psld {

// Error types shared across the library.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix column(std::span<const double> values);
    static Matrix row(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    std::string shape_string() const;
    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// a * b, accumulated left to right over the inner index.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T without materializing the transpose.
Matrix matmul_bt(const Matrix& a, const Matrix& b);
/// a^T * b without materializing the transpose.
Matrix matmul_at(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
Matrix relu(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);

/// Adds a length-cols vector to every row.
Matrix add_row_vector(const Matrix& a, std::span<const double> v);
/// Broadcasts a (rows x 1) column across the columns of a (rows x k) matrix.
Matrix add_column_broadcast(const Matrix& a, const Matrix& col);
Matrix mul_column_broadcast(const Matrix& a, const Matrix& col);

/// Column-wise sums (length cols), accumulated in row order.
std::vector<double> column_sums(const Matrix& a);
/// Row-wise sums as a (rows x 1) matrix.
Matrix row_sums(const Matrix& a);

double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a) noexcept;

/// Horizontal concatenation of matrices with equal row counts.
Matrix hconcat(std::span<const Matrix> parts);
/// Columns [begin, begin + count) of a.
Matrix column_block(const Matrix& a, std::size_t begin, std::size_t count);
/// Vertical concatenation of matrices with equal column counts.
Matrix vconcat(std::span<const Matrix> parts);

// ---------------------------------------------------------------------------
// Randomness
//
// Rng is xoshiro256** seeded through SplitMix64. split(key) derives a child
// stream from the parent's *seed* and the key only, so children do not depend
// on how much of the parent stream has been consumed.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    /// Uniform integer in [0, bound); rejection sampling, unbiased.
    std::uint64_t below(std::uint64_t bound);
    /// Standard normal via Box-Muller (no caching of the second variate).
    double normal() noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }

    Rng split(std::uint64_t key) const noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
};

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffle_indices(std::size_t n, Rng& rng);

} // namespace psld
