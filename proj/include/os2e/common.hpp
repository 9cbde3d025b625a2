#pragma once
// Shared primitives: error type, dense row-major matrix, seeded RNG streams.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace os2e {

/// Raised by every module on contract violations and malformed input.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// -----------------------------
// Matrix (row-major, double)
// -----------------------------
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows_in);

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool empty() const { return rows == 0 || cols == 0; }
    bool operator==(const Matrix&) const = default;
};

/// Rows `indices` of `m`, in the given order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

/// Horizontal concatenation; row counts must agree.
Matrix hconcat(const Matrix& a, const Matrix& b);

// -----------------------------
// Simplex helpers
// -----------------------------
bool on_simplex(std::span<const double> v, double tol);

// -----------------------------
// RNG
// -----------------------------

// Distributions are written out explicitly so sequences do not depend on the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream derived from (seed, stream id).
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64() { return engine_(); }
    double uniform();                              // [0, 1)
    double uniform(double lo, double hi);          // [lo, hi)
    std::size_t uniform_index(std::size_t n);      // [0, n)
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Worker thread cap: OS2E_THREADS when set and positive, else hardware concurrency.
std::size_t worker_threads();

}  // namespace os2e
