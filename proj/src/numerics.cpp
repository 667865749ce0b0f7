#include "flowcast/numerics.hpp"

#include "flowcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

namespace flowcast {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& r : rows) {
        if (r.size() != m.cols_)
            throw ShapeError("from_rows: ragged initializer (row " + std::to_string(i) + ")");
        std::copy(r.begin(), r.end(), m.row(i));
        ++i;
    }
    return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

void check_mul_shapes(std::size_t ar, std::size_t ac, std::size_t br, std::size_t bc,
                      std::size_t or_, std::size_t oc, const char* what) {
    if (ac != br)
        throw ShapeError(std::string(what) + ": inner dimensions " + std::to_string(ac) +
                         " and " + std::to_string(br) + " do not match");
    if (or_ != ar || oc != bc)
        throw ShapeError(std::string(what) + ": output is " + std::to_string(or_) + "x" +
                         std::to_string(oc) + ", expected " + std::to_string(ar) + "x" +
                         std::to_string(bc));
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Matrix out(a.rows(), b.cols());
    matmul_into(out, a, b, false);
    return out;
}

// i-k-j order keeps the inner loop contiguous in both b and out.
void matmul_into(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate) {
    check_mul_shapes(a.rows(), a.cols(), b.rows(), b.cols(), out.rows(), out.cols(), "matmul");
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    if (!accumulate) out.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b.row(p);
            for (std::size_t j = 0; j < m; ++j) oi[j] += aip * bp[j];
        }
    }
}

void matmul_at_b_into(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate) {
    check_mul_shapes(a.cols(), a.rows(), b.rows(), b.cols(), out.rows(), out.cols(), "matmul_at_b");
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    if (!accumulate) out.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        const double* bi = b.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            double* op = out.row(p);
            for (std::size_t j = 0; j < m; ++j) op[j] += aip * bi[j];
        }
    }
}

void matmul_a_bt_into(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate) {
    check_mul_shapes(a.rows(), a.cols(), b.cols(), b.rows(), out.rows(), out.cols(), "matmul_a_bt");
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    if (!accumulate) out.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double* bj = b.row(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            oi[j] += acc;
        }
    }
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

namespace {
void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
}
} // namespace

void add_inplace(Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add");
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void sub_inplace(Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "sub");
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] -= pb[i];
}

void hadamard_inplace(Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "hadamard");
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] *= pb[i];
}

void scale_inplace(Matrix& a, double s) {
    double* pa = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] *= s;
}

void add_rowvec_inplace(Matrix& a, const Matrix& rowvec) {
    if (rowvec.rows() != 1 || rowvec.cols() != a.cols())
        throw ShapeError("add_rowvec: vector is " + std::to_string(rowvec.rows()) + "x" +
                         std::to_string(rowvec.cols()) + ", matrix has " +
                         std::to_string(a.cols()) + " columns");
    const double* r = rowvec.data();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ai = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) ai[j] += r[j];
    }
}

Matrix col_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    double* o = out.data();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* mi = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) o[j] += mi[j];
    }
    return out;
}

double activate_value(Activation kind, double x) {
    switch (kind) {
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Tanh: return std::tanh(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    }
    return x;
}

void activate_inplace(Activation kind, Matrix& m) {
    double* p = m.data();
    switch (kind) {
    case Activation::Sigmoid:
        for (std::size_t i = 0; i < m.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-p[i]));
        break;
    case Activation::Tanh:
        for (std::size_t i = 0; i < m.size(); ++i) p[i] = std::tanh(p[i]);
        break;
    case Activation::Relu:
        for (std::size_t i = 0; i < m.size(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
        break;
    }
}

Matrix activate(Activation kind, const Matrix& m) {
    Matrix out = m;
    activate_inplace(kind, out);
    return out;
}

// --- SeededRng ----------------------------------------------------------
//
// State expansion: four rounds of splitmix64 over the seed.
// Generation: xoshiro256++ (Blackman & Vigna), rotl(s0+s3,23)+s0 output.

namespace {
std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
} // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t SeededRng::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double SeededRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::size_t SeededRng::index(std::size_t n) {
    if (n == 0) throw ParamError("SeededRng::index: n must be positive");
    // Multiply-shift mapping of the top 64 bits; deterministic and unbiased
    // to within 2^-64.
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

SeededRng SeededRng::fork(std::uint64_t stream) const {
    std::uint64_t x = seed_;
    const std::uint64_t base = splitmix64(x);
    return SeededRng(base ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
}

Matrix bernoulli_mask(SeededRng& rng, std::size_t rows, std::size_t cols, double keep_prob) {
    if (!(keep_prob > 0.0) || keep_prob > 1.0)
        throw ParamError("bernoulli_mask: keep_prob must be in (0,1], got " +
                         std::to_string(keep_prob));
    Matrix m(rows, cols);
    const double scale = 1.0 / keep_prob;
    double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i)
        p[i] = rng.uniform() < keep_prob ? scale : 0.0;
    return m;
}

// --- least squares ------------------------------------------------------

std::vector<double> solve_least_squares(const Matrix& a, const std::vector<double>& b,
                                        const std::vector<std::string>* col_names) {
    if (a.rows() != b.size())
        throw ShapeError("least_squares: " + std::to_string(a.rows()) + " rows vs " +
                         std::to_string(b.size()) + " targets");
    const std::size_t n = a.cols();
    if (n == 0) return {};
    if (a.rows() < n)
        throw FitError("least_squares: underdetermined system (" + std::to_string(a.rows()) +
                       " rows, " + std::to_string(n) + " columns)");

    // Normal equations G x = r with G = a^T a.
    Matrix g(n, n);
    matmul_at_b_into(g, a, a, false);
    std::vector<double> r(n, 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        for (std::size_t j = 0; j < n; ++j) r[j] += ai[j] * b[i];
    }

    auto column_label = [&](std::size_t j) {
        if (col_names && j < col_names->size()) return (*col_names)[j];
        return "column " + std::to_string(j);
    };

    // Gaussian elimination with partial (row) pivoting; a vanishing pivot
    // at step `col` means regressor `col` is collinear with earlier ones.
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(g(i, i)));
    const double tol = 1e-12 * std::max(max_diag, 1.0);

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(g(i, col)) > std::abs(g(pivot, col))) pivot = i;
        if (std::abs(g(pivot, col)) <= tol)
            throw FitError("least_squares: rank-deficient design matrix; " +
                           column_label(col) + " is collinear");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(g(pivot, j), g(col, j));
            std::swap(r[pivot], r[col]);
        }
        const double d = g(col, col);
        for (std::size_t i = col + 1; i < n; ++i) {
            const double f = g(i, col) / d;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) g(i, j) -= f * g(col, j);
            r[i] -= f * r[col];
        }
    }

    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = r[i];
        for (std::size_t j = i + 1; j < n; ++j) acc -= g(i, j) * x[j];
        x[i] = acc / g(i, i);
    }
    return x;
}

} // namespace flowcast
