#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gpda {

// Error taxonomy shared by all modules.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major real64 matrix. Everything in this project is 2-D.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0)
        : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {
        if (r < 0 || c < 0) throw ShapeError("Mat: negative dimension");
    }

    static Mat eye(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Mat from_rows(std::initializer_list<std::initializer_list<double>> rs) {
        Mat m(static_cast<int>(rs.size()), rs.size() ? static_cast<int>(rs.begin()->size()) : 0);
        int i = 0;
        for (const auto& r : rs) {
            if (static_cast<int>(r.size()) != m.cols) throw ShapeError("Mat::from_rows: ragged rows");
            int j = 0;
            for (double v : r) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    std::size_t size() const { return a.size(); }

    void fill(double v) { std::fill(a.begin(), a.end(), v); }

    bool all_finite() const {
        for (double v : a)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

inline bool operator==(const Mat& x, const Mat& y) {
    return x.rows == y.rows && x.cols == y.cols && x.a == y.a;
}

inline Mat mat_mul(const Mat& x, const Mat& y) {
    if (x.cols != y.rows)
        throw ShapeError("matmul: inner dimensions disagree: " + x.shape_str() + " vs " + y.shape_str());
    Mat out(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = &x.a[static_cast<std::size_t>(i) * x.cols];
        double* oi = &out.a[static_cast<std::size_t>(i) * out.cols];
        for (int k = 0; k < x.cols; ++k) {
            const double v = xi[k];
            if (v == 0.0) continue;
            const double* yk = &y.a[static_cast<std::size_t>(k) * y.cols];
            for (int j = 0; j < y.cols; ++j) oi[j] += v * yk[j];
        }
    }
    return out;
}

// x * y^T
inline Mat mat_mul_nt(const Mat& x, const Mat& y) {
    if (x.cols != y.cols)
        throw ShapeError("matmul_nt: inner dimensions disagree: " + x.shape_str() + " vs " + y.shape_str());
    Mat out(x.rows, y.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < y.rows; ++j) {
            double s = 0.0;
            const double* xi = &x.a[static_cast<std::size_t>(i) * x.cols];
            const double* yj = &y.a[static_cast<std::size_t>(j) * y.cols];
            for (int k = 0; k < x.cols; ++k) s += xi[k] * yj[k];
            out(i, j) = s;
        }
    return out;
}

// x^T * y
inline Mat mat_mul_tn(const Mat& x, const Mat& y) {
    if (x.rows != y.rows)
        throw ShapeError("matmul_tn: inner dimensions disagree: " + x.shape_str() + " vs " + y.shape_str());
    Mat out(x.cols, y.cols);
    for (int k = 0; k < x.rows; ++k) {
        const double* xk = &x.a[static_cast<std::size_t>(k) * x.cols];
        const double* yk = &y.a[static_cast<std::size_t>(k) * y.cols];
        for (int i = 0; i < x.cols; ++i) {
            const double v = xk[i];
            if (v == 0.0) continue;
            double* oi = &out.a[static_cast<std::size_t>(i) * out.cols];
            for (int j = 0; j < y.cols; ++j) oi[j] += v * yk[j];
        }
    }
    return out;
}

inline Mat one_hot(const std::vector<int>& ids, int classes) {
    Mat m(static_cast<int>(ids.size()), classes);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= classes)
            throw ContractError("one_hot: label " + std::to_string(ids[i]) + " outside [0," +
                                std::to_string(classes) + ")");
        m(static_cast<int>(i), ids[i]) = 1.0;
    }
    return m;
}

/// Ties break toward the lowest index.
inline int argmax_row(const Mat& m, int row) {
    int best = 0;
    for (int j = 1; j < m.cols; ++j)
        if (m(row, j) > m(row, best)) best = j;
    return best;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent deterministic sub-stream seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

/// Deterministic RNG. std::mt19937_64 output is pinned by the standard; the
/// distributions are hand-rolled because the std ones are not.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return eng_(); }

    /// [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Box-Muller with cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    /// [0, n)
    int uniform_int(int n) {
        if (n <= 0) throw ContractError("Rng::uniform_int: n must be positive");
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % un;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<int>(x % un);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gpda
