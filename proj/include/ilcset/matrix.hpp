#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ilcset/errors.hpp"
#include "ilcset/tolerances.hpp"

namespace ilcset {

/// Dense row-major real matrix. Zero-sized dimensions are allowed so that
/// empty partitions (e.g. the frozen block of a square plant) stay regular.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw DimensionMismatch("Mat: entry count does not equal rows*cols");
        }
    }
    Mat(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw DimensionMismatch("Mat: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat zeros(std::size_t rows, std::size_t cols) { return Mat(rows, cols); }
    static Mat column(std::initializer_list<double> v) {
        return Mat(v.size(), 1, std::vector<double>(v));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool square() const noexcept { return rows_ == cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    /// Flat access, convenient for column vectors.
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
    }

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline std::string shape_str(const Mat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

namespace detail {
inline void require_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionMismatch(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
    }
}
}  // namespace detail

inline Mat operator+(const Mat& a, const Mat& b) {
    detail::require_same_shape(a, b, "mat_add");
    Mat r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
    return r;
}

inline Mat operator-(const Mat& a, const Mat& b) {
    detail::require_same_shape(a, b, "mat_sub");
    Mat r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return r;
}

inline Mat operator-(const Mat& a) {
    Mat r = a;
    for (auto& x : r.data()) x = -x;
    return r;
}

inline Mat operator*(double s, const Mat& a) {
    Mat r = a;
    for (auto& x : r.data()) x *= s;
    return r;
}

inline Mat operator*(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) {
        throw DimensionMismatch("mat_mul: " + shape_str(a) + " * " + shape_str(b));
    }
    Mat r(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
        }
    }
    return r;
}

inline Mat& operator+=(Mat& a, const Mat& b) {
    detail::require_same_shape(a, b, "mat_add");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Mat& operator-=(Mat& a, const Mat& b) {
    detail::require_same_shape(a, b, "mat_sub");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

inline Mat transpose(const Mat& a) {
    Mat r(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r(j, i) = a(i, j);
    return r;
}

inline Mat hcat(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows()) throw DimensionMismatch("hcat: " + shape_str(a) + " | " + shape_str(b));
    Mat r(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) r(i, a.cols() + j) = b(i, j);
    }
    return r;
}

inline Mat vcat(const Mat& a, const Mat& b) {
    if (a.cols() != b.cols()) throw DimensionMismatch("vcat: " + shape_str(a) + " / " + shape_str(b));
    Mat r(a.rows() + b.rows(), a.cols());
    std::copy(a.data().begin(), a.data().end(), r.data().begin());
    std::copy(b.data().begin(), b.data().end(), r.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
    return r;
}

/// Assembles [[m11, m12], [m21, m22]].
inline Mat block2x2(const Mat& m11, const Mat& m12, const Mat& m21, const Mat& m22) {
    if (m11.rows() != m12.rows() || m21.rows() != m22.rows() || m11.cols() != m21.cols() ||
        m12.cols() != m22.cols()) {
        throw DimensionMismatch("block2x2: blocks do not conform");
    }
    return vcat(hcat(m11, m12), hcat(m21, m22));
}

/// Copies the sub-block starting at (r0, c0) of size nr x nc.
inline Mat block(const Mat& a, std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) {
    if (r0 + nr > a.rows() || c0 + nc > a.cols()) throw DimensionMismatch("block: out of range");
    Mat r(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t j = 0; j < nc; ++j) r(i, j) = a(r0 + i, c0 + j);
    return r;
}

/// Reorders columns so that column j of the result is column perm[j] of `a`.
inline Mat permute_cols(const Mat& a, std::span<const std::size_t> perm) {
    if (perm.size() != a.cols()) throw DimensionMismatch("permute_cols: permutation length");
    Mat r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = a(i, perm[j]);
    return r;
}

/// Reorders rows so that row i of the result is row perm[i] of `a`.
inline Mat permute_rows(const Mat& a, std::span<const std::size_t> perm) {
    if (perm.size() != a.rows()) throw DimensionMismatch("permute_rows: permutation length");
    Mat r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = a(perm[i], j);
    return r;
}

/// Inverse of permute_rows: row perm[i] of the result is row i of `a`.
inline Mat unpermute_rows(const Mat& a, std::span<const std::size_t> perm) {
    if (perm.size() != a.rows()) throw DimensionMismatch("unpermute_rows: permutation length");
    Mat r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r(perm[i], j) = a(i, j);
    return r;
}

/// Maximum row sum norm.
inline double inf_norm(const Mat& m) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += std::abs(m(i, j));
        best = std::max(best, s);
    }
    return best;
}

inline double max_abs(const Mat& m) {
    double best = 0.0;
    for (double x : m.data()) best = std::max(best, std::abs(x));
    return best;
}

/// Eigenvalues of a general real square matrix: balancing, Hessenberg
/// reduction by stabilized elimination, then Francis double-shift QR.
inline std::vector<std::complex<double>> eigenvalues(const Mat& m) {
    if (!m.square()) throw NonSquare("eigenvalues: matrix is " + shape_str(m));
    const int n = static_cast<int>(m.rows());
    std::vector<std::complex<double>> out;
    if (n == 0) return out;

    // 1-based working copy keeps the classical index arithmetic readable.
    std::vector<std::vector<double>> a(n + 1, std::vector<double>(n + 1, 0.0));
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) a[i][j] = m(i - 1, j - 1);

    // balance
    constexpr double radix = 2.0;
    bool done = false;
    while (!done) {
        done = true;
        for (int i = 1; i <= n; ++i) {
            double r = 0.0, c = 0.0;
            for (int j = 1; j <= n; ++j) {
                if (j == i) continue;
                c += std::abs(a[j][i]);
                r += std::abs(a[i][j]);
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix, f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix * radix;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (int j = 1; j <= n; ++j) a[i][j] *= g;
                for (int j = 1; j <= n; ++j) a[j][i] *= f;
            }
        }
    }

    // Hessenberg form
    for (int mm = 2; mm < n; ++mm) {
        double x = 0.0;
        int piv = mm;
        for (int j = mm; j <= n; ++j) {
            if (std::abs(a[j][mm - 1]) > std::abs(x)) {
                x = a[j][mm - 1];
                piv = j;
            }
        }
        if (piv != mm) {
            for (int j = mm - 1; j <= n; ++j) std::swap(a[piv][j], a[mm][j]);
            for (int j = 1; j <= n; ++j) std::swap(a[j][piv], a[j][mm]);
        }
        if (x != 0.0) {
            for (int i = mm + 1; i <= n; ++i) {
                double y = a[i][mm - 1];
                if (y == 0.0) continue;
                y /= x;
                a[i][mm - 1] = y;
                for (int j = mm; j <= n; ++j) a[i][j] -= y * a[mm][j];
                for (int j = 1; j <= n; ++j) a[j][mm] += y * a[j][i];
            }
        }
    }
    for (int i = 3; i <= n; ++i)
        for (int j = 1; j < i - 1; ++j) a[i][j] = 0.0;

    // shifted QR on the Hessenberg matrix
    std::vector<double> wr(n + 1, 0.0), wi(n + 1, 0.0);
    double anorm = 0.0;
    for (int i = 1; i <= n; ++i)
        for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(a[i][j]);

    auto sign = [](double v, double s) { return s >= 0.0 ? std::abs(v) : -std::abs(v); };
    int nn = n;
    int sweeps = 0;
    double t = 0.0;
    double p = 0, q = 0, r = 0, s = 0, w = 0, x = 0, y = 0, z = 0;
    while (nn >= 1) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l >= 2; --l) {
                s = std::abs(a[l - 1][l - 1]) + std::abs(a[l][l]);
                if (s == 0.0) s = anorm;
                if (std::abs(a[l][l - 1]) + s == s) {
                    a[l][l - 1] = 0.0;
                    break;
                }
            }
            x = a[nn][nn];
            if (l == nn) {
                wr[nn] = x + t;
                wi[nn--] = 0.0;
            } else {
                y = a[nn - 1][nn - 1];
                w = a[nn][nn - 1] * a[nn - 1][nn];
                if (l == nn - 1) {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + sign(z, p);
                        wr[nn - 1] = wr[nn] = x + z;
                        if (z != 0.0) wr[nn] = x - w / z;
                        wi[nn - 1] = wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = wr[nn] = x + p;
                        wi[nn - 1] = -(wi[nn] = z);
                    }
                    nn -= 2;
                } else {
                    if (++sweeps > tol::eigen_sweeps) {
                        throw NoConvergence("eigenvalues: QR iteration exceeded its sweep budget");
                    }
                    if (its > 0 && its % 10 == 0) {
                        // exceptional shift
                        t += x;
                        for (int i = 1; i <= nn; ++i) a[i][i] -= x;
                        s = std::abs(a[nn][nn - 1]) + std::abs(a[nn - 1][nn - 2]);
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    int mm = nn - 2;
                    for (; mm >= l; --mm) {
                        z = a[mm][mm];
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / a[mm + 1][mm] + a[mm][mm + 1];
                        q = a[mm + 1][mm + 1] - z - r - s;
                        r = a[mm + 2][mm + 1];
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (mm == l) break;
                        const double u = std::abs(a[mm][mm - 1]) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(a[mm - 1][mm - 1]) + std::abs(z) +
                                                        std::abs(a[mm + 1][mm + 1]));
                        if (u + v == v) break;
                    }
                    for (int i = mm + 2; i <= nn; ++i) {
                        a[i][i - 2] = 0.0;
                        if (i != mm + 2) a[i][i - 3] = 0.0;
                    }
                    for (int k = mm; k <= nn - 1; ++k) {
                        if (k != mm) {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if (k != nn - 1) r = a[k + 2][k - 1];
                            if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        if ((s = sign(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
                            if (k == mm) {
                                if (l != mm) a[k][k - 1] = -a[k][k - 1];
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for (int j = k; j <= nn; ++j) {
                                p = a[k][j] + q * a[k + 1][j];
                                if (k != nn - 1) {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            const int mmin = nn < k + 3 ? nn : k + 3;
                            for (int i = l; i <= mmin; ++i) {
                                p = x * a[i][k] + y * a[i][k + 1];
                                if (k != nn - 1) {
                                    p += z * a[i][k + 2];
                                    a[i][k + 2] -= p * r;
                                }
                                a[i][k + 1] -= p * q;
                                a[i][k] -= p;
                            }
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }

    out.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) out.emplace_back(wr[i], wi[i]);
    return out;
}

inline double spectral_radius(const Mat& m) {
    double best = 0.0;
    for (const auto& ev : eigenvalues(m)) best = std::max(best, std::abs(ev));
    return best;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Only the upper triangle is trusted; the lower one is mirrored first.
inline std::vector<double> symmetric_eigenvalues(const Mat& m) {
    if (!m.square()) throw NonSquare("symmetric_eigenvalues: matrix is " + shape_str(m));
    const std::size_t n = m.rows();
    Mat a = m;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);

    auto off = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
        return s;
    };
    double scale = 0.0;
    for (double v : a.data()) scale += v * v;

    int sweep = 0;
    while (off() > 1e-30 * scale && scale > 0.0) {
        if (++sweep > tol::eigen_sweeps) {
            throw NoConvergence("symmetric_eigenvalues: Jacobi sweep budget exhausted");
        }
        for (std::size_t pp = 0; pp < n; ++pp) {
            for (std::size_t qq = pp + 1; qq < n; ++qq) {
                const double apq = a(pp, qq);
                if (apq == 0.0) continue;
                const double theta = (a(qq, qq) - a(pp, pp)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, pp), akq = a(k, qq);
                    a(k, pp) = c * akp - s * akq;
                    a(k, qq) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(pp, k), aqk = a(qq, k);
                    a(pp, k) = c * apk - s * aqk;
                    a(qq, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

inline double max_symmetric_eigenvalue(const Mat& m) {
    const auto ev = symmetric_eigenvalues(m);
    return ev.empty() ? 0.0 : ev.back();
}

/// Largest singular value, sqrt of the spectral radius of mᵀm.
inline double spectral_norm(const Mat& m) {
    if (m.empty()) return 0.0;
    const Mat gram = m.cols() <= m.rows() ? transpose(m) * m : m * transpose(m);
    return std::sqrt(std::max(0.0, max_symmetric_eigenvalue(gram)));
}

/// Gauss-Jordan inverse with partial pivoting.
inline Mat invert(const Mat& m) {
    if (!m.square()) throw NonSquare("invert: matrix is " + shape_str(m));
    const std::size_t n = m.rows();
    const double floor = tol::pivot_relative * inf_norm(m);
    Mat a = m;
    Mat inv = Mat::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
        const double pv = a(piv, col);
        if (std::abs(pv) <= floor || pv == 0.0) {
            throw Singular("invert: pivot " + std::to_string(pv) + " below threshold in column " +
                           std::to_string(col));
        }
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(piv, j), a(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        }
        const double d = 1.0 / pv;
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) *= d;
            inv(col, j) *= d;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == col) continue;
            const double f = a(i, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(i, j) -= f * a(col, j);
                inv(i, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

inline double determinant(const Mat& m) {
    if (!m.square()) throw NonSquare("determinant: matrix is " + shape_str(m));
    const std::size_t n = m.rows();
    Mat a = m;
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
        if (a(piv, col) == 0.0) return 0.0;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
            det = -det;
        }
        det *= a(col, col);
        for (std::size_t i = col + 1; i < n; ++i) {
            const double f = a(i, col) / a(col, col);
            for (std::size_t j = col; j < n; ++j) a(i, j) -= f * a(col, j);
        }
    }
    return det;
}

/// ‖m − I‖∞, the residual used by every identity check.
inline double identity_residual(const Mat& m) {
    if (!m.square()) throw NonSquare("identity_residual: matrix is " + shape_str(m));
    return inf_norm(m - Mat::identity(m.rows()));
}

}  // namespace ilcset
