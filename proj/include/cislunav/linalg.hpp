#pragma once

// Dense real/complex linear algebra for small matrices (n <= ~50):
// symmetric eigendecomposition (cyclic Jacobi), Cholesky-based definiteness
// tests, LU solves, and largest-singular-value evaluation of transfer
// matrices on the imaginary axis. Everything is value-semantic and pure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cislunav {

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotSymmetricError : public NumericError {
public:
    using NumericError::NumericError;
};

class SingularMatrixError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Resolvent (jwI - A) singular at the requested frequency.
class SingularResolventError : public NumericError {
public:
    SingularResolventError(double omega, const std::string& what)
        : NumericError(what), omega(omega) {}
    double omega;
};

/// Row-major dense matrix of doubles. Dimensions are fixed at construction.
class Matrix {
public:
    Matrix() = default;

    Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {
        if (rows <= 0 || cols <= 0)
            throw NumericError("Matrix dimensions must be positive");
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = static_cast<int>(rows.size());
        if (rows_ == 0) throw NumericError("Matrix dimensions must be positive");
        cols_ = static_cast<int>(rows.begin()->size());
        if (cols_ == 0) throw NumericError("Matrix dimensions must be positive");
        data_.reserve(static_cast<size_t>(rows_) * cols_);
        for (const auto& r : rows) {
            if (static_cast<int>(r.size()) != cols_)
                throw NumericError("ragged initializer list");
            for (double v : r) data_.push_back(v);
        }
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diag(std::span<const double> d) {
        Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
        for (size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
        return m;
    }

    /// Column vector from a contiguous range.
    static Matrix column(std::span<const double> v) {
        Matrix m(static_cast<int>(v.size()), 1);
        std::copy(v.begin(), v.end(), m.data_.begin());
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix block(int i0, int j0, int r, int c) const {
        if (i0 < 0 || j0 < 0 || r <= 0 || c <= 0 || i0 + r > rows_ || j0 + c > cols_)
            throw NumericError("block out of range");
        Matrix b(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) b(i, j) = (*this)(i0 + i, j0 + j);
        return b;
    }

    void set_block(int i0, int j0, const Matrix& b) {
        if (i0 < 0 || j0 < 0 || i0 + b.rows() > rows_ || j0 + b.cols() > cols_)
            throw NumericError("set_block out of range");
        for (int i = 0; i < b.rows(); ++i)
            for (int j = 0; j < b.cols(); ++j) (*this)(i0 + i, j0 + j) = b(i, j);
    }

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(o);
        for (size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }

    Matrix& operator-=(const Matrix& o) {
        check_same_shape(o);
        for (size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    void check_same_shape(const Matrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw NumericError("shape mismatch");
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { a += b; return a; }
inline Matrix operator-(Matrix a, const Matrix& b) { a -= b; return a; }
inline Matrix operator*(Matrix a, double s) { a *= s; return a; }
inline Matrix operator*(double s, Matrix a) { a *= s; return a; }
inline Matrix operator-(Matrix a) { a *= -1.0; return a; }

inline Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw NumericError("matmul shape mismatch");
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

inline Matrix hstack(std::span<const Matrix> mats) {
    if (mats.empty()) throw NumericError("hstack of nothing");
    int rows = mats[0].rows(), cols = 0;
    for (const auto& m : mats) {
        if (m.rows() != rows) throw NumericError("hstack row mismatch");
        cols += m.cols();
    }
    Matrix out(rows, cols);
    int j0 = 0;
    for (const auto& m : mats) {
        out.set_block(0, j0, m);
        j0 += m.cols();
    }
    return out;
}

inline Matrix vstack(std::span<const Matrix> mats) {
    if (mats.empty()) throw NumericError("vstack of nothing");
    int cols = mats[0].cols(), rows = 0;
    for (const auto& m : mats) {
        if (m.cols() != cols) throw NumericError("vstack col mismatch");
        rows += m.rows();
    }
    Matrix out(rows, cols);
    int i0 = 0;
    for (const auto& m : mats) {
        out.set_block(i0, 0, m);
        i0 += m.rows();
    }
    return out;
}

inline Matrix hstack(std::initializer_list<Matrix> mats) {
    std::vector<Matrix> v(mats);
    return hstack(std::span<const Matrix>(v));
}

inline Matrix vstack(std::initializer_list<Matrix> mats) {
    std::vector<Matrix> v(mats);
    return vstack(std::span<const Matrix>(v));
}

/// blkdiag of two blocks; empty operands are allowed and act as neutral.
inline Matrix block_diag(const Matrix& a, const Matrix& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    Matrix out(a.rows() + b.rows(), a.cols() + b.cols());
    out.set_block(0, 0, a);
    out.set_block(a.rows(), a.cols(), b);
    return out;
}

inline double max_abs(const Matrix& m) {
    double v = 0.0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) v = std::max(v, std::abs(m(i, j)));
    return v;
}

inline double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    return max_abs(a - b);
}

inline double trace(const Matrix& m) {
    double s = 0.0;
    for (int i = 0; i < std::min(m.rows(), m.cols()); ++i) s += m(i, i);
    return s;
}

/// Symmetric part (A + A^T)/2.
inline Matrix sym(const Matrix& a) {
    Matrix s = a;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
    return s;
}

namespace detail {

inline void require_square(const Matrix& a, const char* who) {
    if (a.rows() != a.cols()) throw NumericError(std::string(who) + ": matrix not square");
}

inline void require_symmetric(const Matrix& a, const char* who, double rel_tol = 1e-12) {
    require_square(a, who);
    double scale = max_abs(a);
    double asym = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i + 1; j < a.cols(); ++j)
            asym = std::max(asym, std::abs(a(i, j) - a(j, i)));
    if (asym > rel_tol * std::max(scale, 1e-300))
        throw NotSymmetricError(std::string(who) + ": matrix not symmetric");
}

} // namespace detail

struct SymEig {
    std::vector<double> values; // ascending
    Matrix vectors;             // orthonormal columns, A = V diag(values) V^T
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Input must be
/// symmetric to 1e-12 relative asymmetry; it is symmetrized internally
/// before sweeping.
inline SymEig sym_eig(const Matrix& input) {
    detail::require_symmetric(input, "sym_eig");
    const int n = input.rows();
    Matrix a = sym(input);
    Matrix v = Matrix::identity(n);

    const double fro = std::max(frobenius_norm(a), 1e-300);
    const double target = 1e-15 * fro;

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(2.0 * off) <= target) break;

        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p), aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 1.0 / (2.0 * theta);
                } else {
                    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (int r = 0; r < n; ++r) {
                    if (r != p && r != q) {
                        const double arp = a(r, p), arq = a(r, q);
                        a(r, p) = arp - s * (arq + tau * arp);
                        a(p, r) = a(r, p);
                        a(r, q) = arq + s * (arp - tau * arq);
                        a(q, r) = a(r, q);
                    }
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = vrp - s * (vrq + tau * vrp);
                    v(r, q) = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });

    SymEig out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (int k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (int r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    return out;
}

inline double sym_lambda_max(const Matrix& a) {
    return sym_eig(a).values.back();
}

inline double sym_lambda_min(const Matrix& a) {
    return sym_eig(a).values.front();
}

/// Cholesky factorization used as the definiteness test. Returns the lower
/// factor L with L L^T = A, or nullopt when a pivot falls at or below
/// tol * max(diag(A)). Definiteness failure is a result, not an error.
inline std::optional<Matrix> chol_posdef(const Matrix& a, double tol = 1e-12) {
    detail::require_symmetric(a, "chol_posdef");
    const int n = a.rows();
    double max_diag = 0.0;
    for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
    const double thresh = tol * std::max(max_diag, 0.0);

    Matrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > thresh) || !std::isfinite(d)) return std::nullopt;
        l(j, j) = std::sqrt(d);
        const double inv = 1.0 / l(j, j);
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s * inv;
        }
    }
    return l;
}

/// Solve A X = B by LU with partial pivoting. Throws SingularMatrixError.
inline Matrix solve_lu(const Matrix& a, const Matrix& b) {
    detail::require_square(a, "solve_lu");
    if (a.rows() != b.rows()) throw NumericError("solve_lu shape mismatch");
    const int n = a.rows(), m = b.cols();
    Matrix lu = a;
    Matrix x = b;
    const double tiny = 1e-14 * std::max(max_abs(a), 1e-300);

    std::vector<int> piv(n);
    for (int i = 0; i < n; ++i) piv[i] = i;

    for (int k = 0; k < n; ++k) {
        int p = k;
        double best = std::abs(lu(k, k));
        for (int i = k + 1; i < n; ++i) {
            if (std::abs(lu(i, k)) > best) {
                best = std::abs(lu(i, k));
                p = i;
            }
        }
        if (!(best > tiny)) throw SingularMatrixError("solve_lu: singular matrix");
        if (p != k) {
            for (int j = 0; j < n; ++j) std::swap(lu(k, j), lu(p, j));
            for (int j = 0; j < m; ++j) std::swap(x(k, j), x(p, j));
        }
        const double inv = 1.0 / lu(k, k);
        for (int i = k + 1; i < n; ++i) {
            const double f = lu(i, k) * inv;
            lu(i, k) = f;
            if (f == 0.0) continue;
            for (int j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
            for (int j = 0; j < m; ++j) x(i, j) -= f * x(k, j);
        }
    }
    for (int k = n - 1; k >= 0; --k) {
        const double inv = 1.0 / lu(k, k);
        for (int j = 0; j < m; ++j) {
            double s = x(k, j);
            for (int i = k + 1; i < n; ++i) s -= lu(k, i) * x(i, j);
            x(k, j) = s * inv;
        }
    }
    return x;
}

inline Matrix inverse(const Matrix& a) {
    return solve_lu(a, Matrix::identity(a.rows()));
}

/// Complex matrix carried as a real/imaginary pair. Complex solves go
/// through the 2n x 2n real block embedding so there is a single
/// factorization code path.
struct ComplexMatrix {
    Matrix re, im;

    ComplexMatrix() = default;
    ComplexMatrix(Matrix real, Matrix imag) : re(std::move(real)), im(std::move(imag)) {
        if (re.rows() != im.rows() || re.cols() != im.cols())
            throw NumericError("ComplexMatrix part shape mismatch");
    }
    int rows() const { return re.rows(); }
    int cols() const { return re.cols(); }
};

/// Solve (A_re + i A_im) X = (B_re + i B_im) via the real block system
/// [[A_re, -A_im], [A_im, A_re]].
inline ComplexMatrix solve_complex(const Matrix& a_re, const Matrix& a_im,
                                   const Matrix& b_re, const Matrix& b_im) {
    const int n = a_re.rows(), m = b_re.cols();
    Matrix big(2 * n, 2 * n);
    big.set_block(0, 0, a_re);
    big.set_block(0, n, -a_im);
    big.set_block(n, 0, a_im);
    big.set_block(n, n, a_re);
    Matrix rhs(2 * n, m);
    rhs.set_block(0, 0, b_re);
    rhs.set_block(n, 0, b_im);
    Matrix sol = solve_lu(big, rhs);
    return ComplexMatrix(sol.block(0, 0, n, m), sol.block(n, 0, n, m));
}

/// Largest singular value of a complex matrix, via the Hermitian Gram
/// matrix on the smaller side (closed form up to 2x2, real embedding above).
inline double max_singular_value(const ComplexMatrix& m) {
    const bool wide = m.rows() <= m.cols();
    // G = M M^H (rows x rows) or M^H M (cols x cols), whichever is smaller.
    const Matrix& r = m.re;
    const Matrix& i = m.im;
    Matrix g_re = wide ? (r * r.transposed() + i * i.transposed())
                       : (r.transposed() * r + i.transposed() * i);
    Matrix g_im = wide ? (i * r.transposed() - r * i.transposed())
                       : (r.transposed() * i - i.transposed() * r);
    const int k = g_re.rows();
    double lam;
    if (k == 1) {
        lam = g_re(0, 0);
    } else if (k == 2) {
        const double a = g_re(0, 0), b = g_re(1, 1);
        const double cr = g_re(0, 1), ci = g_im(0, 1);
        const double mid = 0.5 * (a + b);
        const double rad = std::sqrt(0.25 * (a - b) * (a - b) + cr * cr + ci * ci);
        lam = mid + rad;
    } else {
        // Hermitian G embeds as the symmetric [[G_re, -G_im], [G_im, G_re]].
        Matrix big(2 * k, 2 * k);
        big.set_block(0, 0, g_re);
        big.set_block(0, k, -g_im);
        big.set_block(k, 0, g_im);
        big.set_block(k, k, g_re);
        lam = sym_lambda_max(big);
    }
    return std::sqrt(std::max(lam, 0.0));
}

inline double min_singular_value(const Matrix& m) {
    Matrix g = m.transposed() * m;
    return std::sqrt(std::max(sym_lambda_min(g), 0.0));
}

/// sigma_max( C (jw I - A)^{-1} B + D ) at a single frequency w.
inline double max_sv_freq(const Matrix& a, const Matrix& b, const Matrix& c,
                          const Matrix& d, double omega) {
    const int n = a.rows();
    Matrix a_re = -a;
    Matrix a_im(n, n);
    for (int i = 0; i < n; ++i) a_im(i, i) = omega;
    ComplexMatrix x;
    try {
        x = solve_complex(a_re, a_im, b, Matrix(b.rows(), b.cols()));
    } catch (const SingularMatrixError&) {
        throw SingularResolventError(omega, "max_sv_freq: resolvent singular at given frequency");
    }
    ComplexMatrix t(c * x.re + d, c * x.im);
    return max_singular_value(t);
}

inline double max_sv_freq(const Matrix& a, const Matrix& b, const Matrix& c, double omega) {
    return max_sv_freq(a, b, c, Matrix(c.rows(), b.cols()), omega);
}

inline std::string to_string(const Matrix& m, int precision = 6) {
    std::ostringstream os;
    os.precision(precision);
    for (int i = 0; i < m.rows(); ++i) {
        os << (i == 0 ? "[" : " ");
        for (int j = 0; j < m.cols(); ++j) os << (j ? " " : "[") << m(i, j);
        os << "]" << (i + 1 == m.rows() ? "]" : "\n");
    }
    return os.str();
}

} // namespace cislunav
