#pragma once

// Exact linear fractional transformation algebra over real uncertain
// parameters normalized to [-1, 1]. A model is a partitioned coefficient
// matrix M = [[M11, M12], [M21, M22]] in upper feedback with a structured
// block Delta = blkdiag(delta_k I_{n_k}); evaluation is
//   M22 + M21 Delta (I - M11 Delta)^{-1} M12.
// Sums, products, inverses and concatenations are closed operations, so
// rational expressions in the parameters are represented without
// approximation. No order reduction is attempted; repetition counts fall
// out of the chosen realization and are reported, not hard-coded.

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cislunav/linalg.hpp"
#include "cislunav/rng.hpp"

namespace cislunav {

class IllPosedError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Real parameter with multiplicative normalization
/// value(delta) = nominal * (1 + delta * relative_spread), delta in [-1,1].
/// The interval endpoints are stored so delta = +-1 maps to them exactly.
struct UncertainReal {
    double nominal = 0;
    double relative_spread = 0;
    double min = 0;
    double max = 0;
    std::string label;
};

inline UncertainReal make_uncertain(double min, double max, std::string label) {
    if (!(min > 0) || !(max > min))
        throw NumericError("make_uncertain: need 0 < min < max");
    UncertainReal u;
    u.nominal = 0.5 * (min + max);
    u.relative_spread = (max - min) / (max + min);
    u.min = min;
    u.max = max;
    u.label = std::move(label);
    return u;
}

inline double denormalize(const UncertainReal& u, double delta) {
    if (delta == 1.0) return u.max;
    if (delta == -1.0) return u.min;
    return u.nominal * (1.0 + delta * u.relative_spread);
}

inline double normalize(const UncertainReal& u, double value) {
    return (value - u.nominal) / (u.nominal * u.relative_spread);
}

struct DeltaBlock {
    std::string label;
    int count = 0;
};

/// Normalized parameter values, one entry per distinct label.
using DeltaAssignment = std::map<std::string, double>;

class LftModel {
public:
    /// Constant matrix: empty Delta channel.
    static LftModel constant(Matrix c) {
        LftModel m;
        m.m22_ = std::move(c);
        return m;
    }

    static LftModel constant(double c) { return constant(Matrix{{c}}); }

    /// Explicit partition; Sum of structure counts must match the M11 size.
    static LftModel from_partition(Matrix m11, Matrix m12, Matrix m21, Matrix m22,
                                   std::vector<DeltaBlock> structure) {
        int total = 0;
        for (const auto& b : structure) {
            if (b.count <= 0) throw NumericError("LftModel: block counts must be positive");
            total += b.count;
        }
        if (m11.rows() != m11.cols() || m11.rows() != total || m12.rows() != total ||
            m21.cols() != total || m21.rows() != m22.rows() || m12.cols() != m22.cols())
            throw NumericError("LftModel: inconsistent partition dimensions");
        LftModel m;
        m.m11_ = std::move(m11);
        m.m12_ = std::move(m12);
        m.m21_ = std::move(m21);
        m.m22_ = std::move(m22);
        m.structure_ = std::move(structure);
        return m;
    }

    /// Scalar parameter as a 1x1 LFT: M = [[0, 1], [nominal*spread, nominal]].
    static LftModel uncertain(const UncertainReal& u) {
        LftModel m;
        m.m11_ = Matrix(1, 1);
        m.m12_ = Matrix{{1.0}};
        m.m21_ = Matrix{{u.nominal * u.relative_spread}};
        m.m22_ = Matrix{{u.nominal}};
        m.structure_ = {{u.label, 1}};
        return m;
    }

    int delta_dim() const { return m11_.empty() ? 0 : m11_.rows(); }
    int out_rows() const { return m22_.rows(); }
    int in_cols() const { return m22_.cols(); }

    const Matrix& m11() const { return m11_; }
    const Matrix& m12() const { return m12_; }
    const Matrix& m21() const { return m21_; }
    const Matrix& m22() const { return m22_; }
    const std::vector<DeltaBlock>& structure() const { return structure_; }

    /// Total repetition count per label, in first-appearance order.
    std::vector<DeltaBlock> counts() const {
        std::vector<DeltaBlock> out;
        for (const auto& b : structure_) {
            bool found = false;
            for (auto& o : out) {
                if (o.label == b.label) {
                    o.count += b.count;
                    found = true;
                }
            }
            if (!found) out.push_back(b);
        }
        return out;
    }

    /// Diagonal of Delta for a given assignment; every structure label must
    /// be present exactly once.
    std::vector<double> delta_diagonal(const DeltaAssignment& d) const {
        std::vector<double> diag;
        diag.reserve(delta_dim());
        for (const auto& b : structure_) {
            auto it = d.find(b.label);
            if (it == d.end())
                throw NumericError("lft_eval: missing delta for label " + b.label);
            for (int k = 0; k < b.count; ++k) diag.push_back(it->second);
        }
        return diag;
    }

    /// Upper LFT evaluation. Throws IllPosedError when I - M11 Delta is
    /// singular at the given assignment.
    Matrix eval(const DeltaAssignment& d) const {
        if (delta_dim() == 0) return m22_;
        const auto diag = delta_diagonal(d);
        const int p = delta_dim();
        Matrix i_m11d = Matrix::identity(p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) i_m11d(i, j) -= m11_(i, j) * diag[j];
        Matrix y;
        try {
            y = solve_lu(i_m11d, m12_);
        } catch (const SingularMatrixError&) {
            std::ostringstream os;
            os << "lft_eval: ill-posed at delta = {";
            for (const auto& [k, v] : d) os << " " << k << ": " << v;
            os << " }";
            throw IllPosedError(os.str());
        }
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < y.cols(); ++j) y(i, j) *= diag[i];
        return m22_ + m21_ * y;
    }

    /// Structured-text dump: partition sizes, Delta structure, nominal value.
    std::string dump() const {
        std::ostringstream os;
        os << "LftModel: delta_dim=" << delta_dim() << " out=" << out_rows()
           << "x" << in_cols() << "\n";
        os << "  delta structure:";
        if (structure_.empty()) os << " (none)";
        for (const auto& b : counts()) os << " " << b.label << " x" << b.count;
        os << "\n  nominal value:\n" << to_string(m22_) << "\n";
        return os.str();
    }

    friend LftModel lft_add(const LftModel& a, const LftModel& b);
    friend LftModel lft_mul(const LftModel& a, const LftModel& b);
    friend LftModel lft_scale(const LftModel& a, double s);
    friend LftModel lft_inverse(const LftModel& a);
    friend LftModel lft_hcat(const LftModel& a, const LftModel& b);
    friend LftModel lft_vcat(const LftModel& a, const LftModel& b);

private:
    static std::vector<DeltaBlock> concat(const std::vector<DeltaBlock>& a,
                                          const std::vector<DeltaBlock>& b) {
        std::vector<DeltaBlock> out = a;
        for (const auto& blk : b) {
            if (!out.empty() && out.back().label == blk.label)
                out.back().count += blk.count;
            else
                out.push_back(blk);
        }
        return out;
    }

    // Empty-aware block helpers: the Delta channel of a constant has
    // dimension zero.
    static Matrix stack_m12(const LftModel& a, const LftModel& b) {
        if (a.delta_dim() == 0) return b.m12_;
        if (b.delta_dim() == 0) return a.m12_;
        return vstack({a.m12_, b.m12_});
    }

    Matrix m11_, m12_, m21_, m22_;
    std::vector<DeltaBlock> structure_;
};

/// Sum; operands must have equal output/input dimensions.
inline LftModel lft_add(const LftModel& a, const LftModel& b) {
    if (a.out_rows() != b.out_rows() || a.in_cols() != b.in_cols())
        throw NumericError("lft_add: shape mismatch");
    LftModel r;
    r.m22_ = a.m22_ + b.m22_;
    r.structure_ = LftModel::concat(a.structure_, b.structure_);
    if (a.delta_dim() == 0 && b.delta_dim() == 0) return r;
    r.m11_ = block_diag(a.m11_, b.m11_);
    r.m12_ = LftModel::stack_m12(a, b);
    if (a.delta_dim() == 0)
        r.m21_ = b.m21_;
    else if (b.delta_dim() == 0)
        r.m21_ = a.m21_;
    else
        r.m21_ = hstack({a.m21_, b.m21_});
    return r;
}

/// Product a * b in the matrix sense (a.in_cols == b.out_rows).
inline LftModel lft_mul(const LftModel& a, const LftModel& b) {
    if (a.in_cols() != b.out_rows()) throw NumericError("lft_mul: shape mismatch");
    LftModel r;
    r.m22_ = a.m22_ * b.m22_;
    r.structure_ = LftModel::concat(a.structure_, b.structure_);
    const int pa = a.delta_dim(), pb = b.delta_dim();
    if (pa == 0 && pb == 0) return r;
    if (pa == 0) {
        r.m11_ = b.m11_;
        r.m12_ = b.m12_;
        r.m21_ = a.m22_ * b.m21_;
        return r;
    }
    if (pb == 0) {
        r.m11_ = a.m11_;
        r.m12_ = a.m12_ * b.m22_;
        r.m21_ = a.m21_;
        return r;
    }
    r.m11_ = Matrix(pa + pb, pa + pb);
    r.m11_.set_block(0, 0, a.m11_);
    r.m11_.set_block(0, pa, a.m12_ * b.m21_);
    r.m11_.set_block(pa, pa, b.m11_);
    r.m12_ = vstack({a.m12_ * b.m22_, b.m12_});
    r.m21_ = hstack({a.m21_, a.m22_ * b.m21_});
    return r;
}

inline LftModel lft_scale(const LftModel& a, double s) {
    LftModel r = a;
    r.m22_ *= s;
    if (r.delta_dim() > 0) r.m21_ *= s;
    return r;
}

/// Inverse of a square LFT. Requires the nominal part (M22) invertible;
/// well-posedness of the result over the box is the caller's check.
inline LftModel lft_inverse(const LftModel& a) {
    if (a.out_rows() != a.in_cols()) throw NumericError("lft_inverse: not square");
    Matrix m22_inv;
    try {
        m22_inv = inverse(a.m22_);
    } catch (const SingularMatrixError&) {
        throw NumericError("lft_inverse: nominal part singular");
    }
    LftModel r;
    r.structure_ = a.structure_;
    r.m22_ = m22_inv;
    if (a.delta_dim() == 0) return r;
    r.m11_ = a.m11_ - a.m12_ * m22_inv * a.m21_;
    r.m12_ = a.m12_ * m22_inv;
    r.m21_ = -(m22_inv * a.m21_);
    return r;
}

/// Horizontal concatenation [a b].
inline LftModel lft_hcat(const LftModel& a, const LftModel& b) {
    if (a.out_rows() != b.out_rows()) throw NumericError("lft_hcat: row mismatch");
    LftModel r;
    r.m22_ = hstack({a.m22_, b.m22_});
    r.structure_ = LftModel::concat(a.structure_, b.structure_);
    const int pa = a.delta_dim(), pb = b.delta_dim();
    if (pa == 0 && pb == 0) return r;
    r.m11_ = block_diag(a.m11_, b.m11_);
    if (pa == 0) {
        r.m12_ = hstack({Matrix(pb, a.in_cols()), b.m12_});
        r.m21_ = b.m21_;
    } else if (pb == 0) {
        r.m12_ = hstack({a.m12_, Matrix(pa, b.in_cols())});
        r.m21_ = a.m21_;
    } else {
        Matrix m12(pa + pb, a.in_cols() + b.in_cols());
        m12.set_block(0, 0, a.m12_);
        m12.set_block(pa, a.in_cols(), b.m12_);
        r.m12_ = m12;
        r.m21_ = hstack({a.m21_, b.m21_});
    }
    return r;
}

/// Vertical concatenation [a; b].
inline LftModel lft_vcat(const LftModel& a, const LftModel& b) {
    if (a.in_cols() != b.in_cols()) throw NumericError("lft_vcat: col mismatch");
    LftModel r;
    r.m22_ = vstack({a.m22_, b.m22_});
    r.structure_ = LftModel::concat(a.structure_, b.structure_);
    const int pa = a.delta_dim(), pb = b.delta_dim();
    if (pa == 0 && pb == 0) return r;
    r.m11_ = block_diag(a.m11_, b.m11_);
    if (pa == 0) {
        r.m12_ = b.m12_;
        r.m21_ = vstack({Matrix(a.out_rows(), pb), b.m21_});
    } else if (pb == 0) {
        r.m12_ = a.m12_;
        r.m21_ = vstack({a.m21_, Matrix(b.out_rows(), pa)});
    } else {
        r.m12_ = vstack({a.m12_, b.m12_});
        Matrix m21(a.out_rows() + b.out_rows(), pa + pb);
        m21.set_block(0, 0, a.m21_);
        m21.set_block(a.out_rows(), pa, b.m21_);
        r.m21_ = m21;
    }
    return r;
}

/// Assemble a matrix-valued LFT from a grid of scalar entries.
inline LftModel lft_assemble(const std::vector<std::vector<LftModel>>& grid) {
    if (grid.empty()) throw NumericError("lft_assemble: empty grid");
    std::vector<LftModel> rows;
    for (const auto& row : grid) {
        if (row.empty()) throw NumericError("lft_assemble: empty row");
        LftModel r = row[0];
        for (size_t j = 1; j < row.size(); ++j) r = lft_hcat(r, row[j]);
        rows.push_back(std::move(r));
    }
    LftModel out = rows[0];
    for (size_t i = 1; i < rows.size(); ++i) out = lft_vcat(out, rows[i]);
    return out;
}

struct WellPosedness {
    bool well_posed = true;
    double min_singular_value = std::numeric_limits<double>::infinity();
    DeltaAssignment worst;
    int samples_checked = 0;
};

/// Checks I - M11 Delta nonsingular at every vertex of the unit box plus a
/// seeded random interior sample, recording the smallest singular value
/// seen.
inline WellPosedness well_posed(const LftModel& m, int random_samples = 100,
                                std::uint64_t seed = 0x5eedULL) {
    WellPosedness out;
    if (m.delta_dim() == 0) return out;

    std::vector<std::string> labels;
    for (const auto& b : m.counts()) labels.push_back(b.label);
    const size_t nlab = labels.size();
    if (nlab > 24) throw NumericError("well_posed: too many labels for vertex enumeration");

    const double tol = 1e-12 * (1.0 + max_abs(m.m11()));
    auto check = [&](const DeltaAssignment& d) {
        const auto diag = m.delta_diagonal(d);
        const int p = m.delta_dim();
        Matrix i_m11d = Matrix::identity(p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) i_m11d(i, j) -= m.m11()(i, j) * diag[j];
        const double sv = min_singular_value(i_m11d);
        ++out.samples_checked;
        if (sv < out.min_singular_value) {
            out.min_singular_value = sv;
            out.worst = d;
        }
        if (sv <= tol) out.well_posed = false;
    };

    for (size_t mask = 0; mask < (size_t{1} << nlab); ++mask) {
        DeltaAssignment d;
        for (size_t k = 0; k < nlab; ++k) d[labels[k]] = (mask >> k) & 1 ? 1.0 : -1.0;
        check(d);
    }
    Rng rng(seed);
    for (int s = 0; s < random_samples; ++s) {
        DeltaAssignment d;
        for (const auto& lab : labels) d[lab] = rng.uniform(-1.0, 1.0);
        check(d);
    }
    return out;
}

} // namespace cislunav
