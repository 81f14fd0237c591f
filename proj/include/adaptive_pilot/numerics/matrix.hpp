#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "adaptive_pilot/errors.hpp"

namespace adaptive_pilot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace numerics {

inline std::string shape_of(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw NonFiniteValue(std::string(what) + " has non-finite entries");
    }
}

inline void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch(std::string(what) + " must be square, got " + shape_of(m));
    }
}

inline void require_shape(const Matrix& m, Index rows, Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionMismatch(std::string(what) + " expected " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + shape_of(m));
    }
}

inline void require_size(const Vector& v, Index n, const char* what) {
    if (v.size() != n) {
        throw DimensionMismatch(std::string(what) + " expected length " + std::to_string(n) +
                                ", got " + std::to_string(v.size()));
    }
}

/// Builds a matrix from row-major nested initializer data and checks finiteness.
inline Matrix make_matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r == 0 ? 0 : static_cast<Index>(rows.begin()->size());
    Matrix m(r, c);
    Index i = 0;
    for (const auto& row : rows) {
        if (static_cast<Index>(row.size()) != c) {
            throw DimensionMismatch("ragged matrix literal");
        }
        Index j = 0;
        for (double x : row) m(i, j++) = x;
        ++i;
    }
    require_finite(m, "matrix literal");
    return m;
}

inline Matrix diag_matrix(const Vector& d) { return d.asDiagonal(); }

inline bool is_symmetric(const Matrix& m, double tol) {
    return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_positive_definite(const Matrix& m) {
    Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
    return llt.info() == Eigen::Success;
}

}  // namespace numerics
}  // namespace adaptive_pilot
