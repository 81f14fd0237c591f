#pragma once

#include <string>

#include "adaptive_pilot/numerics/matrix.hpp"

namespace adaptive_pilot::adaptive {

/// Element-wise box for an adaptive parameter, with a boundary layer of
/// width `margin` inside each face where the update is scaled toward zero.
struct ProjectionBounds {
    Matrix lower;
    Matrix upper;
    Matrix margin;

    /// Uniform box with the default margin of 1% of the width.
    static ProjectionBounds uniform(Index rows, Index cols, double lo, double hi,
                                    double margin_fraction = 0.01) {
        ProjectionBounds b{Matrix::Constant(rows, cols, lo), Matrix::Constant(rows, cols, hi),
                           Matrix::Constant(rows, cols, margin_fraction * (hi - lo))};
        b.validate();
        return b;
    }

    void validate() const {
        numerics::require_shape(upper, lower.rows(), lower.cols(), "ProjectionBounds: upper");
        numerics::require_shape(margin, lower.rows(), lower.cols(), "ProjectionBounds: margin");
        for (Index i = 0; i < lower.size(); ++i) {
            const double lo = lower.data()[i], hi = upper.data()[i], w = margin.data()[i];
            if (!(lo < hi)) throw ValidationError("ProjectionBounds: lower must be < upper");
            if (!(w > 0.0) || w > 0.5 * (hi - lo)) {
                throw ValidationError("ProjectionBounds: margin must lie in (0, (upper-lower)/2]");
            }
        }
    }

    bool contains(const Matrix& theta) const {
        return theta.rows() == lower.rows() && theta.cols() == lower.cols() &&
               (theta.array() >= lower.array()).all() && (theta.array() <= upper.array()).all();
    }

    Matrix clamp(const Matrix& theta) const { return theta.cwiseMax(lower).cwiseMin(upper); }
};

/// Projected update direction. Inside the boundary layer, a component that
/// pushes outward is scaled by (distance to the face) / margin, so it is
/// exactly zero on the face; inward components pass unchanged.
inline Matrix proj(const Matrix& theta, const Matrix& y, const ProjectionBounds& bounds) {
    numerics::require_shape(theta, bounds.lower.rows(), bounds.lower.cols(), "proj: theta");
    numerics::require_shape(y, theta.rows(), theta.cols(), "proj: y");
    Matrix out = y;
    for (Index i = 0; i < theta.size(); ++i) {
        const double th = theta.data()[i];
        const double lo = bounds.lower.data()[i];
        const double hi = bounds.upper.data()[i];
        const double w = bounds.margin.data()[i];
        if (!(th >= lo && th <= hi)) {
            throw OutOfBounds("proj: parameter element " + std::to_string(i) + " = " +
                              std::to_string(th) + " outside [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
        }
        double& yi = out.data()[i];
        if (yi > 0.0 && hi - th < w) {
            yi *= (hi - th) / w;
        } else if (yi < 0.0 && th - lo < w) {
            yi *= (th - lo) / w;
        }
    }
    return out;
}

}  // namespace adaptive_pilot::adaptive
