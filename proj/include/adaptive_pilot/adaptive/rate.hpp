#pragma once

#include "adaptive_pilot/numerics/matrix.hpp"

namespace adaptive_pilot::adaptive {

/// Learning rate: a positive scalar or a positive diagonal matrix (stored as
/// its diagonal). A diagonal rate left-multiplies the update.
struct LearningRate {
    Vector diag = Vector::Ones(1);

    LearningRate() = default;
    LearningRate(double scalar) : diag(Vector::Constant(1, scalar)) {}  // NOLINT(implicit)
    explicit LearningRate(Vector d) : diag(std::move(d)) {}

    bool is_scalar() const noexcept { return diag.size() == 1; }

    void validate(Index rows, const char* what) const {
        if (diag.size() == 0 || (!is_scalar() && diag.size() != rows)) {
            throw ValidationError(std::string(what) + ": rate must be scalar or length " +
                                  std::to_string(rows));
        }
        if (!(diag.array() > 0.0).all() || !diag.allFinite()) {
            throw ValidationError(std::string(what) + ": rates must be positive and finite");
        }
    }

    Matrix apply(const Matrix& update) const {
        if (is_scalar()) return diag(0) * update;
        if (diag.size() != update.rows()) throw DimensionMismatch("LearningRate: diagonal size");
        return diag.asDiagonal() * update;
    }

    LearningRate scaled(double s) const { return LearningRate(Vector(diag * s)); }

    friend bool operator==(const LearningRate& a, const LearningRate& b) {
        return a.diag.size() == b.diag.size() && a.diag == b.diag;
    }
};

}  // namespace adaptive_pilot::adaptive
