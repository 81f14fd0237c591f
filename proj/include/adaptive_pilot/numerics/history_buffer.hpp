#pragma once

#include <cmath>
#include <vector>

#include "adaptive_pilot/numerics/matrix.hpp"

namespace adaptive_pilot::numerics {

/// Uniformly sampled past of a vector signal, with linear interpolation
/// between samples. Sample k sits at time t0 + k * sample_period.
///
/// Times before t0 read as the initial value. Lookups more than `horizon`
/// behind the newest sample are rejected.
class HistoryBuffer {
public:
    HistoryBuffer(Index dim, double sample_period, double horizon, double t0 = 0.0)
        : HistoryBuffer(Vector::Zero(dim), sample_period, horizon, t0) {}

    HistoryBuffer(Vector initial, double sample_period, double horizon, double t0 = 0.0)
        : initial_(std::move(initial)), period_(sample_period), horizon_(horizon), t0_(t0) {
        if (!(sample_period > 0.0)) throw ValidationError("HistoryBuffer: sample period must be > 0");
        if (horizon < 0.0) throw ValidationError("HistoryBuffer: horizon must be >= 0");
        const auto cap = static_cast<Index>(std::ceil(horizon / sample_period - kSnap)) + 2;
        ring_.setZero(initial_.size(), cap);
    }

    Index dim() const noexcept { return initial_.size(); }
    double sample_period() const noexcept { return period_; }
    double horizon() const noexcept { return horizon_; }
    long long count() const noexcept { return count_; }
    bool empty() const noexcept { return count_ == 0; }

    /// Time stamp of the newest sample.
    double current_time() const { return t0_ + static_cast<double>(count_ - 1) * period_; }

    void push(const Vector& value) {
        require_size(value, dim(), "HistoryBuffer::push");
        ring_.col(slot(count_)) = value;
        ++count_;
    }

    /// Value `lag` seconds behind the newest sample.
    Vector at_lag(double lag) const {
        if (empty()) return initial_;
        return at_index(static_cast<double>(count_ - 1) - lag / period_);
    }

    /// Value at absolute time t (t must not lie after the newest sample).
    Vector at_time(double t) const {
        if (empty()) return initial_;
        return at_index((t - t0_) / period_);
    }

private:
    static constexpr double kSnap = 1e-9;

    Index slot(long long k) const { return static_cast<Index>(k % ring_.cols()); }

    Vector at_index(double u) const {
        const long long newest = count_ - 1;
        const double nearest = std::round(u);
        if (std::abs(u - nearest) < kSnap) u = nearest;
        if (u > static_cast<double>(newest)) {
            throw RangeNotLogged("HistoryBuffer: lookup after newest sample");
        }
        if (u < 0.0) return initial_;
        const auto k = static_cast<long long>(std::floor(u));
        if (static_cast<double>(newest - k) > horizon_ / period_ + 1.0 + kSnap ||
            newest - k >= ring_.cols()) {
            throw RangeNotLogged("HistoryBuffer: lookup beyond retained horizon");
        }
        const double frac = u - static_cast<double>(k);
        if (frac == 0.0) return ring_.col(slot(k));
        return (1.0 - frac) * ring_.col(slot(k)) + frac * ring_.col(slot(k + 1));
    }

    Vector initial_;
    double period_;
    double horizon_;
    double t0_;
    Matrix ring_;
    long long count_ = 0;
};

}  // namespace adaptive_pilot::numerics
