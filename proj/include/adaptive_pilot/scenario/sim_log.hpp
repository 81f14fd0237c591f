#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include "adaptive_pilot/numerics/matrix.hpp"

namespace adaptive_pilot::scenario {

/// Column-per-sample record of one run on the uniform step grid.
///
/// Each signal is a (dimension x samples) matrix. K_hat_x and Phi1_hat are
/// stored flattened column-major (Phi2_hat node after node); Lambda is the true effectiveness and is
/// for diagnostics only.
struct SimLog {
    double step = 0.0;
    double tau = 0.0;
    int intervals = 0;
    Vector y_o;  ///< crad/s
    Index n = 0;
    Index m = 0;
    Index count = 0;

    Vector t;
    Matrix x_p, x_r, x_m, e_delta, e_1, e_2, e_y;
    Matrix y_h, v, delta_y, G, u_p, y_1, y_2, r;
    Matrix lambda_hat, lambda2_hat, lambda3_hat;
    Vector phi1_fro;
    Matrix phi2_fro;
    Matrix K_hat_x, Phi1_hat, Phi2_hat, Lambda;

    void allocate(Index n_, Index m_, int nodes, Index samples) {
        n = n_;
        m = m_;
        intervals = nodes;
        count = 0;
        t.resize(samples);
        for (Matrix* s : {&x_p, &x_r, &x_m, &e_delta, &e_1, &e_2, &e_y}) s->resize(n, samples);
        for (Matrix* s : {&y_h, &v, &delta_y, &G, &u_p, &y_1, &y_2, &r, &lambda_hat, &lambda2_hat,
                          &lambda3_hat, &Lambda}) {
            s->resize(m, samples);
        }
        phi1_fro.resize(samples);
        phi2_fro.resize(nodes, samples);
        K_hat_x.resize(m * n, samples);
        Phi1_hat.resize(m * n, samples);
        Phi2_hat.resize(m * m * nodes, samples);
    }

    /// Drops unused preallocated columns (after an aborted run).
    void shrink_to_count() {
        t.conservativeResize(count);
        for (Matrix* s : {&x_p, &x_r, &x_m, &e_delta, &e_1, &e_2, &e_y, &y_h, &v, &delta_y, &G,
                          &u_p, &y_1, &y_2, &r, &lambda_hat, &lambda2_hat, &lambda3_hat, &phi2_fro,
                          &K_hat_x, &Phi1_hat, &Phi2_hat, &Lambda}) {
            s->conservativeResize(Eigen::NoChange, count);
        }
        phi1_fro.conservativeResize(count);
    }

    double end_time() const { return count ? t(count - 1) : 0.0; }

    /// Sample index nearest to time `time`.
    Index index_of(double time) const {
        const double u = (time - t(0)) / step;
        const auto k = static_cast<Index>(std::llround(u));
        return std::clamp<Index>(k, 0, count - 1);
    }

    double e_y_norm(Index k) const { return e_y.col(k).norm(); }
};

namespace detail {

inline void put_number(std::string& out, double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    out.append(buf, res.ptr);
}

inline void append_names(std::string& out, const std::string& stem, Index count, bool single_plain) {
    if (single_plain && count == 1) {
        out += "," + stem;
        return;
    }
    for (Index i = 1; i <= count; ++i) out += "," + stem + std::to_string(i);
}

}  // namespace detail

/// CSV header; multi-element signals are numbered from 1.
inline std::string csv_header(const SimLog& log) {
    std::string h = "t";
    detail::append_names(h, "x_p", log.n, false);
    detail::append_names(h, "x_r", log.n, false);
    detail::append_names(h, "x_m", log.n, false);
    h += ",e_y_norm";
    detail::append_names(h, "y_h", log.m, false);
    detail::append_names(h, "v", log.m, false);
    detail::append_names(h, "u_p", log.m, false);
    detail::append_names(h, "y_2", log.m, true);
    detail::append_names(h, "r", log.m, true);
    detail::append_names(h, "lambda_hat", log.m, false);
    detail::append_names(h, "lambda2_hat", log.m, false);
    detail::append_names(h, "lambda3_hat", log.m, false);
    h += ",phi1_fro";
    for (int k = 1; k <= log.intervals; ++k) h += ",phi2_fro_" + std::to_string(k);
    return h;
}

/// Writes every `stride`-th sample (always including the first). Numbers
/// use shortest round-trip formatting, so output is byte-deterministic.
inline void write_csv(std::ostream& os, const SimLog& log, int stride = 1) {
    os << csv_header(log) << '\n';
    std::string line;
    auto put_col = [&](const Matrix& m, Index k) {
        for (Index i = 0; i < m.rows(); ++i) {
            line += ',';
            detail::put_number(line, m(i, k));
        }
    };
    for (Index k = 0; k < log.count; k += stride) {
        line.clear();
        detail::put_number(line, log.t(k));
        put_col(log.x_p, k);
        put_col(log.x_r, k);
        put_col(log.x_m, k);
        line += ',';
        detail::put_number(line, log.e_y_norm(k));
        put_col(log.y_h, k);
        put_col(log.v, k);
        put_col(log.u_p, k);
        put_col(log.y_2, k);
        put_col(log.r, k);
        put_col(log.lambda_hat, k);
        put_col(log.lambda2_hat, k);
        put_col(log.lambda3_hat, k);
        line += ',';
        detail::put_number(line, log.phi1_fro(k));
        put_col(log.phi2_fro, k);
        line += '\n';
        os << line;
    }
}

/// Writes `contents` to `path` through a temporary file and a rename.
template <class Writer>
void write_file_atomic(const std::filesystem::path& path, Writer&& writer) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot open " + tmp.string() + " for writing");
        writer(os);
        os.flush();
        if (!os) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace adaptive_pilot::scenario
