#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rislink/channel.hpp"

namespace rislink {

inline bool valid_psk_order(int order) {
    return order == 2 || order == 4 || order == 8 || order == 16;
}

/// K x N grid of complex symbols with its PSK order. Data grids s and
/// unscaled differential grids x carry unit-modulus entries.
struct SymbolGrid {
    MatrixC values;
    int constellation_order = 4;
};

/// K x (N-1) grid of differential decision variables; column index n holds
/// the decision for the symbol pair (n, n+1) of the frame.
struct DecisionGrid {
    MatrixC values;
};

/// Constellation point exp(j*(2*pi*index/order + pi/order)); the pi/order
/// rotation keeps decision boundaries on the axes for every even order.
inline cplx psk_point(int index, int order) {
    if (!valid_psk_order(order)) throw std::invalid_argument("psk: order must be one of 2,4,8,16");
    if (index < 0 || index >= order) throw std::out_of_range("psk: index out of range");
    const double step = 2.0 * std::numbers::pi / order;
    return std::polar(1.0, step * index + std::numbers::pi / order);
}

inline SymbolGrid psk_map(const Eigen::MatrixXi& indices, int order) {
    SymbolGrid s;
    s.constellation_order = order;
    s.values = MatrixC(indices.rows(), indices.cols());
    for (Eigen::Index c = 0; c < indices.cols(); ++c)
        for (Eigen::Index r = 0; r < indices.rows(); ++r)
            s.values(r, c) = psk_point(indices(r, c), order);
    return s;
}

/// Time-domain differential encoding, then scaling by sqrt(P_x):
/// x_{k,1} = s_{k,1}, x_{k,n} = x_{k,n-1} * s_{k,n}.
inline SymbolGrid diff_encode(const SymbolGrid& s, double tx_power) {
    if (!(tx_power > 0.0)) throw std::invalid_argument("diff_encode: tx_power must be > 0");
    const double amp = std::sqrt(tx_power);
    SymbolGrid x;
    x.constellation_order = s.constellation_order;
    x.values = MatrixC(s.values.rows(), s.values.cols());
    for (Eigen::Index k = 0; k < s.values.rows(); ++k) {
        cplx acc = s.values(k, 0);
        x.values(k, 0) = amp * acc;
        for (Eigen::Index n = 1; n < s.values.cols(); ++n) {
            acc *= s.values(k, n);
            x.values(k, n) = amp * acc;
        }
    }
    return x;
}

/// z = <y_prev, y_curr> / (M*B), conjugate-linear in the first argument.
inline cplx diff_decode(const VectorC& y_prev, const VectorC& y_curr, int m_elements, int b_antennas) {
    if (y_prev.size() != y_curr.size())
        throw std::invalid_argument("diff_decode: received vectors must have equal dimension");
    return y_prev.dot(y_curr) / static_cast<double>(m_elements) / static_cast<double>(b_antennas);
}

/// The four terms of the differential product: useful symbol, the two
/// channel/noise cross terms, and the noise-only term. Their sum divided by
/// M*B reconstructs diff_decode of y = q*x + v exactly.
struct DiffTerms {
    cplx i1, i2, i3, i4;

    cplx sum() const { return i1 + i2 + i3 + i4; }
};

inline DiffTerms decompose_terms(const VectorC& q_prev, const VectorC& q_curr, cplx x_prev, cplx x_curr,
                                 const VectorC& v_prev, const VectorC& v_curr) {
    if (q_prev.size() != q_curr.size() || q_prev.size() != v_prev.size() || v_prev.size() != v_curr.size())
        throw std::invalid_argument("decompose_terms: dimension mismatch");
    DiffTerms t;
    t.i1 = std::conj(x_prev) * x_curr * q_prev.dot(q_curr);
    t.i2 = std::conj(x_prev) * q_prev.dot(v_curr);
    t.i3 = x_curr * v_prev.dot(q_curr);
    t.i4 = v_prev.dot(v_curr);
    return t;
}

/// Phase-nearest PSK decision, invariant to positive scaling of z. Ties fall
/// to the smaller index; z = 0 maps to index 0 (callers flag that case).
inline int decide(cplx z, int order) {
    if (!valid_psk_order(order)) throw std::invalid_argument("decide: order must be one of 2,4,8,16");
    if (z == cplx(0.0, 0.0)) return 0;
    const double angle = std::arg(z);
    const double step = 2.0 * std::numbers::pi / order;
    const double offset = std::numbers::pi / order;
    int best = 0;
    double best_dist = std::abs(std::remainder(angle - offset, 2.0 * std::numbers::pi));
    for (int i = 1; i < order; ++i) {
        const double d = std::abs(std::remainder(angle - (offset + step * i), 2.0 * std::numbers::pi));
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    return best;
}

inline Eigen::MatrixXi psk_demap(const SymbolGrid& grid) {
    Eigen::MatrixXi idx(grid.values.rows(), grid.values.cols());
    for (Eigen::Index c = 0; c < grid.values.cols(); ++c)
        for (Eigen::Index r = 0; r < grid.values.rows(); ++r)
            idx(r, c) = decide(grid.values(r, c), grid.constellation_order);
    return idx;
}

}  // namespace rislink
