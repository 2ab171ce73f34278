#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rislink/channel.hpp"
#include "rislink/rng.hpp"

namespace rislink {

/// Per-symbol reflecting-surface configuration: row n holds the M unit-modulus
/// element coefficients applied during OFDM symbol n.
struct PhaseSchedule {
    MatrixC coefficients;  // N x M

    int symbols() const { return static_cast<int>(coefficients.rows()); }
    int elements() const { return static_cast<int>(coefficients.cols()); }
};

/// Phases IID uniform on [0, 2*pi), independent across symbols and elements.
inline PhaseSchedule random_schedule(int m_elements, int n_symbols, Rng& rng) {
    if (m_elements < 1 || n_symbols < 1)
        throw std::invalid_argument("random_schedule: dimensions must be >= 1");
    PhaseSchedule s;
    s.coefficients = MatrixC(n_symbols, m_elements);
    for (int n = 0; n < n_symbols; ++n)
        for (int m = 0; m < m_elements; ++m) s.coefficients(n, m) = rng.unit_phasor();
    return s;
}

/// One random configuration held for the whole frame (non-reconfigurable
/// surface, or a reconfigurable one left alone between reconfigurations).
inline PhaseSchedule static_random_schedule(int m_elements, int n_symbols, Rng& rng) {
    if (m_elements < 1 || n_symbols < 1)
        throw std::invalid_argument("static_random_schedule: dimensions must be >= 1");
    PhaseSchedule s;
    s.coefficients = MatrixC(n_symbols, m_elements);
    Eigen::RowVectorXcd row(m_elements);
    for (int m = 0; m < m_elements; ++m) row[m] = rng.unit_phasor();
    for (int n = 0; n < n_symbols; ++n) s.coefficients.row(n) = row;
    return s;
}

/// M x M DFT sounding schedule: row n, column m = exp(-j*2*pi*n*m/M).
/// Rows are mutually orthogonal with Gram matrix M*I, the minimum-length
/// training that separates all M element responses.
inline PhaseSchedule training_schedule(int m_elements) {
    if (m_elements < 1) throw std::invalid_argument("training_schedule: m_elements must be >= 1");
    PhaseSchedule s;
    s.coefficients = MatrixC(m_elements, m_elements);
    const double w = -2.0 * std::numbers::pi / m_elements;
    for (int n = 0; n < m_elements; ++n)
        for (int m = 0; m < m_elements; ++m)
            s.coefficients(n, m) = std::polar(1.0, w * static_cast<double>(n) * m);
    return s;
}

/// Result of the per-element phase alignment: the configuration and the
/// objective value after each full sweep.
struct PhaseOptimum {
    VectorC phases;                          // M, unit modulus
    std::vector<double> objective_per_sweep;
};

namespace detail {

inline double combine_objective(const std::vector<MatrixC>& c, const VectorC& psi) {
    double f = 0.0;
    for (const auto& ck : c) f += (ck * psi).squaredNorm();
    return f;
}

}  // namespace detail

/// Cyclic coordinate ascent on F(psi) = sum_k ||sum_m psi_m c_k[:,m]||^2 over
/// unit-modulus psi. Each element update is the closed-form alignment
/// psi_m = exp(-j*arg(sum_k <r_km, c_k[:,m]>)) with r_km the combined vector
/// excluding element m, so the objective never decreases.
inline PhaseOptimum optimize_phases(const std::vector<MatrixC>& cascaded_per_element, int sweeps) {
    if (sweeps < 1) throw std::invalid_argument("optimize_phases: iterations must be >= 1");
    if (cascaded_per_element.empty())
        throw std::invalid_argument("optimize_phases: empty cascaded input");
    const int m_elements = static_cast<int>(cascaded_per_element[0].cols());

    double energy = 0.0;
    for (const auto& ck : cascaded_per_element) {
        if (ck.cols() != m_elements)
            throw std::invalid_argument("optimize_phases: inconsistent element count across subcarriers");
        energy += ck.squaredNorm();
    }
    if (!(energy > 0.0)) throw std::invalid_argument("optimize_phases: all-zero cascaded input");

    const int n_sub = static_cast<int>(cascaded_per_element.size());
    PhaseOptimum opt;
    opt.phases = VectorC::Ones(m_elements);

    // Running combined vector per subcarrier, updated incrementally.
    std::vector<VectorC> combined(n_sub);
    for (int k = 0; k < n_sub; ++k) combined[k] = cascaded_per_element[k] * opt.phases;

    opt.objective_per_sweep.reserve(sweeps);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (int m = 0; m < m_elements; ++m) {
            cplx t = 0.0;
            for (int k = 0; k < n_sub; ++k) {
                const auto col = cascaded_per_element[k].col(m);
                t += (combined[k] - opt.phases[m] * col).dot(col);
            }
            if (std::abs(t) == 0.0) continue;  // element irrelevant at this point
            const cplx updated = std::conj(t / std::abs(t));
            const cplx delta = updated - opt.phases[m];
            for (int k = 0; k < n_sub; ++k) combined[k] += delta * cascaded_per_element[k].col(m);
            opt.phases[m] = updated;
        }
        double f = 0.0;
        for (int k = 0; k < n_sub; ++k) f += combined[k].squaredNorm();
        opt.objective_per_sweep.push_back(f);
    }
    return opt;
}

/// The optimized configuration repeated over a data frame of n_symbols.
inline PhaseSchedule optimize_schedule_cds(const std::vector<MatrixC>& cascaded_per_element, int sweeps,
                                           int n_symbols) {
    PhaseOptimum opt = optimize_phases(cascaded_per_element, sweeps);
    PhaseSchedule s;
    s.coefficients = MatrixC(n_symbols, opt.phases.size());
    for (int n = 0; n < n_symbols; ++n) s.coefficients.row(n) = opt.phases.transpose();
    return s;
}

}  // namespace rislink
