#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace rislink {

/// Second-order statistics of the four differential-product terms under the
/// IID Rayleigh model. m_sI2 equals m_I3 by symmetry.
struct MomentSet {
    double m_sI1;  // E{ s^H I1 }
    double m_I1;   // E|I1|^2
    double m_I2;   // E|I2|^2
    double m_I3;   // E|I3|^2
    double m_I4;   // E|I4|^2
};

inline MomentSet moments_closed_form(int b, int m, double sigma_h2, double sigma_g2, double sigma_v2,
                                     double p_x) {
    if (b < 1 || m < 1 || !(sigma_h2 > 0.0) || !(sigma_g2 > 0.0) || sigma_v2 < 0.0 || !(p_x > 0.0))
        throw std::invalid_argument("moments_closed_form: invalid parameters");
    MomentSet ms;
    ms.m_sI1 = p_x * p_x * b * sigma_h2 * m * sigma_g2;
    ms.m_I1 = p_x * p_x * (1.0 + b) * b * sigma_h2 * sigma_h2 * (1.0 + m) * m * sigma_g2 * sigma_g2;
    ms.m_I2 = sigma_v2 * p_x * b * sigma_h2 * m * sigma_g2;
    ms.m_I3 = ms.m_I2;
    ms.m_I4 = b * sigma_v2 * sigma_v2;
    return ms;
}

/// Closed-form SINR of the non-coherent scheme:
/// rho = M*B / (B + M + 1 + 2*sv2/(sh2*sg2*Px) + sv4/(sh4*sg4*Px^2*M)).
inline double sinr_ncds(int b, int m, double sigma_h2, double sigma_g2, double sigma_v2, double p_x) {
    if (b < 1 || m < 1 || !(sigma_h2 > 0.0) || !(sigma_g2 > 0.0) || sigma_v2 < 0.0 || !(p_x > 0.0))
        throw std::invalid_argument("sinr_ncds: invalid parameters");
    const double a = sigma_h2 * sigma_g2 * p_x;  // reference amplitude of the decision variable
    const double den = b + m + 1.0 + 2.0 * sigma_v2 / a + sigma_v2 * sigma_v2 / (a * a * m);
    return static_cast<double>(m) * b / den;
}

/// The same SINR reassembled from the moment set, the route the Monte Carlo
/// estimator follows: rho = a^2 / (a^2 + E|z|^2-terms - cross term).
inline double sinr_from_moments(int b, int m, double sigma_h2, double sigma_g2, double p_x,
                                const MomentSet& ms) {
    const double mb = static_cast<double>(m) * b;
    const double a2 = sigma_h2 * sigma_h2 * sigma_g2 * sigma_g2 * p_x * p_x;
    const double quad = (ms.m_I1 + ms.m_I2 + ms.m_I3 + ms.m_I4) / (mb * mb);
    const double cross = 2.0 / mb * sigma_h2 * sigma_g2 * ms.m_sI1;
    return a2 / (a2 + quad - cross);
}

/// Coherence time in OFDM symbols: calibration * (df/fd) * 0.423*K/(K+Lcp).
/// calibration = 1.0 evaluates the definition verbatim; 0.5 reproduces the
/// published efficiency table. fd = 0 reports an unbounded (static) channel.
inline double coherence_symbols(double doppler_hz, double subcarrier_spacing, int subcarriers,
                                int cp_length, double calibration = 1.0) {
    if (doppler_hz < 0.0) throw std::invalid_argument("coherence_symbols: doppler_hz must be >= 0");
    if (doppler_hz == 0.0) return std::numeric_limits<double>::infinity();
    return calibration * (subcarrier_spacing / doppler_hz) * 0.423 * subcarriers /
           (static_cast<double>(subcarriers) + cp_length);
}

/// Training efficiency eta = max(0, 1 - M/round(Nc)); zero when the sounding
/// does not fit in a coherence block. An unbounded Nc yields eta = 1.
inline double efficiency_factor(int m_elements, double coherence_syms) {
    if (m_elements < 1) throw std::invalid_argument("efficiency_factor: M must be >= 1");
    if (std::isinf(coherence_syms)) return 1.0;
    const double n_c = std::round(coherence_syms);
    if (static_cast<double>(m_elements) >= n_c) return 0.0;
    return 1.0 - static_cast<double>(m_elements) / n_c;
}

/// Operation counts for the two schemes: the coherent optimizer order,
/// coherent combining products, and non-coherent decoding products.
struct ComplexityCounts {
    std::uint64_t cds_opt_order;   // R_t * (B^3 + M) * K
    std::uint64_t cds_products;    // B * K
    std::uint64_t ncds_products;   // (B + 1) * (K - 1)
};

inline ComplexityCounts complexity_counts(std::uint64_t b, std::uint64_t m, std::uint64_t k,
                                          std::uint64_t r_t) {
    if (b < 1 || m < 1 || k < 1 || r_t < 1)
        throw std::invalid_argument("complexity_counts: all arguments must be >= 1");
    ComplexityCounts c;
    c.cds_opt_order = r_t * (b * b * b + m) * k;
    c.cds_products = b * k;
    c.ncds_products = (b + 1) * (k - 1);
    return c;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace rislink
