#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rislink/rng.hpp"

namespace rislink {

using cplx = std::complex<double>;
using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;

inline constexpr double kSpeedOfLight = 3.0e8;  // m/s, propagation constant used throughout

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Uniform rectangular array: count_h x count_v elements with spacings in
/// wavelengths. Elements are indexed p + q*count_h with p on the horizontal
/// axis and q on the vertical axis, both 0-based.
struct ArrayGeometry {
    int count_h = 1;
    int count_v = 1;
    double spacing_h = 0.5;
    double spacing_v = 0.5;

    ArrayGeometry() = default;
    ArrayGeometry(int h, int v, double sh = 0.5, double sv = 0.5)
        : count_h(h), count_v(v), spacing_h(sh), spacing_v(sv) {
        validate();
    }

    int total() const { return count_h * count_v; }

    void validate() const {
        if (count_h < 1 || count_v < 1)
            throw std::invalid_argument("ArrayGeometry: element counts must be >= 1");
        if (!(spacing_h > 0.0) || !(spacing_v > 0.0))
            throw std::invalid_argument("ArrayGeometry: spacings must be > 0");
    }
};

/// Link powers, all linear. gain_bs_rs and gain_rs_ue are the average
/// per-entry channel gains of the two hops; noise_power and tx_power in W.
struct LinkBudget {
    double gain_bs_rs = 1.0;
    double gain_rs_ue = 1.0;
    double noise_power = 1.0;
    double tx_power = 1.0;

    LinkBudget() = default;
    LinkBudget(double g_hr, double g_ru, double n0, double px)
        : gain_bs_rs(g_hr), gain_rs_ue(g_ru), noise_power(n0), tx_power(px) {
        validate();
    }

    void validate() const {
        if (!(gain_bs_rs > 0.0) || !(gain_rs_ue > 0.0) || !(noise_power > 0.0) || !(tx_power > 0.0))
            throw std::invalid_argument("LinkBudget: all fields must be strictly positive");
    }
};

struct OfdmNumerology {
    int subcarriers = 1024;            // K
    int cp_length = 72;                // samples
    double subcarrier_spacing = 30e3;  // Hz
    int frame_symbols = 140;           // N

    OfdmNumerology() = default;
    OfdmNumerology(int k, int lcp, double df, int n)
        : subcarriers(k), cp_length(lcp), subcarrier_spacing(df), frame_symbols(n) {
        validate();
    }

    void validate() const {
        if (subcarriers < 1) throw std::invalid_argument("OfdmNumerology: subcarriers must be >= 1");
        if (cp_length < 0 || cp_length >= subcarriers)
            throw std::invalid_argument("OfdmNumerology: cp_length must be in [0, subcarriers)");
        if (!(subcarrier_spacing > 0.0))
            throw std::invalid_argument("OfdmNumerology: subcarrier_spacing must be > 0");
        if (frame_symbols < 2)
            throw std::invalid_argument("OfdmNumerology: frame_symbols must be >= 2 (differential decoding needs pairs)");
    }

    /// OFDM symbol duration including the cyclic prefix, seconds.
    double symbol_duration() const {
        return (1.0 + static_cast<double>(cp_length) / subcarriers) / subcarrier_spacing;
    }
};

struct MobilityModel {
    double doppler_hz = 0.0;
    double carrier_hz = 3.5e9;

    MobilityModel() = default;
    MobilityModel(double fd, double fc) : doppler_hz(fd), carrier_hz(fc) { validate(); }

    static MobilityModel from_speed_kmh(double speed_kmh, double carrier_hz) {
        return MobilityModel((speed_kmh / 3.6) * carrier_hz / kSpeedOfLight, carrier_hz);
    }

    double speed_kmh() const { return doppler_hz * kSpeedOfLight / carrier_hz * 3.6; }

    void validate() const {
        if (doppler_hz < 0.0) throw std::invalid_argument("MobilityModel: doppler_hz must be >= 0");
        if (!(carrier_hz > 0.0)) throw std::invalid_argument("MobilityModel: carrier_hz must be > 0");
    }
};

/// One frame's worth of channel: bs_rs[k] is the B x M first-hop matrix,
/// constant across the frame; rs_ue[k] is M x N with column n the second-hop
/// vector at OFDM symbol n.
struct ChannelRealization {
    std::vector<MatrixC> bs_rs;
    std::vector<MatrixC> rs_ue;
};

/// Clustered wideband profile for one hop. LOS angles are the references the
/// angular offsets scatter around; conventions: azimuth = atan2(y, x), zenith
/// measured from the +z axis, both in degrees.
struct ClusterProfile {
    int cluster_count = 20;
    double delay_spread_s = 1.5e-4;
    double asd_deg = 7.0;
    double asa_deg = 12.0;
    double zsd_deg = 25.0;
    double zsa_deg = 30.0;
    double los_azimuth_dep_deg = 0.0;
    double los_zenith_dep_deg = 90.0;
    double los_azimuth_arr_deg = 0.0;
    double los_zenith_arr_deg = 90.0;

    void validate() const {
        if (cluster_count < 1) throw std::invalid_argument("ClusterProfile: cluster_count must be >= 1");
        if (!(delay_spread_s > 0.0)) throw std::invalid_argument("ClusterProfile: delay_spread_s must be > 0");
        if (!(asd_deg > 0.0) || !(asa_deg > 0.0) || !(zsd_deg > 0.0) || !(zsa_deg > 0.0))
            throw std::invalid_argument("ClusterProfile: angular spreads must be > 0");
    }
};

// ---------------------------------------------------------------------------
// Temporal correlation
// ---------------------------------------------------------------------------

/// Clarke autocorrelation argument for a lag of delta_n OFDM symbols.
inline double doppler_arg(int delta_n, const MobilityModel& mob, const OfdmNumerology& ofdm) {
    const double lag_s = std::abs(delta_n) / ofdm.subcarrier_spacing *
                         (1.0 + static_cast<double>(ofdm.cp_length) / ofdm.subcarriers);
    return 2.0 * std::numbers::pi * mob.doppler_hz * lag_s;
}

/// Signed Clarke/Jakes autocorrelation J0(arg); the generator colors with
/// this (positive semidefinite), while the magnitude below is what the
/// published correlation states.
inline double doppler_autocorr_signed(int delta_n, const MobilityModel& mob, const OfdmNumerology& ofdm) {
    return std::cyl_bessel_j(0.0, doppler_arg(delta_n, mob, ofdm));
}

/// |J0(2*pi*fd*(dn/df)*(1+Lcp/K))|, even in delta_n, equal to 1 at lag 0.
inline double doppler_autocorr(int delta_n, const MobilityModel& mob, const OfdmNumerology& ofdm) {
    return std::abs(doppler_autocorr_signed(delta_n, mob, ofdm));
}

/// Symmetric PSD square root of the N x N Toeplitz matrix R with entries
/// J0(arg(|i-j|)). Negative eigenvalues (numerical noise; R is PSD by
/// Bochner's theorem) are clipped to zero. Throws when the clipped mass is
/// large enough to signal a broken numerology rather than rounding.
inline Eigen::MatrixXd temporal_coloring_sqrt(int n_symbols, const MobilityModel& mob,
                                              const OfdmNumerology& ofdm) {
    Eigen::VectorXd r(n_symbols);
    for (int d = 0; d < n_symbols; ++d) r[d] = doppler_autocorr_signed(d, mob, ofdm);

    Eigen::MatrixXd toep(n_symbols, n_symbols);
    for (int i = 0; i < n_symbols; ++i)
        for (int j = 0; j < n_symbols; ++j) toep(i, j) = r[std::abs(i - j)];

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(toep);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("temporal_coloring_sqrt: eigen-decomposition failed");

    Eigen::VectorXd lam = es.eigenvalues();
    double clipped = 0.0, positive = 0.0;
    for (int i = 0; i < n_symbols; ++i) {
        if (lam[i] < 0.0) {
            clipped -= lam[i];
            lam[i] = 0.0;
        } else {
            positive += lam[i];
        }
    }
    if (positive <= 0.0 || clipped > 1e-6 * positive)
        throw std::runtime_error("temporal_coloring_sqrt: correlation matrix not factorizable after clipping");

    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// ---------------------------------------------------------------------------
// IID Rayleigh generators
// ---------------------------------------------------------------------------

/// rows x cols matrix of IID CN(0, var) entries, drawn column-major.
inline MatrixC gen_iid_matrix(int rows, int cols, double var, Rng& rng) {
    MatrixC out(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) out(r, c) = rng.cgauss(var);
    return out;
}

/// M x N matrix whose rows are temporally colored CN(0, var) streams:
/// row m = coloring * w_m. An empty coloring matrix means a static channel
/// (one draw replicated across all N symbols).
inline MatrixC gen_colored_streams(int m_elements, int n_symbols, double var,
                                   const Eigen::MatrixXd& coloring, Rng& rng) {
    if (coloring.size() == 0) {
        MatrixC g(m_elements, n_symbols);
        for (int m = 0; m < m_elements; ++m) g.row(m).setConstant(rng.cgauss(var));
        return g;
    }
    MatrixC w = gen_iid_matrix(n_symbols, m_elements, var, rng);
    return (coloring * w).transpose();
}

/// First hop, IID Rayleigh: independent across subcarriers, constant across
/// the frame. Only bs_rs is filled.
inline ChannelRealization gen_bs_rs_iid(const ArrayGeometry& geom_bs, const ArrayGeometry& geom_rs,
                                        const LinkBudget& budget, const OfdmNumerology& ofdm, Rng& rng) {
    geom_bs.validate();
    geom_rs.validate();
    budget.validate();
    ChannelRealization out;
    out.bs_rs.reserve(ofdm.subcarriers);
    for (int k = 0; k < ofdm.subcarriers; ++k)
        out.bs_rs.push_back(gen_iid_matrix(geom_bs.total(), geom_rs.total(), budget.gain_bs_rs, rng));
    return out;
}

/// Second hop, IID across subcarriers and elements with Clarke correlation
/// across OFDM symbols. Only rs_ue is filled.
inline ChannelRealization gen_rs_ue_correlated(const ArrayGeometry& geom_rs, const LinkBudget& budget,
                                               const OfdmNumerology& ofdm, const MobilityModel& mob,
                                               Rng& rng) {
    geom_rs.validate();
    budget.validate();
    Eigen::MatrixXd coloring;  // empty => static
    if (mob.doppler_hz > 0.0) coloring = temporal_coloring_sqrt(ofdm.frame_symbols, mob, ofdm);
    ChannelRealization out;
    out.rs_ue.reserve(ofdm.subcarriers);
    for (int k = 0; k < ofdm.subcarriers; ++k)
        out.rs_ue.push_back(
            gen_colored_streams(geom_rs.total(), ofdm.frame_symbols, budget.gain_rs_ue, coloring, rng));
    return out;
}

// ---------------------------------------------------------------------------
// Cascade and array response
// ---------------------------------------------------------------------------

/// Effective cascaded response q_{k,n} = sum_m psi_{n,m} H_k[:,m] g_{k,n}[m].
/// `phases` is the N x M schedule matrix (row n = configuration at symbol n).
inline VectorC cascade_vec(const MatrixC& h, const VectorC& g, const Eigen::RowVectorXcd& psi) {
    if (h.cols() != g.size() || h.cols() != psi.size())
        throw std::invalid_argument("cascade: H columns, g length and psi length must agree");
    return h * psi.transpose().cwiseProduct(g);
}

/// Same cascade evaluated from a full realization and a phase schedule
/// (any type exposing an N x M `coefficients` matrix, row n = symbol n).
template <class Schedule>
VectorC cascade(const ChannelRealization& real, const Schedule& phases, int k, int n) {
    if (k < 0 || k >= static_cast<int>(real.bs_rs.size()) || k >= static_cast<int>(real.rs_ue.size()))
        throw std::out_of_range("cascade: subcarrier index out of range");
    if (n < 0 || n >= real.rs_ue[k].cols() || n >= phases.coefficients.rows())
        throw std::out_of_range("cascade: symbol index out of range");
    return cascade_vec(real.bs_rs[k], real.rs_ue[k].col(n), phases.coefficients.row(n));
}

/// URA steering vector. Entry for grid position (p, q) is
/// exp(j*2*pi*(spacing_h*p*sin(zen)*sin(az) + spacing_v*q*cos(zen))),
/// flattened as p + q*count_h; every entry has unit modulus.
inline VectorC ura_response(double azimuth_deg, double zenith_deg, const ArrayGeometry& geom) {
    geom.validate();
    const double az = deg2rad(azimuth_deg);
    const double zen = deg2rad(zenith_deg);
    const double kh = 2.0 * std::numbers::pi * geom.spacing_h * std::sin(zen) * std::sin(az);
    const double kv = 2.0 * std::numbers::pi * geom.spacing_v * std::cos(zen);
    VectorC out(geom.total());
    for (int q = 0; q < geom.count_v; ++q)
        for (int p = 0; p < geom.count_h; ++p)
            out[p + q * geom.count_h] = std::polar(1.0, kh * p + kv * q);
    return out;
}

// ---------------------------------------------------------------------------
// Geometric wideband cluster model
// ---------------------------------------------------------------------------

/// One sampled set of clusters for a hop. Powers are normalized to sum to 1
/// before large-scale scaling; gain_c = sqrt(power_c) * exp(j*phi_c).
struct ClusterSet {
    std::vector<double> delay_s;
    std::vector<double> power;
    std::vector<double> az_dep_rad, zen_dep_rad;
    std::vector<double> az_arr_rad, zen_arr_rad;
    std::vector<cplx> gain;
};

/// Exponential delays (mean DS), powers ~ exp(-tau/DS) normalized, wrapped
/// Gaussian azimuth offsets, Laplacian zenith offsets (scale = spread/sqrt(2)
/// so the standard deviation equals the configured spread).
inline ClusterSet draw_clusters(const ClusterProfile& prof, Rng& rng) {
    prof.validate();
    const int c = prof.cluster_count;
    ClusterSet set;
    set.delay_s.resize(c);
    set.power.resize(c);
    set.az_dep_rad.resize(c);
    set.zen_dep_rad.resize(c);
    set.az_arr_rad.resize(c);
    set.zen_arr_rad.resize(c);
    set.gain.resize(c);

    auto laplace = [&rng](double spread_rad) {
        const double b = spread_rad / std::numbers::sqrt2;
        const double u = rng.uniform() - 0.5;
        return -b * (u < 0.0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
    };

    double total = 0.0;
    for (int i = 0; i < c; ++i) {
        double u = rng.uniform();
        while (u >= 1.0) u = rng.uniform();
        set.delay_s[i] = -prof.delay_spread_s * std::log(1.0 - u);
        set.power[i] = std::exp(-set.delay_s[i] / prof.delay_spread_s);
        total += set.power[i];

        set.az_dep_rad[i] = deg2rad(prof.los_azimuth_dep_deg) + deg2rad(prof.asd_deg) * rng.gauss();
        set.az_arr_rad[i] = deg2rad(prof.los_azimuth_arr_deg) + deg2rad(prof.asa_deg) * rng.gauss();
        set.zen_dep_rad[i] = deg2rad(prof.los_zenith_dep_deg) + laplace(deg2rad(prof.zsd_deg));
        set.zen_arr_rad[i] = deg2rad(prof.los_zenith_arr_deg) + laplace(deg2rad(prof.zsa_deg));
    }
    for (int i = 0; i < c; ++i) {
        set.power[i] /= total;
        set.gain[i] = std::sqrt(set.power[i]) * rng.unit_phasor();
    }
    return set;
}

namespace detail {

inline VectorC ura_response_rad(double az_rad, double zen_rad, const ArrayGeometry& geom) {
    const double kh = 2.0 * std::numbers::pi * geom.spacing_h * std::sin(zen_rad) * std::sin(az_rad);
    const double kv = 2.0 * std::numbers::pi * geom.spacing_v * std::cos(zen_rad);
    VectorC out(geom.total());
    for (int q = 0; q < geom.count_v; ++q)
        for (int p = 0; p < geom.count_h; ++p)
            out[p + q * geom.count_h] = std::polar(1.0, kh * p + kv * q);
    return out;
}

}  // namespace detail

/// One drawn geometric channel, able to materialize any subcarrier on demand
/// so frame loops never hold the full K x B x M x N tensor.
class GeometricChannelDraw {
public:
    GeometricChannelDraw(const ArrayGeometry& geom_bs, const ArrayGeometry& geom_rs,
                         const LinkBudget& budget, const OfdmNumerology& ofdm, const MobilityModel& mob,
                         const ClusterProfile& prof_bs_rs, const ClusterProfile& prof_rs_ue, Rng& rng,
                         double ue_motion_azimuth_deg = 0.0)
        : ofdm_(ofdm),
          first_(draw_clusters(prof_bs_rs, rng)),
          second_(draw_clusters(prof_rs_ue, rng)) {
        geom_bs.validate();
        geom_rs.validate();
        budget.validate();

        const int c1 = static_cast<int>(first_.gain.size());
        outer_.reserve(c1);
        const double amp1 = std::sqrt(budget.gain_bs_rs);
        for (int i = 0; i < c1; ++i) {
            VectorC at_bs = detail::ura_response_rad(first_.az_arr_rad[i], first_.zen_arr_rad[i], geom_bs);
            VectorC at_rs = detail::ura_response_rad(first_.az_dep_rad[i], first_.zen_dep_rad[i], geom_rs);
            outer_.push_back((amp1 * first_.gain[i]) * (at_bs * at_rs.adjoint()));
        }

        const int c2 = static_cast<int>(second_.gain.size());
        steer_rs_ = MatrixC(geom_rs.total(), c2);
        const double amp2 = std::sqrt(budget.gain_rs_ue);
        for (int i = 0; i < c2; ++i)
            steer_rs_.col(i) =
                (amp2 * second_.gain[i]) *
                detail::ura_response_rad(second_.az_arr_rad[i], second_.zen_arr_rad[i], geom_rs);

        // Per-cluster Doppler rotation from the departure azimuth at the UE.
        const double t_sym = ofdm.symbol_duration();
        const double motion = deg2rad(ue_motion_azimuth_deg);
        time_rows_ = MatrixC(c2, ofdm.frame_symbols);
        for (int i = 0; i < c2; ++i) {
            const double w = 2.0 * std::numbers::pi * mob.doppler_hz *
                             std::cos(second_.az_dep_rad[i] - motion) * t_sym;
            for (int n = 0; n < ofdm.frame_symbols; ++n) time_rows_(i, n) = std::polar(1.0, w * n);
        }
    }

    /// B x M first-hop matrix at subcarrier k (quasi-static over the frame).
    MatrixC bs_rs_at(int k) const {
        MatrixC h = MatrixC::Zero(outer_[0].rows(), outer_[0].cols());
        for (std::size_t i = 0; i < outer_.size(); ++i)
            h += delay_phase(k, first_.delay_s[i]) * outer_[i];
        return h;
    }

    /// M x N second-hop matrix at subcarrier k; column n = symbol n.
    MatrixC rs_ue_at(int k) const {
        const int c2 = static_cast<int>(second_.gain.size());
        VectorC d(c2);
        for (int i = 0; i < c2; ++i) d[i] = delay_phase(k, second_.delay_s[i]);
        return (steer_rs_ * d.asDiagonal()) * time_rows_;
    }

    const ClusterSet& bs_rs_clusters() const { return first_; }
    const ClusterSet& rs_ue_clusters() const { return second_; }

private:
    cplx delay_phase(int k, double tau) const {
        return std::polar(1.0, -2.0 * std::numbers::pi * k * ofdm_.subcarrier_spacing * tau);
    }

    OfdmNumerology ofdm_;
    ClusterSet first_, second_;
    std::vector<MatrixC> outer_;  // per-cluster a_c * u_bs u_rs^H, large-scale included
    MatrixC steer_rs_;            // per-cluster scaled arrival steering at the RS
    MatrixC time_rows_;           // per-cluster Doppler rotation over the frame
};

/// Full geometric realization of both hops (materializes every subcarrier).
inline ChannelRealization gen_geometric_pair(const ArrayGeometry& geom_bs, const ArrayGeometry& geom_rs,
                                             const LinkBudget& budget, const OfdmNumerology& ofdm,
                                             const MobilityModel& mob, const ClusterProfile& prof_bs_rs,
                                             const ClusterProfile& prof_rs_ue, Rng& rng,
                                             double ue_motion_azimuth_deg = 0.0) {
    GeometricChannelDraw draw(geom_bs, geom_rs, budget, ofdm, mob, prof_bs_rs, prof_rs_ue, rng,
                              ue_motion_azimuth_deg);
    ChannelRealization out;
    out.bs_rs.reserve(ofdm.subcarriers);
    out.rs_ue.reserve(ofdm.subcarriers);
    for (int k = 0; k < ofdm.subcarriers; ++k) {
        out.bs_rs.push_back(draw.bs_rs_at(k));
        out.rs_ue.push_back(draw.rs_ue_at(k));
    }
    return out;
}

}  // namespace rislink
