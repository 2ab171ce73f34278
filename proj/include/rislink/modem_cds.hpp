#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rislink/analysis.hpp"
#include "rislink/channel.hpp"
#include "rislink/modem_ncds.hpp"
#include "rislink/scenario.hpp"
#include "rislink/surface.hpp"

namespace rislink {

/// Least-squares estimate of the per-element cascaded channel
/// c_{k,b,m} = H_k[b,m] * g_k[m], one B x M matrix per subcarrier.
struct CascadedEstimate {
    std::vector<MatrixC> per_element;
    double noise_var_est = 0.0;  // per-entry estimation noise, sigma_v^2/(M*P_pilot)
};

namespace detail {

inline void require_orthogonal_training(const PhaseSchedule& training) {
    const int m = training.elements();
    if (training.symbols() != m)
        throw std::invalid_argument("sound_cascaded: training schedule must have M rows");
    // Probe check: ||Phi^H (Phi v) - M v|| must vanish for a fixed probe v.
    VectorC v(m);
    for (int i = 0; i < m; ++i) v[i] = cplx(std::cos(0.7 * i + 0.3), std::sin(1.3 * i - 0.4));
    VectorC w = training.coefficients.adjoint() * (training.coefficients * v) - static_cast<double>(m) * v;
    if (w.norm() > 1e-8 * std::sqrt(static_cast<double>(m)) * v.norm())
        throw std::invalid_argument("sound_cascaded: training schedule is not orthogonal");
}

}  // namespace detail

/// LS sounding over the M orthogonal training symbols: for each (k, b),
/// c = Phi^H y / (M * pilot). rx_training[k] is B x M with column t the
/// symbol received during training configuration t.
inline CascadedEstimate sound_cascaded(const std::vector<MatrixC>& rx_training,
                                       const PhaseSchedule& training, cplx pilot,
                                       double noise_power = 0.0) {
    if (std::abs(pilot) == 0.0) throw std::invalid_argument("sound_cascaded: pilot must be non-zero");
    detail::require_orthogonal_training(training);
    const int m = training.elements();
    CascadedEstimate est;
    est.noise_var_est = noise_power / (m * std::norm(pilot));
    est.per_element.reserve(rx_training.size());
    const MatrixC deconv = training.coefficients.adjoint() / (static_cast<double>(m) * pilot);
    for (const auto& y : rx_training) {
        if (y.cols() != m)
            throw std::invalid_argument("sound_cascaded: rx tensor has wrong training dimension");
        // y (B x M) times deconv^T so rows stay antenna-indexed.
        est.per_element.push_back(y * deconv.transpose());
    }
    return est;
}

/// Maximum-ratio combining: <q_hat, y> / ||q_hat||^2. Recovers x exactly
/// when y = q_hat * x.
inline cplx mrc_detect(const VectorC& q_hat, const VectorC& y) {
    if (q_hat.size() != y.size()) throw std::invalid_argument("mrc_detect: dimension mismatch");
    const double denom = q_hat.squaredNorm();
    if (!(denom > 0.0)) throw std::invalid_argument("mrc_detect: zero combiner vector");
    return q_hat.dot(y) / denom;
}

/// Outcome of one coherent coherence block: decisions, ground truth, and the
/// training/data resource split.
struct CdsBlockResult {
    bool feasible = false;
    double coherence_symbols_exact = 0.0;  // before rounding; inf for a static channel
    int coherence_block = 0;               // round(Nc)
    int training_symbols = 0;
    int data_symbols = 0;
    double pilot_fraction = 0.0;           // M / Nc
    double efficiency = 0.0;               // eta_c
    Eigen::MatrixXi sent;                  // K x data_symbols
    Eigen::MatrixXi decided;               // K x data_symbols
};

/// One coherence block of the coherent baseline: sound the cascaded channel
/// with the DFT schedule, optimize the reflection phases on the estimate,
/// then carry data with MRC on the remaining N_c - M symbols. The channel is
/// held fixed within the block (column 0 of rs_ue). Infeasible when the
/// block cannot even contain the sounding (M >= round(N_c)).
inline CdsBlockResult cds_frame_pipeline(const ScenarioConfig& cfg, const ChannelRealization& chan,
                                         Rng& rng) {
    const int b = cfg.geom_bs.total();
    const int m = cfg.geom_rs.total();
    const int k_sub = static_cast<int>(chan.bs_rs.size());
    if (k_sub == 0 || chan.rs_ue.size() != chan.bs_rs.size())
        throw std::invalid_argument("cds_frame_pipeline: channel realization incomplete");

    CdsBlockResult res;
    res.coherence_symbols_exact =
        coherence_symbols(cfg.mob.doppler_hz, cfg.ofdm.subcarrier_spacing, cfg.ofdm.subcarriers,
                          cfg.ofdm.cp_length, cfg.calibration);
    const bool unbounded = std::isinf(res.coherence_symbols_exact);
    res.coherence_block = unbounded ? 0 : static_cast<int>(std::llround(res.coherence_symbols_exact));
    res.training_symbols = m;

    if (!unbounded && m >= res.coherence_block) {
        res.feasible = false;  // sounding alone exhausts the coherence block
        res.efficiency = 0.0;
        res.pilot_fraction = res.coherence_block > 0
                                 ? static_cast<double>(m) / res.coherence_block
                                 : 1.0;
        return res;
    }
    res.feasible = true;
    if (unbounded) {
        // Static channel: no coherence limit; carry one frame of data.
        res.data_symbols = cfg.ofdm.frame_symbols;
        res.pilot_fraction = 0.0;
        res.efficiency = 1.0;
    } else {
        res.data_symbols = res.coherence_block - m;
        res.pilot_fraction = static_cast<double>(m) / res.coherence_block;
        res.efficiency = efficiency_factor(m, res.coherence_symbols_exact);
    }

    const double amp = std::sqrt(cfg.budget.tx_power);
    const cplx pilot = amp;  // known reference, power P_x
    const PhaseSchedule training = training_schedule(m);

    // True per-element cascaded channel at the block's channel state.
    std::vector<MatrixC> cascaded_true(k_sub);
    for (int k = 0; k < k_sub; ++k)
        cascaded_true[k] = chan.bs_rs[k] * chan.rs_ue[k].col(0).asDiagonal();

    // (1) Sounding: M training symbols through the DFT schedule.
    std::vector<MatrixC> rx(k_sub);
    for (int k = 0; k < k_sub; ++k) {
        MatrixC y(b, m);
        for (int t = 0; t < m; ++t) {
            VectorC q = cascaded_true[k] * training.coefficients.row(t).transpose();
            for (int i = 0; i < b; ++i) y(i, t) = q[i] * pilot + rng.cgauss(cfg.budget.noise_power);
        }
        rx[k] = std::move(y);
    }
    CascadedEstimate est = sound_cascaded(rx, training, pilot, cfg.budget.noise_power);

    // (2) Reflection configuration from the estimate.
    PhaseOptimum opt = optimize_phases(est.per_element, cfg.optimizer_sweeps);

    // (3) Data with MRC combining against the estimated cascade.
    res.sent = Eigen::MatrixXi(k_sub, res.data_symbols);
    res.decided = Eigen::MatrixXi(k_sub, res.data_symbols);
    VectorC q_hat(b), q_true(b);
    for (int k = 0; k < k_sub; ++k) {
        q_hat = est.per_element[k] * opt.phases;
        q_true = cascaded_true[k] * opt.phases;
        for (int n = 0; n < res.data_symbols; ++n) {
            const int idx = rng.uniform_int(cfg.order);
            const cplx x = amp * psk_point(idx, cfg.order);
            VectorC y(b);
            for (int i = 0; i < b; ++i) y[i] = q_true[i] * x + rng.cgauss(cfg.budget.noise_power);
            res.sent(k, n) = idx;
            res.decided(k, n) = decide(mrc_detect(q_hat, y), cfg.order);
        }
    }
    return res;
}

}  // namespace rislink
