#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rislink/analysis.hpp"
#include "rislink/channel.hpp"
#include "rislink/modem_cds.hpp"
#include "rislink/modem_ncds.hpp"
#include "rislink/scenario.hpp"
#include "rislink/surface.hpp"

namespace rislink {

/// One reported scalar with its 95% interval and full provenance.
struct MetricRecord {
    std::string metric_name;
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool infeasible = false;
    long long samples = 0;
    int b_total = 0;
    int m_total = 0;
    double px_dbw = 0.0;
    double speed_kmh = 0.0;
    std::string scheme;
    std::string channel_model;
    std::uint64_t seed = 0;
    std::string config_digest;
};

namespace detail {

struct TrialStats {
    double sq_err = 0.0;  // sum |z - a*s|^2 over decided pairs
    long long pairs = 0;
    long long errors = 0;
    long long decisions = 0;
    long long zero_decisions = 0;
};

inline int resolve_threads(int threads) {
    if (threads > 0) return threads;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs trials 0..max_trials-1 on a worker pool and returns the stats of the
/// shortest prefix satisfying the stop thresholds (all trials when early
/// stopping is off). Trials are merged strictly in index order, so the
/// outcome is byte-identical for any worker count.
template <class Fn>
std::vector<TrialStats> run_trials_ordered(int max_trials, int threads, bool early_stop,
                                           long long min_errors, long long min_decisions, Fn per_trial) {
    std::vector<TrialStats> results(max_trials);
    std::vector<char> done(max_trials, 0);
    std::atomic<int> next{0};
    std::atomic<int> stop_at{max_trials};
    std::mutex mu;
    int frontier = 0;
    long long acc_err = 0, acc_dec = 0;

    auto worker = [&]() {
        for (;;) {
            const int t = next.fetch_add(1);
            if (t >= stop_at.load()) return;
            TrialStats st = per_trial(t);
            std::lock_guard<std::mutex> lk(mu);
            results[t] = st;
            done[t] = 1;
            while (frontier < stop_at.load() && done[frontier]) {
                acc_err += results[frontier].errors;
                acc_dec += results[frontier].decisions;
                ++frontier;
                if (early_stop && acc_err >= min_errors && acc_dec >= min_decisions) {
                    int cur = stop_at.load();
                    while (cur > frontier && !stop_at.compare_exchange_weak(cur, frontier)) {
                    }
                    break;
                }
            }
        }
    };

    const int n_workers = std::min(resolve_threads(threads), max_trials);
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    results.resize(std::min(stop_at.load(), max_trials));
    return results;
}

/// One NCDS frame: draw the channel and phase schedule, transmit a random
/// differentially-encoded frame, decode all symbol pairs. Accumulates both
/// the squared deviation from the reference a*s (for SINR estimation) and
/// the symbol decisions (for SEP).
inline TrialStats ncds_frame(const ScenarioConfig& cfg, const Eigen::MatrixXd& coloring, Rng& rng) {
    const int b = cfg.geom_bs.total();
    const int m = cfg.geom_rs.total();
    const int k_sub = cfg.ofdm.subcarriers;
    const int n_sym = cfg.ofdm.frame_symbols;
    const double amp = std::sqrt(cfg.budget.tx_power);
    const double ref = cfg.budget.gain_bs_rs * cfg.budget.gain_rs_ue * cfg.budget.tx_power;
    const double mb = static_cast<double>(m) * b;
    const double noise = cfg.budget.noise_power;

    const PhaseSchedule sched = cfg.phase_mode == PhaseMode::per_frame
                                    ? static_random_schedule(m, n_sym, rng)
                                    : random_schedule(m, n_sym, rng);

    std::optional<GeometricChannelDraw> geo;
    if (cfg.channel_model == ChannelModel::geometric)
        geo.emplace(cfg.geom_bs, cfg.geom_rs, cfg.budget, cfg.ofdm, cfg.mob, profile_bs_rs(cfg.geometry),
                    profile_rs_ue(cfg.geometry), rng, cfg.geometry.ue_motion_azimuth_deg);

    // Static channel under one frame-long configuration: the cascade is a
    // single vector per subcarrier, so skip the per-symbol gemm.
    const bool static_cascade =
        cfg.mob.doppler_hz == 0.0 && cfg.phase_mode == PhaseMode::per_frame;

    TrialStats st;
    MatrixC h, g, q;
    VectorC y_prev(b), y_curr(b), q_static;
    std::vector<int> idx(n_sym);
    std::vector<cplx> x(n_sym);

    for (int k = 0; k < k_sub; ++k) {
        if (cfg.channel_model == ChannelModel::iid_rayleigh) {
            h = gen_iid_matrix(b, m, cfg.budget.gain_bs_rs, rng);
            g = gen_colored_streams(m, n_sym, cfg.budget.gain_rs_ue, coloring, rng);
        } else {
            h = geo->bs_rs_at(k);
            g = geo->rs_ue_at(k);
        }

        if (static_cascade) {
            q_static.noalias() = h * sched.coefficients.row(0).transpose().cwiseProduct(g.col(0));
        } else {
            q.noalias() = h * sched.coefficients.transpose().cwiseProduct(g);
        }

        idx[0] = 0;  // fixed reference symbol on every subcarrier
        cplx acc = psk_point(0, cfg.order);
        x[0] = amp * acc;
        for (int n = 1; n < n_sym; ++n) {
            idx[n] = rng.uniform_int(cfg.order);
            acc *= psk_point(idx[n], cfg.order);
            x[n] = amp * acc;
        }

        for (int n = 0; n < n_sym; ++n) {
            for (int i = 0; i < b; ++i) {
                const cplx qi = static_cascade ? q_static[i] : q(i, n);
                y_curr[i] = qi * x[n] + rng.cgauss(noise);
            }
            if (n > 0) {
                const cplx z = y_prev.dot(y_curr) / mb;
                const cplx s = psk_point(idx[n], cfg.order);
                st.sq_err += std::norm(z - ref * s);
                ++st.pairs;
                if (z == cplx(0.0, 0.0)) ++st.zero_decisions;
                if (decide(z, cfg.order) != idx[n]) ++st.errors;
                ++st.decisions;
            }
            std::swap(y_prev, y_curr);
        }
    }
    return st;
}

/// One CDS coherence block (channel static inside the block, redrawn across
/// trials). Assumes the caller already checked feasibility.
inline TrialStats cds_trial(const ScenarioConfig& cfg, Rng& rng) {
    const int b = cfg.geom_bs.total();
    const int m = cfg.geom_rs.total();
    const int k_sub = cfg.ofdm.subcarriers;

    ChannelRealization chan;
    chan.bs_rs.reserve(k_sub);
    chan.rs_ue.reserve(k_sub);
    if (cfg.channel_model == ChannelModel::iid_rayleigh) {
        for (int k = 0; k < k_sub; ++k) {
            chan.bs_rs.push_back(gen_iid_matrix(b, m, cfg.budget.gain_bs_rs, rng));
            chan.rs_ue.push_back(gen_iid_matrix(m, 1, cfg.budget.gain_rs_ue, rng));
        }
    } else {
        OfdmNumerology block_ofdm = cfg.ofdm;
        block_ofdm.frame_symbols = 2;  // static inside the block; only column 0 is used
        GeometricChannelDraw geo(cfg.geom_bs, cfg.geom_rs, cfg.budget, block_ofdm, cfg.mob,
                                 profile_bs_rs(cfg.geometry), profile_rs_ue(cfg.geometry), rng,
                                 cfg.geometry.ue_motion_azimuth_deg);
        for (int k = 0; k < k_sub; ++k) {
            chan.bs_rs.push_back(geo.bs_rs_at(k));
            chan.rs_ue.push_back(geo.rs_ue_at(k).col(0));
        }
    }

    const CdsBlockResult block = cds_frame_pipeline(cfg, chan, rng);
    TrialStats st;
    if (!block.feasible) return st;
    st.decisions = static_cast<long long>(block.decided.rows()) * block.decided.cols();
    st.errors = (block.decided.array() != block.sent.array()).count();
    return st;
}

inline double wilson_low(long long errors, long long n) {
    if (n <= 0) return 0.0;
    const double z = 1.959963984540054;
    const double p = static_cast<double>(errors) / n;
    const double denom = 1.0 + z * z / n;
    const double center = p + z * z / (2.0 * n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
    return std::max(0.0, (center - half) / denom);
}

inline double wilson_high(long long errors, long long n) {
    if (n <= 0) return 1.0;
    const double z = 1.959963984540054;
    const double p = static_cast<double>(errors) / n;
    const double denom = 1.0 + z * z / n;
    const double center = p + z * z / (2.0 * n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
    return std::min(1.0, (center + half) / denom);
}

inline void stamp_context(MetricRecord& rec, const ScenarioConfig& cfg) {
    rec.b_total = cfg.geom_bs.total();
    rec.m_total = cfg.geom_rs.total();
    rec.px_dbw = cfg.px_dbw();
    rec.speed_kmh = cfg.speed_kmh();
    rec.scheme = to_string(cfg.scheme);
    rec.channel_model = to_string(cfg.channel_model);
    rec.seed = cfg.master_seed;
    rec.config_digest = cfg.digest();
}

}  // namespace detail

/// Empirical non-coherent SINR: rho_hat = a^2 / mean|z - a*s|^2 with the
/// genie reference amplitude a = sigma_h^2*sigma_g^2*P_x, plus a bootstrap
/// 95% interval over per-trial means. For the IID model this estimator
/// converges to the closed-form sinr_ncds value.
inline MetricRecord run_sinr_ncds(const ScenarioConfig& cfg, int threads = 0) {
    cfg.validate();
    if (cfg.scheme != Scheme::ncds) throw std::invalid_argument("run_sinr_ncds: scheme must be ncds");
    if (cfg.ofdm.frame_symbols < 2) throw std::invalid_argument("run_sinr_ncds: need at least 2 symbols");

    Eigen::MatrixXd coloring;
    if (cfg.channel_model == ChannelModel::iid_rayleigh && cfg.mob.doppler_hz > 0.0)
        coloring = temporal_coloring_sqrt(cfg.ofdm.frame_symbols, cfg.mob, cfg.ofdm);

    auto per_trial = [&](int t) {
        Rng rng = Rng::stream(cfg.master_seed, "sinr-trial", static_cast<std::uint64_t>(t));
        return detail::ncds_frame(cfg, coloring, rng);
    };
    const auto stats = detail::run_trials_ordered(cfg.trials, threads, false, 0, 0, per_trial);

    double sq_sum = 0.0;
    long long pairs = 0;
    std::vector<double> trial_means;
    trial_means.reserve(stats.size());
    for (const auto& st : stats) {
        sq_sum += st.sq_err;
        pairs += st.pairs;
        trial_means.push_back(st.sq_err / static_cast<double>(st.pairs));
    }
    const double a = cfg.budget.gain_bs_rs * cfg.budget.gain_rs_ue * cfg.budget.tx_power;
    const double mse = sq_sum / static_cast<double>(pairs);

    // Percentile bootstrap on the per-trial means.
    Rng boot = Rng::stream(cfg.master_seed, "sinr-bootstrap");
    const int n_boot = 1000;
    std::vector<double> resampled(n_boot);
    const int n_tr = static_cast<int>(trial_means.size());
    for (int i = 0; i < n_boot; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n_tr; ++j) acc += trial_means[boot.uniform_int(n_tr)];
        resampled[i] = acc / n_tr;
    }
    std::sort(resampled.begin(), resampled.end());
    const double mse_lo = resampled[static_cast<int>(0.025 * (n_boot - 1))];
    const double mse_hi = resampled[static_cast<int>(0.975 * (n_boot - 1))];

    MetricRecord rec;
    rec.metric_name = "sinr_ncds";
    rec.value = a * a / mse;
    rec.ci_low = std::min(a * a / mse_hi, rec.value);
    rec.ci_high = std::max(a * a / mse_lo, rec.value);
    rec.samples = pairs;
    detail::stamp_context(rec, cfg);
    return rec;
}

/// Monte Carlo estimates of the five moment statistics over independent
/// single-pair draws (quasi-static across each differential pair).
inline std::vector<MetricRecord> run_moment_check(const ScenarioConfig& cfg) {
    cfg.validate();
    if (cfg.channel_model != ChannelModel::iid_rayleigh)
        throw std::invalid_argument("run_moment_check: IID channel model required");
    const int b = cfg.geom_bs.total();
    const int m = cfg.geom_rs.total();
    const double amp = std::sqrt(cfg.budget.tx_power);
    const long long draws = cfg.moment_draws;

    Rng rng = Rng::stream(cfg.master_seed, "moments");
    double sum[5] = {0, 0, 0, 0, 0}, sumsq[5] = {0, 0, 0, 0, 0};
    VectorC q(b), v_prev(b), v_curr(b), w(m);
    MatrixC h(b, m);
    for (long long it = 0; it < draws; ++it) {
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < b; ++i) h(i, j) = rng.cgauss(cfg.budget.gain_bs_rs);
        for (int j = 0; j < m; ++j) w[j] = rng.unit_phasor() * rng.cgauss(cfg.budget.gain_rs_ue);
        q.noalias() = h * w;
        const cplx s = psk_point(rng.uniform_int(cfg.order), cfg.order);
        const cplx x_prev = amp * rng.unit_phasor();
        const cplx x_curr = x_prev * s;
        for (int i = 0; i < b; ++i) v_prev[i] = rng.cgauss(cfg.budget.noise_power);
        for (int i = 0; i < b; ++i) v_curr[i] = rng.cgauss(cfg.budget.noise_power);
        const DiffTerms t = decompose_terms(q, q, x_prev, x_curr, v_prev, v_curr);
        const double obs[5] = {(std::conj(s) * t.i1).real(), std::norm(t.i1), std::norm(t.i2),
                               std::norm(t.i3), std::norm(t.i4)};
        for (int i = 0; i < 5; ++i) {
            sum[i] += obs[i];
            sumsq[i] += obs[i] * obs[i];
        }
    }

    static const char* names[5] = {"m_sI1", "m_I1", "m_I2", "m_I3", "m_I4"};
    std::vector<MetricRecord> out;
    out.reserve(5);
    for (int i = 0; i < 5; ++i) {
        const double mean = sum[i] / draws;
        const double var = std::max(0.0, sumsq[i] / draws - mean * mean);
        const double half = 1.959963984540054 * std::sqrt(var / draws);
        MetricRecord rec;
        rec.metric_name = names[i];
        rec.value = mean;
        rec.ci_low = mean - half;
        rec.ci_high = mean + half;
        rec.samples = draws;
        detail::stamp_context(rec, cfg);
        out.push_back(std::move(rec));
    }
    return out;
}

/// Symbol error probability with a Wilson 95% interval and deterministic
/// early stopping. CDS configurations whose sounding cannot fit in a
/// coherence block are reported infeasible rather than as a number; feasible
/// CDS runs additionally report the effective-power reading of the curve
/// (P_x / eta_c) as a second row.
inline std::vector<MetricRecord> run_sep(const ScenarioConfig& cfg, int threads = 0) {
    cfg.validate();
    std::vector<MetricRecord> out;

    double eta = 1.0;
    if (cfg.scheme == Scheme::cds) {
        const double n_c = coherence_symbols(cfg.mob.doppler_hz, cfg.ofdm.subcarrier_spacing,
                                             cfg.ofdm.subcarriers, cfg.ofdm.cp_length, cfg.calibration);
        eta = efficiency_factor(cfg.geom_rs.total(), n_c);
        if (eta <= 0.0) {
            MetricRecord rec;
            rec.metric_name = "sep";
            rec.infeasible = true;
            rec.value = std::numeric_limits<double>::quiet_NaN();
            rec.ci_low = rec.ci_high = rec.value;
            detail::stamp_context(rec, cfg);
            out.push_back(std::move(rec));
            return out;
        }
    }

    Eigen::MatrixXd coloring;
    if (cfg.scheme == Scheme::ncds && cfg.channel_model == ChannelModel::iid_rayleigh &&
        cfg.mob.doppler_hz > 0.0)
        coloring = temporal_coloring_sqrt(cfg.ofdm.frame_symbols, cfg.mob, cfg.ofdm);

    auto per_trial = [&](int t) {
        Rng rng = Rng::stream(cfg.master_seed, "sep-trial", static_cast<std::uint64_t>(t));
        return cfg.scheme == Scheme::ncds ? detail::ncds_frame(cfg, coloring, rng)
                                          : detail::cds_trial(cfg, rng);
    };
    const auto stats =
        detail::run_trials_ordered(cfg.trials, threads, true, cfg.min_errors, cfg.min_decisions, per_trial);

    long long errors = 0, decisions = 0, zeros = 0;
    for (const auto& st : stats) {
        errors += st.errors;
        decisions += st.decisions;
        zeros += st.zero_decisions;
    }
    if (decisions == 0) throw std::runtime_error("run_sep: no decisions were made");

    MetricRecord rec;
    rec.metric_name = "sep";
    rec.value = static_cast<double>(errors) / static_cast<double>(decisions);
    rec.ci_low = detail::wilson_low(errors, decisions);
    rec.ci_high = detail::wilson_high(errors, decisions);
    rec.samples = decisions;
    detail::stamp_context(rec, cfg);
    out.push_back(rec);

    if (cfg.scheme == Scheme::cds) {
        MetricRecord eff = rec;
        eff.metric_name = "sep_eff_px";
        eff.px_dbw = rec.px_dbw - linear_to_db(eta);  // P_x^eff = P_x / eta_c
        out.push_back(std::move(eff));
    }
    if (zeros > 0) {
        MetricRecord zrec = rec;
        zrec.metric_name = "zero_decisions";
        zrec.value = static_cast<double>(zeros);
        zrec.ci_low = zrec.ci_high = zrec.value;
        out.push_back(std::move(zrec));
    }
    return out;
}

/// Parameter sweep: runs the template's experiment once per axis value, in
/// input order. All records share the template digest; the whole sweep is a
/// pure function of the template (and its master seed).
inline std::vector<MetricRecord> sweep(const ScenarioConfig& tpl, const std::string& axis,
                                       const std::vector<double>& values, int threads = 0) {
    const std::string template_digest = tpl.digest();
    std::vector<MetricRecord> out;
    for (double v : values) {
        ScenarioConfig cfg = tpl;
        if (axis == "P_x") {
            cfg.budget.tx_power = db_to_linear(v);
        } else if (axis == "M") {
            cfg.geom_rs = geometry_for_total(static_cast<int>(std::llround(v)),
                                             tpl.geom_rs.spacing_h, tpl.geom_rs.spacing_v);
        } else if (axis == "B") {
            cfg.geom_bs = geometry_for_total(static_cast<int>(std::llround(v)),
                                             tpl.geom_bs.spacing_h, tpl.geom_bs.spacing_v);
        } else if (axis == "speed") {
            cfg.mob = MobilityModel::from_speed_kmh(v, tpl.mob.carrier_hz);
        } else if (axis == "order") {
            cfg.order = static_cast<int>(std::llround(v));
        } else {
            throw std::invalid_argument("sweep: unknown axis '" + axis + "'");
        }
        cfg.validate();

        std::vector<MetricRecord> rows;
        switch (cfg.experiment) {
            case Experiment::sinr:
                rows.push_back(run_sinr_ncds(cfg, threads));
                break;
            case Experiment::sep:
                rows = run_sep(cfg, threads);
                break;
            case Experiment::moments:
                rows = run_moment_check(cfg);
                break;
        }
        for (auto& r : rows) {
            r.config_digest = template_digest;
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace rislink
