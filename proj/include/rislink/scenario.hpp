#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include "rislink/analysis.hpp"
#include "rislink/channel.hpp"
#include "rislink/modem_ncds.hpp"

namespace rislink {

enum class ChannelModel { iid_rayleigh, geometric };
enum class Scheme { ncds, cds };
enum class PhaseMode { per_frame, per_symbol };
enum class Experiment { sinr, sep, moments };

inline const char* to_string(ChannelModel m) {
    return m == ChannelModel::iid_rayleigh ? "iid_rayleigh" : "geometric";
}
inline const char* to_string(Scheme s) { return s == Scheme::ncds ? "ncds" : "cds"; }
inline const char* to_string(PhaseMode m) { return m == PhaseMode::per_frame ? "per_frame" : "per_symbol"; }
inline const char* to_string(Experiment e) {
    switch (e) {
        case Experiment::sinr: return "sinr";
        case Experiment::sep: return "sep";
        default: return "moments";
    }
}

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

/// Node placement and cluster statistics for the geometric channel model.
/// LOS reference angles are derived from the coordinates.
struct GeometricConfig {
    Vec3 bs_pos{0.0, 0.0, 3.0};
    Vec3 rs_pos{3.0, 0.0, 3.0};
    Vec3 ue_pos{6.0, 1.0, 1.0};
    int cluster_count = 20;
    double delay_spread_s = 1.5e-4;
    double asd_deg = 7.0;
    double asa_deg = 12.0;
    double zsd_deg = 25.0;
    double zsa_deg = 30.0;
    double ue_motion_azimuth_deg = 0.0;
};

namespace detail {

struct Angles {
    double azimuth_deg, zenith_deg;
};

inline Angles direction_angles(const Vec3& from, const Vec3& to) {
    const double dx = to.x - from.x, dy = to.y - from.y, dz = to.z - from.z;
    const double norm = std::sqrt(dx * dx + dy * dy + dz * dz);
    Angles a;
    a.azimuth_deg = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
    a.zenith_deg = norm > 0.0 ? std::acos(dz / norm) * 180.0 / std::numbers::pi : 90.0;
    return a;
}

}  // namespace detail

/// First hop: signal departs the surface and arrives at the base station.
inline ClusterProfile profile_bs_rs(const GeometricConfig& g) {
    ClusterProfile p;
    p.cluster_count = g.cluster_count;
    p.delay_spread_s = g.delay_spread_s;
    p.asd_deg = g.asd_deg;
    p.asa_deg = g.asa_deg;
    p.zsd_deg = g.zsd_deg;
    p.zsa_deg = g.zsa_deg;
    const auto dep = detail::direction_angles(g.rs_pos, g.bs_pos);
    const auto arr = detail::direction_angles(g.bs_pos, g.rs_pos);
    p.los_azimuth_dep_deg = dep.azimuth_deg;
    p.los_zenith_dep_deg = dep.zenith_deg;
    p.los_azimuth_arr_deg = arr.azimuth_deg;
    p.los_zenith_arr_deg = arr.zenith_deg;
    return p;
}

/// Second hop: signal departs the user and arrives at the surface.
inline ClusterProfile profile_rs_ue(const GeometricConfig& g) {
    ClusterProfile p;
    p.cluster_count = g.cluster_count;
    p.delay_spread_s = g.delay_spread_s;
    p.asd_deg = g.asd_deg;
    p.asa_deg = g.asa_deg;
    p.zsd_deg = g.zsd_deg;
    p.zsa_deg = g.zsa_deg;
    const auto dep = detail::direction_angles(g.ue_pos, g.rs_pos);
    const auto arr = detail::direction_angles(g.rs_pos, g.ue_pos);
    p.los_azimuth_dep_deg = dep.azimuth_deg;
    p.los_zenith_dep_deg = dep.zenith_deg;
    p.los_azimuth_arr_deg = arr.azimuth_deg;
    p.los_zenith_arr_deg = arr.zenith_deg;
    return p;
}

/// Complete description of one experiment run.
struct ScenarioConfig {
    ArrayGeometry geom_bs{2, 2};
    ArrayGeometry geom_rs{8, 8};
    LinkBudget budget{db_to_linear(-48.0), db_to_linear(-59.0), db_to_linear(-94.0), 1.0};
    OfdmNumerology ofdm{1024, 72, 30e3, 140};
    MobilityModel mob{0.0, 3.5e9};
    ChannelModel channel_model = ChannelModel::iid_rayleigh;
    Scheme scheme = Scheme::ncds;
    Experiment experiment = Experiment::sinr;
    PhaseMode phase_mode = PhaseMode::per_frame;
    GeometricConfig geometry;

    int order = 4;
    int trials = 100;
    std::uint64_t master_seed = 1;
    double calibration = 1.0;
    int optimizer_sweeps = 5;

    // Early-stop thresholds for error-rate runs: stop once both are reached.
    long long min_errors = 100;
    long long min_decisions = 10000;
    long long moment_draws = 1000000;

    void validate() const {
        geom_bs.validate();
        geom_rs.validate();
        budget.validate();
        ofdm.validate();
        mob.validate();
        if (!valid_psk_order(order)) throw std::invalid_argument("ScenarioConfig: order must be 2, 4, 8 or 16");
        if (trials < 1) throw std::invalid_argument("ScenarioConfig: trials must be >= 1");
        if (optimizer_sweeps < 1) throw std::invalid_argument("ScenarioConfig: optimizer_sweeps must be >= 1");
        if (!(calibration > 0.0)) throw std::invalid_argument("ScenarioConfig: calibration must be > 0");
        if (channel_model == ChannelModel::geometric) {
            if (geometry.cluster_count < 1)
                throw std::invalid_argument("ScenarioConfig: cluster_count must be >= 1");
            if (!(geometry.delay_spread_s > 0.0))
                throw std::invalid_argument("ScenarioConfig: delay_spread_s must be > 0");
        }
    }

    double px_dbw() const { return linear_to_db(budget.tx_power); }
    double speed_kmh() const { return mob.speed_kmh(); }

    /// Canonical key=value serialization; field order is fixed so the digest
    /// is stable across runs and platforms.
    std::string canonical_string() const {
        char buf[64];
        std::string s;
        auto putd = [&](const char* key, double v) {
            std::snprintf(buf, sizeof buf, "%s=%.17g;", key, v);
            s += buf;
        };
        auto puti = [&](const char* key, long long v) {
            std::snprintf(buf, sizeof buf, "%s=%lld;", key, v);
            s += buf;
        };
        puti("bs_h", geom_bs.count_h);
        puti("bs_v", geom_bs.count_v);
        putd("bs_sh", geom_bs.spacing_h);
        putd("bs_sv", geom_bs.spacing_v);
        puti("rs_h", geom_rs.count_h);
        puti("rs_v", geom_rs.count_v);
        putd("rs_sh", geom_rs.spacing_h);
        putd("rs_sv", geom_rs.spacing_v);
        putd("gain_bs_rs", budget.gain_bs_rs);
        putd("gain_rs_ue", budget.gain_rs_ue);
        putd("noise", budget.noise_power);
        putd("tx_power", budget.tx_power);
        puti("K", ofdm.subcarriers);
        puti("Lcp", ofdm.cp_length);
        putd("df", ofdm.subcarrier_spacing);
        puti("N", ofdm.frame_symbols);
        putd("fd", mob.doppler_hz);
        putd("fc", mob.carrier_hz);
        s += "channel=";
        s += to_string(channel_model);
        s += ";scheme=";
        s += to_string(scheme);
        s += ";experiment=";
        s += to_string(experiment);
        s += ";phase_mode=";
        s += to_string(phase_mode);
        s += ";";
        puti("order", order);
        puti("trials", trials);
        puti("seed", static_cast<long long>(master_seed));
        putd("calibration", calibration);
        puti("sweeps", optimizer_sweeps);
        puti("min_errors", min_errors);
        puti("min_decisions", min_decisions);
        puti("moment_draws", moment_draws);
        if (channel_model == ChannelModel::geometric) {
            putd("bs_x", geometry.bs_pos.x);
            putd("bs_y", geometry.bs_pos.y);
            putd("bs_z", geometry.bs_pos.z);
            putd("rs_x", geometry.rs_pos.x);
            putd("rs_y", geometry.rs_pos.y);
            putd("rs_z", geometry.rs_pos.z);
            putd("ue_x", geometry.ue_pos.x);
            putd("ue_y", geometry.ue_pos.y);
            putd("ue_z", geometry.ue_pos.z);
            puti("clusters", geometry.cluster_count);
            putd("ds", geometry.delay_spread_s);
            putd("asd", geometry.asd_deg);
            putd("asa", geometry.asa_deg);
            putd("zsd", geometry.zsd_deg);
            putd("zsa", geometry.zsa_deg);
            putd("motion_az", geometry.ue_motion_azimuth_deg);
        }
        return s;
    }

    /// 16-hex-digit FNV-1a digest of the canonical serialization, excluding
    /// the seed so reruns with a different seed are recognizably the same
    /// scenario. The seed is reported in its own CSV column.
    std::string digest() const {
        std::string canon = canonical_string();
        std::uint64_t h = 0xcbf29ce484222325ull;
        bool skip = false;
        // cheap removal of the "seed=...;" span
        const std::string needle = "seed=";
        for (std::size_t i = 0; i < canon.size(); ++i) {
            if (!skip && canon.compare(i, needle.size(), needle) == 0 &&
                (i == 0 || canon[i - 1] == ';')) {
                skip = true;
            }
            if (skip) {
                if (canon[i] == ';') skip = false;
                continue;
            }
            h ^= static_cast<unsigned char>(canon[i]);
            h *= 0x100000001b3ull;
        }
        char out[17];
        std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
        return out;
    }
};

/// Near-square URA for a given element total (largest factor pair).
inline ArrayGeometry geometry_for_total(int total, double spacing_h = 0.5, double spacing_v = 0.5) {
    if (total < 1) throw std::invalid_argument("geometry_for_total: total must be >= 1");
    int v = static_cast<int>(std::floor(std::sqrt(static_cast<double>(total))));
    while (v > 1 && total % v != 0) --v;
    return ArrayGeometry(total / v, v, spacing_h, spacing_v);
}

}  // namespace rislink
