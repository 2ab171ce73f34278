#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rislink/config.hpp"
#include "rislink/csv.hpp"
#include "rislink/engine.hpp"
#include "rislink/version.hpp"

namespace rislink {

inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

namespace cli_detail {

inline std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw ConfigError("invalid number in list: '" + item + "'");
    }
    if (out.empty()) throw ConfigError("empty value list");
    return out;
}

/// "4" -> near-square 4-element URA, "2x2" -> explicit grid.
inline ArrayGeometry parse_array_arg(const std::string& s, const ArrayGeometry& like) {
    const std::size_t x = s.find_first_of("xX");
    if (x == std::string::npos)
        return geometry_for_total(std::stoi(s), like.spacing_h, like.spacing_v);
    return ArrayGeometry(std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1)), like.spacing_h,
                         like.spacing_v);
}

inline std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string manifest_path_for(const std::string& out_path) {
    const std::size_t dot = out_path.rfind('.');
    const std::size_t slash = out_path.rfind('/');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
        return out_path.substr(0, dot) + ".manifest.json";
    return out_path + ".manifest.json";
}

struct EmitContext {
    std::string subcommand;
    std::string config_path;  // empty when the subcommand takes no config file
    std::string out_path;     // empty => stdout
    std::string digest;
    std::uint64_t seed = 0;
    std::vector<std::string> defaults_applied;
    nlohmann::json resolved;  // free-form description of the resolved parameters
};

/// Writes the CSV (file or stream) and, when writing to a file, the run
/// manifest alongside it. Every row is stamped with the run digest first so
/// manifest and rows always agree.
inline void emit(const EmitContext& ctx, std::vector<MetricRecord> rows, std::ostream& stdout_stream) {
    for (auto& r : rows) r.config_digest = ctx.digest;
    const std::string csv = csv_table(rows);
    if (ctx.out_path.empty()) {
        stdout_stream << csv;
        return;
    }
    std::ofstream f(ctx.out_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file '" + ctx.out_path + "'");
    f << csv;
    f.close();

    nlohmann::json manifest;
    manifest["tool"] = "rislink";
    manifest["tool_version"] = kVersion;
    manifest["subcommand"] = ctx.subcommand;
    manifest["config_path"] = ctx.config_path;
    manifest["output_path"] = ctx.out_path;
    manifest["config_digest"] = ctx.digest;
    manifest["master_seed"] = ctx.seed;
    manifest["timestamp_utc"] = utc_timestamp();
    manifest["defaults_applied"] = ctx.defaults_applied;
    manifest["resolved"] = ctx.resolved;
    std::ofstream mf(manifest_path_for(ctx.out_path), std::ios::binary);
    if (!mf) throw std::runtime_error("cannot open manifest file");
    mf << manifest.dump(2) << "\n";
}

inline nlohmann::json scenario_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["B"] = cfg.geom_bs.total();
    j["B_grid"] = {cfg.geom_bs.count_h, cfg.geom_bs.count_v};
    j["M"] = cfg.geom_rs.total();
    j["M_grid"] = {cfg.geom_rs.count_h, cfg.geom_rs.count_v};
    j["gain_bs_rs"] = cfg.budget.gain_bs_rs;
    j["gain_rs_ue"] = cfg.budget.gain_rs_ue;
    j["noise_power_w"] = cfg.budget.noise_power;
    j["tx_power_w"] = cfg.budget.tx_power;
    j["subcarriers"] = cfg.ofdm.subcarriers;
    j["cp_length"] = cfg.ofdm.cp_length;
    j["subcarrier_spacing_hz"] = cfg.ofdm.subcarrier_spacing;
    j["frame_symbols"] = cfg.ofdm.frame_symbols;
    j["doppler_hz"] = cfg.mob.doppler_hz;
    j["carrier_hz"] = cfg.mob.carrier_hz;
    j["channel_model"] = to_string(cfg.channel_model);
    j["scheme"] = to_string(cfg.scheme);
    j["experiment"] = to_string(cfg.experiment);
    j["phase_mode"] = to_string(cfg.phase_mode);
    j["order"] = cfg.order;
    j["trials"] = cfg.trials;
    j["master_seed"] = cfg.master_seed;
    j["calibration"] = cfg.calibration;
    j["optimizer_sweeps"] = cfg.optimizer_sweeps;
    if (cfg.channel_model == ChannelModel::geometric) {
        j["bs_pos"] = {cfg.geometry.bs_pos.x, cfg.geometry.bs_pos.y, cfg.geometry.bs_pos.z};
        j["rs_pos"] = {cfg.geometry.rs_pos.x, cfg.geometry.rs_pos.y, cfg.geometry.rs_pos.z};
        j["ue_pos"] = {cfg.geometry.ue_pos.x, cfg.geometry.ue_pos.y, cfg.geometry.ue_pos.z};
        j["cluster_count"] = cfg.geometry.cluster_count;
        j["delay_spread_s"] = cfg.geometry.delay_spread_s;
        j["asd_deg"] = cfg.geometry.asd_deg;
        j["asa_deg"] = cfg.geometry.asa_deg;
        j["zsd_deg"] = cfg.geometry.zsd_deg;
        j["zsa_deg"] = cfg.geometry.zsa_deg;
        j["ue_motion_azimuth_deg"] = cfg.geometry.ue_motion_azimuth_deg;
    }
    return j;
}

// --- validate subcommand ----------------------------------------------------

inline int run_validate(std::uint64_t seed, std::ostream& out) {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        out << (ok ? "ok: " : "FAIL: ") << name << "\n";
        if (!ok) ++failures;
    };
    Rng rng = Rng::stream(seed, "validate");
    const OfdmNumerology ofdm(1024, 72, 30e3, 16);

    {
        const MobilityModel mob(100.0, 3.5e9);
        bool ok = doppler_autocorr(0, mob, ofdm) == 1.0;
        for (int d = 1; d <= 5; ++d)
            ok = ok && doppler_autocorr(d, mob, ofdm) == doppler_autocorr(-d, mob, ofdm);
        check("doppler autocorrelation is 1 at lag 0 and even in the lag", ok);
    }
    {
        const ArrayGeometry geom(3, 2, 0.4, 0.7);
        VectorC u = ura_response(37.0, 64.0, geom);
        bool ok = true;
        for (int i = 0; i < u.size(); ++i) ok = ok && std::abs(std::abs(u[i]) - 1.0) < 1e-12;
        check("array response entries are unit modulus", ok);
    }
    {
        PhaseSchedule tr = training_schedule(8);
        MatrixC gram = tr.coefficients * tr.coefficients.adjoint();
        bool ok = (gram - 8.0 * MatrixC::Identity(8, 8)).norm() < 1e-10;
        check("training schedule rows are orthogonal", ok);
    }
    {
        Rng r1 = Rng::stream(seed, "validate-sched");
        Rng r2 = Rng::stream(seed, "validate-sched");
        PhaseSchedule a = random_schedule(6, 4, r1);
        PhaseSchedule b = random_schedule(6, 4, r2);
        bool ok = (a.coefficients - b.coefficients).norm() == 0.0;
        for (int n = 0; n < a.symbols(); ++n)
            for (int m = 0; m < a.elements(); ++m)
                ok = ok && std::abs(std::abs(a.coefficients(n, m)) - 1.0) < 1e-12;
        check("random schedule is unit modulus and seed-deterministic", ok);
    }
    {
        const int b = 3, m = 5;
        MatrixC h = gen_iid_matrix(b, m, 1.0, rng);
        VectorC g(m), psi(m);
        for (int i = 0; i < m; ++i) g[i] = rng.cgauss(1.0);
        for (int i = 0; i < m; ++i) psi[i] = rng.unit_phasor();
        VectorC fast = cascade_vec(h, g, psi.transpose());
        VectorC slow = VectorC::Zero(b);
        for (int mm = 0; mm < m; ++mm)
            for (int bb = 0; bb < b; ++bb) slow[bb] += psi[mm] * h(bb, mm) * g[mm];
        check("cascade matches the explicit summation", (fast - slow).norm() < 1e-12 * slow.norm());
    }
    {
        bool ok = true;
        for (int order : {2, 4, 8, 16}) {
            Eigen::MatrixXi idx(4, 8);
            for (int r = 0; r < idx.rows(); ++r)
                for (int c = 0; c < idx.cols(); ++c) idx(r, c) = c == 0 ? 0 : rng.uniform_int(order);
            SymbolGrid s = psk_map(idx, order);
            SymbolGrid x = diff_encode(s, 2.0);
            for (int r = 0; r < idx.rows(); ++r)
                for (int c = 1; c < idx.cols(); ++c) {
                    cplx z = diff_decode(x.values.row(r).segment(c - 1, 1), x.values.row(r).segment(c, 1), 1, 1);
                    ok = ok && decide(z, order) == idx(r, c);
                }
        }
        check("noise-free differential loopback recovers every index", ok);
    }
    {
        const int b = 4;
        VectorC q(b), v1(b), v2(b);
        for (int i = 0; i < b; ++i) q[i] = rng.cgauss(1.0);
        for (int i = 0; i < b; ++i) v1[i] = rng.cgauss(0.5);
        for (int i = 0; i < b; ++i) v2[i] = rng.cgauss(0.5);
        const cplx x_prev = std::sqrt(3.0) * rng.unit_phasor();
        const cplx x_curr = x_prev * psk_point(2, 4);
        VectorC y1 = q * x_prev + v1, y2 = q * x_curr + v2;
        DiffTerms t = decompose_terms(q, q, x_prev, x_curr, v1, v2);
        const cplx direct = diff_decode(y1, y2, 8, b);
        check("term decomposition reconstructs the decision variable",
              std::abs(t.sum() / (8.0 * b) - direct) < 1e-10 * std::abs(direct));
    }
    {
        bool ok = true;
        for (int it = 0; it < 100; ++it) {
            const int b = 1 + rng.uniform_int(8), m = 1 + rng.uniform_int(64);
            const double sh2 = std::pow(10.0, rng.uniform(-6.0, 0.0));
            const double sg2 = std::pow(10.0, rng.uniform(-6.0, 0.0));
            const double sv2 = std::pow(10.0, rng.uniform(-10.0, 0.0));
            const double px = std::pow(10.0, rng.uniform(-1.0, 2.0));
            const MomentSet ms = moments_closed_form(b, m, sh2, sg2, sv2, px);
            const double direct = sinr_ncds(b, m, sh2, sg2, sv2, px);
            const double rebuilt = sinr_from_moments(b, m, sh2, sg2, px, ms);
            ok = ok && std::abs(direct - rebuilt) < 1e-9 * direct;
        }
        check("moment set reproduces the closed-form SINR", ok);
    }
    {
        bool ok = true;
        for (double nc : {50.0, 200.0, 609.756}) {
            double prev = 1.0;
            for (int m : {8, 16, 32, 64, 128}) {
                const double eta = efficiency_factor(m, nc);
                ok = ok && eta >= 0.0 && eta <= 1.0 && eta <= prev;
                prev = eta;
            }
        }
        check("efficiency factor stays in [0,1] and is non-increasing in M", ok);
    }
    {
        const int b = 5;
        VectorC qh(b), y(b);
        for (int i = 0; i < b; ++i) qh[i] = rng.cgauss(1.0);
        const cplx sym(3.0, 4.0);
        y = qh * sym;
        check("MRC recovers the matched symbol exactly", std::abs(mrc_detect(qh, y) - sym) < 1e-12 * std::abs(sym));
    }
    {
        const int b = 2, m = 4, k = 3;
        PhaseSchedule tr = training_schedule(m);
        std::vector<MatrixC> truth(k), rx(k);
        const cplx pilot = std::sqrt(2.0);
        for (int kk = 0; kk < k; ++kk) {
            truth[kk] = gen_iid_matrix(b, m, 1.0, rng);
            MatrixC y(b, m);
            for (int t = 0; t < m; ++t)
                y.col(t) = truth[kk] * tr.coefficients.row(t).transpose() * pilot;
            rx[kk] = y;
        }
        CascadedEstimate est = sound_cascaded(rx, tr, pilot);
        double rel = 0.0;
        for (int kk = 0; kk < k; ++kk)
            rel = std::max(rel, (est.per_element[kk] - truth[kk]).norm() / truth[kk].norm());
        check("noise-free sounding recovers the cascaded channel", rel < 1e-10);
    }
    {
        std::vector<MatrixC> c(4);
        for (auto& ck : c) ck = gen_iid_matrix(2, 3, 1.0, rng);
        PhaseOptimum opt = optimize_phases(c, 6);
        bool ok = true;
        for (std::size_t i = 1; i < opt.objective_per_sweep.size(); ++i)
            ok = ok && opt.objective_per_sweep[i] >= opt.objective_per_sweep[i - 1] * (1.0 - 1e-12);
        check("phase optimizer objective is non-decreasing", ok);
    }
    {
        bool ok = true;
        for (int i = 0; i < 16; ++i) ok = ok && decide(psk_point(i, 16), 16) == i;
        check("PSK map/demap round trip is exact", ok);
    }
    {
        const ComplexityCounts c = complexity_counts(4, 64, 1024, 5);
        check("complexity counts match their definitions",
              c.cds_products == 4096 && c.ncds_products == 5 * 1023 &&
                  c.cds_opt_order == 5ull * (64 + 64) * 1024);
    }
    out << (failures == 0 ? "validate: all checks passed\n" : "validate: FAILURES\n");
    return failures == 0 ? 0 : 1;
}

}  // namespace cli_detail

/// Full command-line front end. Returns the process exit code; all output
/// goes through the provided streams so tests can capture it.
inline int subcommand_dispatch(std::vector<std::string> args, std::ostream& out = std::cout,
                               std::ostream& err = std::cerr) {
    CLI::App app{"Reflecting-surface uplink link-level simulator and analytical toolkit"};
    app.set_version_flag("--version", std::string("rislink ") + kVersion);
    app.require_subcommand(0, 1);

    // ---- shared option state -------------------------------------------
    std::string config_path, out_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    double calibration = 0.0;
    bool calibration_set = false;

    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config)
            sub->add_option("--config", config_path, "scenario config file (see presets/)")->required();
        sub->add_option("--out", out_path, "output CSV path (default: stdout)");
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& v) { seed = v; seed_set = true; }, "master seed override");
        sub->add_option("--threads", threads, "worker threads (0 = all cores)");
        sub->add_option_function<double>(
            "--calibration", [&](const double& v) { calibration = v; calibration_set = true; },
            "coherence-time calibration factor override");
    };

    // ---- sinr -----------------------------------------------------------
    auto* sinr_cmd = app.add_subcommand("sinr", "empirical vs closed-form non-coherent SINR sweep");
    std::string sinr_px = "-10,-5,0,5,10,15,20";
    std::string sinr_b, sinr_m;
    int sinr_trials = 0, sinr_frame = 0;
    bool with_analytic = false;
    add_common(sinr_cmd, true);
    sinr_cmd->add_option("--px-dbw", sinr_px, "comma list of transmit powers in dBW");
    sinr_cmd->add_option("--B", sinr_b, "BS array override, total or HxV");
    sinr_cmd->add_option("--M", sinr_m, "RS array override, total or HxV");
    sinr_cmd->add_option("--trials", sinr_trials, "trials per point override");
    sinr_cmd->add_option("--frame-symbols", sinr_frame, "frame length override");
    sinr_cmd->add_flag("--analytic", with_analytic, "also emit closed-form rows");

    // ---- sep ------------------------------------------------------------
    auto* sep_cmd = app.add_subcommand("sep", "symbol error probability comparison");
    std::string sep_scheme = "both", sep_elements = "32,64,256";
    double sep_px = std::nan("");
    double sep_speed = std::nan("");
    int sep_trials = 0, sep_order = 0;
    add_common(sep_cmd, true);
    sep_cmd->add_option("--scheme", sep_scheme, "ncds, cds or both")
        ->check(CLI::IsMember({"ncds", "cds", "both"}));
    sep_cmd->add_option("--elements", sep_elements, "comma list of RS element counts");
    sep_cmd->add_option("--px-dbw", sep_px, "transmit power in dBW override");
    sep_cmd->add_option("--speed", sep_speed, "UE speed in km/h override");
    sep_cmd->add_option("--order", sep_order, "PSK order override");
    sep_cmd->add_option("--trials", sep_trials, "max trials per point override");

    // ---- efficiency -------------------------------------------------------
    auto* eff_cmd = app.add_subcommand("efficiency", "coherent-scheme training efficiency table");
    std::string eff_speeds = "3,10,20,30,40";
    std::string eff_elements = "32,64,128,256,512";
    double eff_cal = 1.0, eff_fc = 3.5e9, eff_scs = 30e3;
    int eff_k = 1024, eff_lcp = 72;
    eff_cmd->add_option("--speeds", eff_speeds, "comma list of UE speeds in km/h");
    eff_cmd->add_option("--elements", eff_elements, "comma list of RS element counts");
    eff_cmd->add_option("--calibration", eff_cal, "coherence-time calibration factor");
    eff_cmd->add_option("--carrier-hz", eff_fc, "carrier frequency");
    eff_cmd->add_option("--scs-hz", eff_scs, "subcarrier spacing");
    eff_cmd->add_option("--subcarriers", eff_k, "FFT size K");
    eff_cmd->add_option("--cp-length", eff_lcp, "cyclic prefix length in samples");
    eff_cmd->add_option("--out", out_path, "output CSV path (default: stdout)");

    // ---- analysis ---------------------------------------------------------
    auto* ana_cmd = app.add_subcommand("analysis", "closed-form results over a grid");
    std::string ana_eq = "sinr", ana_b = "4", ana_m = "64";
    std::string ana_px = "0";
    std::string ana_speeds = "3,10,20,30,40";
    double ana_la = -48.0, ana_lb = -59.0, ana_noise = -94.0, ana_cal = 1.0, ana_scs = 30e3, ana_fc = 3.5e9;
    int ana_rt = 5, ana_k = 1024, ana_lcp = 72;
    bool highpower = false;
    ana_cmd->add_option("--eq", ana_eq, "sinr, moments, complexity or coherence")
        ->check(CLI::IsMember({"sinr", "moments", "complexity", "coherence"}));
    ana_cmd->add_option("--B", ana_b, "BS antennas, total or HxV");
    ana_cmd->add_option("--M", ana_m, "RS elements, total or HxV");
    ana_cmd->add_option("--px-dbw", ana_px, "comma list of transmit powers in dBW");
    ana_cmd->add_flag("--highpower", highpower, "evaluate the P_x -> infinity limit");
    ana_cmd->add_option("--la-db", ana_la, "first-hop average gain in dB");
    ana_cmd->add_option("--lb-db", ana_lb, "second-hop average gain in dB");
    ana_cmd->add_option("--noise-dbw", ana_noise, "noise power in dBW");
    ana_cmd->add_option("--rt", ana_rt, "optimizer iteration count R_t");
    ana_cmd->add_option("--subcarriers", ana_k, "FFT size K");
    ana_cmd->add_option("--cp-length", ana_lcp, "cyclic prefix length in samples");
    ana_cmd->add_option("--scs-hz", ana_scs, "subcarrier spacing");
    ana_cmd->add_option("--carrier-hz", ana_fc, "carrier frequency");
    ana_cmd->add_option("--speeds", ana_speeds, "comma list of speeds (coherence mode)");
    ana_cmd->add_option("--calibration", ana_cal, "coherence-time calibration factor");
    ana_cmd->add_option("--out", out_path, "output CSV path (default: stdout)");

    // ---- validate ---------------------------------------------------------
    auto* val_cmd = app.add_subcommand("validate", "run the built-in invariant checks");
    std::uint64_t val_seed = 20240601;
    val_cmd->add_option("--seed", val_seed, "seed for the randomized checks");

    // ---- parse ------------------------------------------------------------
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << app.version() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n" << app.help();
        return 64;
    }
    if (app.get_subcommands().empty()) {
        err << app.help();
        return 64;
    }

    try {
        if (val_cmd->parsed()) return cli_detail::run_validate(val_seed, out);

        if (eff_cmd->parsed()) {
            const auto speeds = cli_detail::parse_list(eff_speeds);
            const auto elements = cli_detail::parse_list(eff_elements);
            std::ostringstream canon;
            canon << "efficiency;cal=" << eff_cal << ";fc=" << eff_fc << ";scs=" << eff_scs
                  << ";K=" << eff_k << ";Lcp=" << eff_lcp << ";speeds=" << eff_speeds
                  << ";elements=" << eff_elements;
            cli_detail::EmitContext ctx;
            ctx.subcommand = "efficiency";
            ctx.out_path = out_path;
            ctx.digest = fnv1a_hex(canon.str());
            ctx.resolved = {{"calibration", eff_cal}, {"carrier_hz", eff_fc},  {"scs_hz", eff_scs},
                            {"subcarriers", eff_k},   {"cp_length", eff_lcp},  {"speeds", speeds},
                            {"elements", elements}};

            std::vector<MetricRecord> rows;
            for (double v : speeds) {
                const MobilityModel mob = MobilityModel::from_speed_kmh(v, eff_fc);
                const double n_c = coherence_symbols(mob.doppler_hz, eff_scs, eff_k, eff_lcp, eff_cal);
                MetricRecord nc_row;
                nc_row.metric_name = "coherence_symbols";
                nc_row.value = n_c;
                nc_row.ci_low = nc_row.ci_high = n_c;
                nc_row.speed_kmh = v;
                nc_row.scheme = "cds";
                nc_row.channel_model = "analytic";
                rows.push_back(nc_row);
                for (double m : elements) {
                    MetricRecord r;
                    r.metric_name = "efficiency_factor";
                    r.value = efficiency_factor(static_cast<int>(m), n_c);
                    r.ci_low = r.ci_high = r.value;
                    r.m_total = static_cast<int>(m);
                    r.speed_kmh = v;
                    r.scheme = "cds";
                    r.channel_model = "analytic";
                    rows.push_back(r);
                }
            }
            cli_detail::emit(ctx, std::move(rows), out);
            return 0;
        }

        if (ana_cmd->parsed()) {
            const ArrayGeometry gb = cli_detail::parse_array_arg(ana_b, ArrayGeometry());
            const ArrayGeometry gm = cli_detail::parse_array_arg(ana_m, ArrayGeometry());
            const int b = gb.total(), m = gm.total();
            const double sh2 = db_to_linear(ana_la), sg2 = db_to_linear(ana_lb);
            const double sv2 = db_to_linear(ana_noise);

            std::ostringstream canon;
            canon << "analysis;eq=" << ana_eq << ";B=" << b << ";M=" << m << ";la=" << ana_la
                  << ";lb=" << ana_lb << ";noise=" << ana_noise << ";px=" << ana_px
                  << ";hp=" << highpower << ";rt=" << ana_rt << ";K=" << ana_k << ";Lcp=" << ana_lcp
                  << ";scs=" << ana_scs << ";fc=" << ana_fc << ";speeds=" << ana_speeds
                  << ";cal=" << ana_cal;
            cli_detail::EmitContext ctx;
            ctx.subcommand = "analysis";
            ctx.out_path = out_path;
            ctx.digest = fnv1a_hex(canon.str());
            ctx.resolved = {{"eq", ana_eq}, {"B", b}, {"M", m}};

            std::vector<MetricRecord> rows;
            auto base_row = [&](const char* name) {
                MetricRecord r;
                r.metric_name = name;
                r.b_total = b;
                r.m_total = m;
                r.scheme = "ncds";
                r.channel_model = "analytic";
                return r;
            };
            if (ana_eq == "sinr") {
                if (highpower) {
                    MetricRecord r = base_row("sinr_ncds_highpower");
                    r.value = static_cast<double>(m) * b / (b + m + 1.0);
                    r.ci_low = r.ci_high = r.value;
                    r.px_dbw = std::numeric_limits<double>::infinity();
                    rows.push_back(r);
                } else {
                    for (double px : cli_detail::parse_list(ana_px)) {
                        MetricRecord r = base_row("sinr_ncds_analytic");
                        r.value = sinr_ncds(b, m, sh2, sg2, sv2, db_to_linear(px));
                        r.ci_low = r.ci_high = r.value;
                        r.px_dbw = px;
                        rows.push_back(r);
                    }
                }
            } else if (ana_eq == "moments") {
                for (double px : cli_detail::parse_list(ana_px)) {
                    const MomentSet ms = moments_closed_form(b, m, sh2, sg2, sv2, db_to_linear(px));
                    const double vals[5] = {ms.m_sI1, ms.m_I1, ms.m_I2, ms.m_I3, ms.m_I4};
                    static const char* names[5] = {"m_sI1", "m_I1", "m_I2", "m_I3", "m_I4"};
                    for (int i = 0; i < 5; ++i) {
                        MetricRecord r = base_row(names[i]);
                        r.value = vals[i];
                        r.ci_low = r.ci_high = r.value;
                        r.px_dbw = px;
                        rows.push_back(r);
                    }
                }
            } else if (ana_eq == "complexity") {
                const ComplexityCounts c = complexity_counts(b, m, ana_k, ana_rt);
                const double vals[3] = {static_cast<double>(c.cds_opt_order),
                                        static_cast<double>(c.cds_products),
                                        static_cast<double>(c.ncds_products)};
                static const char* names[3] = {"cds_opt_order", "cds_products", "ncds_products"};
                for (int i = 0; i < 3; ++i) {
                    MetricRecord r = base_row(names[i]);
                    r.scheme = i < 2 ? "cds" : "ncds";
                    r.value = vals[i];
                    r.ci_low = r.ci_high = r.value;
                    rows.push_back(r);
                }
            } else {  // coherence
                for (double v : cli_detail::parse_list(ana_speeds)) {
                    const MobilityModel mob = MobilityModel::from_speed_kmh(v, ana_fc);
                    MetricRecord r = base_row("coherence_symbols");
                    r.scheme = "cds";
                    r.value = coherence_symbols(mob.doppler_hz, ana_scs, ana_k, ana_lcp, ana_cal);
                    r.ci_low = r.ci_high = r.value;
                    r.speed_kmh = v;
                    rows.push_back(r);
                }
            }
            cli_detail::emit(ctx, std::move(rows), out);
            return 0;
        }

        // The remaining subcommands resolve a scenario config file first.
        ResolvedConfig resolved = parse_config(config_path);
        ScenarioConfig& cfg = resolved.scenario;
        if (seed_set) cfg.master_seed = seed;
        if (calibration_set) cfg.calibration = calibration;

        if (sinr_cmd->parsed()) {
            cfg.experiment = Experiment::sinr;
            cfg.scheme = Scheme::ncds;
            if (!sinr_b.empty()) cfg.geom_bs = cli_detail::parse_array_arg(sinr_b, cfg.geom_bs);
            if (!sinr_m.empty()) cfg.geom_rs = cli_detail::parse_array_arg(sinr_m, cfg.geom_rs);
            if (sinr_trials > 0) cfg.trials = sinr_trials;
            if (sinr_frame > 0) cfg.ofdm.frame_symbols = sinr_frame;
            cfg.validate();

            const auto px_list = cli_detail::parse_list(sinr_px);
            std::vector<MetricRecord> rows = sweep(cfg, "P_x", px_list, threads);
            if (with_analytic) {
                for (double px : px_list) {
                    MetricRecord r;
                    r.metric_name = "sinr_ncds_analytic";
                    r.value = sinr_ncds(cfg.geom_bs.total(), cfg.geom_rs.total(), cfg.budget.gain_bs_rs,
                                        cfg.budget.gain_rs_ue, cfg.budget.noise_power, db_to_linear(px));
                    r.ci_low = r.ci_high = r.value;
                    r.samples = 0;
                    r.b_total = cfg.geom_bs.total();
                    r.m_total = cfg.geom_rs.total();
                    r.px_dbw = px;
                    r.speed_kmh = cfg.speed_kmh();
                    r.scheme = "ncds";
                    r.channel_model = "analytic";
                    r.seed = cfg.master_seed;
                    rows.push_back(r);
                }
            }
            cli_detail::EmitContext ctx;
            ctx.subcommand = "sinr";
            ctx.config_path = config_path;
            ctx.out_path = out_path;
            ctx.digest = cfg.digest();
            ctx.seed = cfg.master_seed;
            ctx.defaults_applied = resolved.defaults_applied;
            ctx.resolved = cli_detail::scenario_json(cfg);
            cli_detail::emit(ctx, std::move(rows), out);
            return 0;
        }

        if (sep_cmd->parsed()) {
            cfg.experiment = Experiment::sep;
            if (!std::isnan(sep_px)) cfg.budget.tx_power = db_to_linear(sep_px);
            if (!std::isnan(sep_speed)) cfg.mob = MobilityModel::from_speed_kmh(sep_speed, cfg.mob.carrier_hz);
            if (sep_order > 0) cfg.order = sep_order;
            if (sep_trials > 0) cfg.trials = sep_trials;
            cfg.validate();

            const auto elements = cli_detail::parse_list(sep_elements);
            std::vector<MetricRecord> rows;
            std::vector<Scheme> schemes;
            if (sep_scheme == "ncds" || sep_scheme == "both") schemes.push_back(Scheme::ncds);
            if (sep_scheme == "cds" || sep_scheme == "both") schemes.push_back(Scheme::cds);
            for (Scheme sch : schemes) {
                ScenarioConfig c2 = cfg;
                c2.scheme = sch;
                auto part = sweep(c2, "M", elements, threads);
                rows.insert(rows.end(), part.begin(), part.end());
            }

            cli_detail::EmitContext ctx;
            ctx.subcommand = "sep";
            ctx.config_path = config_path;
            ctx.out_path = out_path;
            ctx.digest = cfg.digest();
            ctx.seed = cfg.master_seed;
            ctx.defaults_applied = resolved.defaults_applied;
            ctx.resolved = cli_detail::scenario_json(cfg);

            bool any_feasible = false;
            bool any_sep = false;
            for (const auto& r : rows)
                if (r.metric_name == "sep") {
                    any_sep = true;
                    if (!r.infeasible) any_feasible = true;
                }
            cli_detail::emit(ctx, std::move(rows), out);
            return (any_sep && !any_feasible) ? 2 : 0;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace rislink
