#include <catch2/catch_amalgamated.hpp>

#include "rislink/csv.hpp"
#include "rislink/engine.hpp"

using namespace rislink;

namespace {

ScenarioConfig small_iid() {
    ScenarioConfig cfg;
    cfg.geom_bs = ArrayGeometry(2, 2);
    cfg.geom_rs = geometry_for_total(64);
    cfg.ofdm = OfdmNumerology(256, 18, 30e3, 16);
    cfg.mob = MobilityModel(0.0, 3.5e9);
    cfg.trials = 16;
    cfg.master_seed = 9001;
    return cfg;
}

}  // namespace

TEST_CASE("empirical SINR converges to the closed form in the high-power limit") {
    ScenarioConfig cfg = small_iid();
    cfg.budget.noise_power = 1e-18;
    MetricRecord rec = run_sinr_ncds(cfg, 2);
    const double expected = 256.0 / 69.0;
    const double diff_db = 10.0 * std::log10(rec.value / expected);
    CHECK(std::abs(diff_db) < 0.2);
    CHECK(rec.samples == 16LL * 256 * 15);
    CHECK(rec.ci_low <= rec.value);
    CHECK(rec.value <= rec.ci_high);
}

TEST_CASE("empirical SINR tracks the closed form at finite power") {
    ScenarioConfig cfg = small_iid();
    for (double px_db : {-5.0, 10.0}) {
        cfg.budget.tx_power = db_to_linear(px_db);
        MetricRecord rec = run_sinr_ncds(cfg, 2);
        const double expected = sinr_ncds(4, 64, cfg.budget.gain_bs_rs, cfg.budget.gain_rs_ue,
                                          cfg.budget.noise_power, cfg.budget.tx_power);
        CHECK(std::abs(10.0 * std::log10(rec.value / expected)) < 0.2);
    }
}

TEST_CASE("SINR run rejects broken configurations") {
    ScenarioConfig cfg = small_iid();
    cfg.trials = 0;
    CHECK_THROWS_AS(run_sinr_ncds(cfg, 1), std::invalid_argument);
    cfg = small_iid();
    cfg.scheme = Scheme::cds;
    CHECK_THROWS_AS(run_sinr_ncds(cfg, 1), std::invalid_argument);
    cfg = small_iid();
    cfg.ofdm.frame_symbols = 1;  // bypasses the constructor check
    CHECK_THROWS_AS(run_sinr_ncds(cfg, 1), std::invalid_argument);
}

TEST_CASE("moment estimates match the closed forms") {
    ScenarioConfig cfg;
    cfg.geom_bs = ArrayGeometry(1, 1);
    cfg.geom_rs = ArrayGeometry(1, 1);
    cfg.budget = LinkBudget(1.0, 1.0, 1.0, 1.0);
    cfg.moment_draws = 500000;
    cfg.master_seed = 31;
    auto rows = run_moment_check(cfg);
    REQUIRE(rows.size() == 5);
    const MomentSet ms = moments_closed_form(1, 1, 1.0, 1.0, 1.0, 1.0);
    const double expected[5] = {ms.m_sI1, ms.m_I1, ms.m_I2, ms.m_I3, ms.m_I4};
    for (int i = 0; i < 5; ++i) {
        CHECK(rows[i].value == Catch::Approx(expected[i]).epsilon(0.02));
        CHECK(rows[i].ci_low <= rows[i].value);
        CHECK(rows[i].value <= rows[i].ci_high);
    }
}

TEST_CASE("moment estimates: larger arrays and the quiet-noise limit") {
    ScenarioConfig cfg;
    cfg.geom_bs = ArrayGeometry(2, 2);
    cfg.geom_rs = geometry_for_total(32);
    cfg.budget = LinkBudget(1.0, 1.0, 1e-30, 1.0);
    cfg.moment_draws = 200000;
    cfg.master_seed = 32;
    auto rows = run_moment_check(cfg);
    CHECK(rows[0].value == Catch::Approx(128.0).epsilon(0.02));  // E{s* I1} = B*M
    CHECK(rows[4].value < 1e-50);                                // noise product vanishes
}

TEST_CASE("noise-free loopback frame has zero symbol errors") {
    ScenarioConfig cfg = small_iid();
    cfg.budget.noise_power = 1e-30;
    cfg.ofdm = OfdmNumerology(64, 4, 30e3, 20);
    cfg.geom_rs = geometry_for_total(16);
    cfg.trials = 9;
    cfg.experiment = Experiment::sep;
    auto rows = run_sep(cfg, 2);
    REQUIRE(!rows.empty());
    CHECK(rows[0].value == 0.0);
    CHECK(rows[0].samples >= 10000);
    CHECK(rows[0].ci_low == 0.0);
}

TEST_CASE("per-symbol random phases break the differential link") {
    // With fresh random phases on every OFDM symbol the cascaded channel
    // decorrelates between the two halves of each differential pair, so the
    // decisions collapse to chance; the static-per-frame mode is the
    // operating point of the scheme.
    ScenarioConfig cfg = small_iid();
    cfg.budget.noise_power = 1e-30;
    cfg.ofdm = OfdmNumerology(64, 4, 30e3, 20);
    cfg.geom_rs = geometry_for_total(16);
    cfg.trials = 4;
    cfg.phase_mode = PhaseMode::per_symbol;
    auto rows = run_sep(cfg, 2);
    CHECK(rows[0].value > 0.5);  // QPSK chance level is 0.75
}

TEST_CASE("CDS run is infeasible when sounding exceeds the coherence block") {
    ScenarioConfig cfg = small_iid();
    cfg.scheme = Scheme::cds;
    cfg.geom_rs = geometry_for_total(256);
    cfg.mob = MobilityModel::from_speed_kmh(10.0, 3.5e9);
    cfg.calibration = 0.5;
    auto rows = run_sep(cfg, 1);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].infeasible);
    const std::string cell = csv_row(rows[0]);
    CHECK(cell.find("sep,infeasible,") != std::string::npos);
}

TEST_CASE("feasible CDS run reports the effective-power row") {
    ScenarioConfig cfg = small_iid();
    cfg.scheme = Scheme::cds;
    cfg.geom_rs = geometry_for_total(16);
    cfg.ofdm = OfdmNumerology(32, 2, 30e3, 4);
    cfg.budget.noise_power = 1e-30;
    // coherence block of ~64 symbols
    cfg.mob.doppler_hz = 30e3 * 0.423 * 32.0 / 34.0 / 64.0;
    cfg.trials = 2;
    auto rows = run_sep(cfg, 1);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].metric_name == "sep");
    CHECK(rows[1].metric_name == "sep_eff_px");
    CHECK(rows[1].value == rows[0].value);
    const double eta = efficiency_factor(16, 64.0);
    CHECK(rows[1].px_dbw == Catch::Approx(rows[0].px_dbw - linear_to_db(eta)).margin(1e-9));
}

TEST_CASE("results are identical for any worker count") {
    ScenarioConfig cfg = small_iid();
    cfg.budget.tx_power = db_to_linear(-14.0);  // noisy enough to produce errors
    cfg.trials = 12;
    cfg.experiment = Experiment::sep;

    auto a = run_sep(cfg, 1);
    auto b = run_sep(cfg, 3);
    REQUIRE(a.size() == b.size());
    CHECK(a[0].value == b[0].value);
    CHECK(a[0].samples == b[0].samples);
    CHECK(a[0].ci_low == b[0].ci_low);
    CHECK(a[0].ci_high == b[0].ci_high);

    MetricRecord s1 = run_sinr_ncds(cfg, 1);
    MetricRecord s2 = run_sinr_ncds(cfg, 2);
    CHECK(s1.value == s2.value);
    CHECK(s1.ci_low == s2.ci_low);
    CHECK(s1.ci_high == s2.ci_high);
}

TEST_CASE("early stopping accumulates a deterministic trial prefix") {
    ScenarioConfig cfg = small_iid();
    cfg.budget.tx_power = db_to_linear(-14.0);
    cfg.trials = 64;
    cfg.min_errors = 50;
    cfg.min_decisions = 1000;
    auto rows1 = run_sep(cfg, 1);
    auto rows3 = run_sep(cfg, 3);
    CHECK(rows1[0].samples == rows3[0].samples);
    CHECK(rows1[0].value == rows3[0].value);
    // stopped well before the full 64 frames
    CHECK(rows1[0].samples < 64LL * 256 * 15);
}

TEST_CASE("sweep") {
    ScenarioConfig cfg = small_iid();
    cfg.ofdm = OfdmNumerology(64, 4, 30e3, 8);
    cfg.trials = 4;
    cfg.experiment = Experiment::sinr;

    SECTION("power sweep preserves order and digest") {
        const std::vector<double> grid{-10, -5, 0, 5, 10, 15, 20};
        auto rows = sweep(cfg, "P_x", grid, 2);
        REQUIRE(rows.size() == 7);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(rows[i].px_dbw == Catch::Approx(grid[i]).margin(1e-12));
            CHECK(rows[i].config_digest == cfg.digest());
        }
    }
    SECTION("reruns are byte-identical") {
        auto a = sweep(cfg, "P_x", {-3, 3}, 1);
        auto b = sweep(cfg, "P_x", {-3, 3}, 2);
        CHECK(csv_table(a) == csv_table(b));
    }
    SECTION("element sweep increases the empirical SINR") {
        cfg.trials = 8;
        auto rows = sweep(cfg, "M", {32, 64, 128}, 2);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].value < rows[1].value);
        CHECK(rows[1].value < rows[2].value);
        CHECK(rows[0].m_total == 32);
        CHECK(rows[2].m_total == 128);
    }
    SECTION("unknown axis is rejected") {
        CHECK_THROWS_AS(sweep(cfg, "bananas", {1.0}, 1), std::invalid_argument);
    }
}
