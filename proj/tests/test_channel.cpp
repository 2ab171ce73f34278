#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "rislink/analysis.hpp"
#include "rislink/channel.hpp"

using namespace rislink;

namespace {
const OfdmNumerology kOfdm(1024, 72, 30e3, 140);
}

TEST_CASE("doppler autocorrelation basics") {
    const MobilityModel moving(123.0, 3.5e9);
    CHECK(doppler_autocorr(0, moving, kOfdm) == 1.0);

    const MobilityModel still(0.0, 3.5e9);
    CHECK(doppler_autocorr(100, still, kOfdm) == 1.0);

    for (int d : {1, 3, 17, 99})
        CHECK(doppler_autocorr(d, moving, kOfdm) == doppler_autocorr(-d, moving, kOfdm));
}

TEST_CASE("doppler autocorrelation hits the first Bessel zero") {
    // Choose fd so the lag-1 argument lands exactly on the first J0 root.
    const double root = 2.404825557695773;
    CHECK(std::abs(oracle::bessel_j0_series(root)) < 1e-12);  // oracle sanity
    const double fd = root * kOfdm.subcarrier_spacing /
                      (2.0 * std::numbers::pi * (1.0 + 72.0 / 1024.0));
    const MobilityModel mob(fd, 3.5e9);
    CHECK(doppler_autocorr(1, mob, kOfdm) == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("doppler autocorrelation matches the series oracle") {
    const MobilityModel mob(400.0, 3.5e9);
    for (int d = 0; d <= 30; ++d) {
        const double arg = doppler_arg(d, mob, kOfdm);
        REQUIRE(arg < 16.0);  // oracle validity range
        CHECK(doppler_autocorr(d, mob, kOfdm) ==
              Catch::Approx(std::abs(oracle::bessel_j0_series(arg))).margin(1e-9));
    }
}

TEST_CASE("IID first hop: second moment, determinism, invalid budget") {
    const ArrayGeometry bs(2, 2), rs(8, 8);
    const LinkBudget unit(1.0, 1.0, 1.0, 1.0);
    const OfdmNumerology ofdm(1024, 72, 30e3, 2);

    Rng rng(42);
    double acc = 0.0;
    long long n = 0;
    for (int rep = 0; rep < 4; ++rep) {
        ChannelRealization real = gen_bs_rs_iid(bs, rs, unit, ofdm, rng);
        for (const auto& h : real.bs_rs) {
            acc += h.squaredNorm();
            n += h.size();
        }
    }
    CHECK(acc / static_cast<double>(n) == Catch::Approx(1.0).margin(0.005));

    Rng r1(7), r2(7);
    ChannelRealization a = gen_bs_rs_iid(bs, rs, unit, ofdm, r1);
    ChannelRealization b = gen_bs_rs_iid(bs, rs, unit, ofdm, r2);
    for (std::size_t k = 0; k < a.bs_rs.size(); ++k)
        CHECK((a.bs_rs[k] - b.bs_rs[k]).norm() == 0.0);

    CHECK_THROWS_AS(LinkBudget(0.0, 1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("static second hop replicates one draw per element") {
    const ArrayGeometry rs(4, 4);
    const LinkBudget unit(1.0, 1.0, 1.0, 1.0);
    const OfdmNumerology ofdm(8, 2, 30e3, 24);
    const MobilityModel still(0.0, 3.5e9);
    Rng rng(3);
    ChannelRealization real = gen_rs_ue_correlated(rs, unit, ofdm, still, rng);
    for (const auto& g : real.rs_ue)
        for (int n = 1; n < g.cols(); ++n) CHECK((g.col(n) - g.col(0)).norm() == 0.0);
}

TEST_CASE("correlated second hop matches the Clarke autocorrelation") {
    const ArrayGeometry rs(8, 8);
    const LinkBudget budget(1.0, 1.0, 1.0, 1.0);
    // 320*64 = 20480 streams of length 140; the acceptance suite runs the
    // full-size version of this check.
    const OfdmNumerology ref(320, 22, 30e3, 140);
    const MobilityModel mob(100.0, 3.5e9);

    Rng rng(11);
    ChannelRealization real = gen_rs_ue_correlated(rs, budget, ref, mob, rng);

    double var_acc = 0.0;
    long long var_n = 0;
    std::complex<double> lag_acc[6] = {};
    long long lag_n[6] = {};
    for (const auto& g : real.rs_ue) {
        var_acc += g.squaredNorm();
        var_n += g.size();
        for (int m = 0; m < g.rows(); ++m)
            for (int lag = 1; lag <= 5; ++lag)
                for (int n = 0; n + lag < g.cols(); ++n) {
                    lag_acc[lag] += std::conj(g(m, n)) * g(m, n + lag);
                    ++lag_n[lag];
                }
    }
    CHECK(var_acc / static_cast<double>(var_n) == Catch::Approx(1.0).margin(0.01));
    for (int lag = 1; lag <= 5; ++lag) {
        const double est = std::abs(lag_acc[lag] / static_cast<double>(lag_n[lag]));
        CHECK(est == Catch::Approx(doppler_autocorr(lag, mob, ref)).margin(0.01));
    }
}

TEST_CASE("coloring matrix is a PSD square root of the Toeplitz correlation") {
    const MobilityModel mob(77.0, 3.5e9);
    const OfdmNumerology ofdm(1024, 72, 30e3, 40);
    const Eigen::MatrixXd s = temporal_coloring_sqrt(40, mob, ofdm);
    Eigen::MatrixXd toep(40, 40);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j) toep(i, j) = doppler_autocorr_signed(std::abs(i - j), mob, ofdm);
    CHECK((s * s.transpose() - toep).norm() < 1e-10);
}

TEST_CASE("cascade agrees with the summation oracle") {
    SECTION("single element identity") {
        MatrixC h(1, 1);
        h(0, 0) = 1.0;
        VectorC g = VectorC::Ones(1);
        Eigen::RowVectorXcd psi = Eigen::RowVectorXcd::Ones(1);
        CHECK(cascade_vec(h, g, psi)[0] == cplx(1.0, 0.0));
    }
    SECTION("coherent sum of 64 unit paths") {
        MatrixC h = MatrixC::Ones(3, 64);
        VectorC g = VectorC::Ones(64);
        Eigen::RowVectorXcd psi = Eigen::RowVectorXcd::Ones(64);
        VectorC q = cascade_vec(h, g, psi);
        for (int b = 0; b < 3; ++b) CHECK(std::abs(q[b] - cplx(64.0, 0.0)) < 1e-12);
    }
    SECTION("random instance vs triple loop") {
        Rng rng(5);
        MatrixC h = gen_iid_matrix(2, 3, 1.0, rng);
        VectorC g(3), psi(3);
        for (int i = 0; i < 3; ++i) g[i] = rng.cgauss(1.0);
        for (int i = 0; i < 3; ++i) psi[i] = rng.unit_phasor();
        VectorC fast = cascade_vec(h, g, psi.transpose());
        VectorC slow = oracle::cascade_loop(h, g, psi);
        CHECK((fast - slow).norm() < 1e-12 * slow.norm());
    }
    SECTION("dimension mismatch") {
        MatrixC h = MatrixC::Ones(2, 3);
        VectorC g = VectorC::Ones(4);
        Eigen::RowVectorXcd psi = Eigen::RowVectorXcd::Ones(3);
        CHECK_THROWS_AS(cascade_vec(h, g, psi), std::invalid_argument);
    }
}

TEST_CASE("URA response") {
    SECTION("broadside phases vanish") {
        VectorC u = ura_response(0.0, 90.0, ArrayGeometry(4, 2, 0.5, 0.5));
        for (int i = 0; i < u.size(); ++i) {
            CHECK(u[i].real() == Catch::Approx(1.0).margin(1e-12));
            CHECK(u[i].imag() == Catch::Approx(0.0).margin(1e-12));
        }
    }
    SECTION("degenerate single element") {
        VectorC u = ura_response(123.0, 45.0, ArrayGeometry(1, 1));
        CHECK(u.size() == 1);
        CHECK(std::abs(u[0] - cplx(1.0, 0.0)) < 1e-12);
    }
    SECTION("two-element phase at 30 degrees") {
        VectorC u = ura_response(30.0, 90.0, ArrayGeometry(2, 1, 0.5, 0.5));
        // pi * sin(30 deg) = pi/2
        CHECK(std::arg(u[1]) == Catch::Approx(1.5707963267948966).margin(1e-12));
    }
    SECTION("unit modulus everywhere") {
        VectorC u = ura_response(37.3, 112.9, ArrayGeometry(5, 3, 0.7, 0.4));
        for (int i = 0; i < u.size(); ++i) CHECK(std::abs(std::abs(u[i]) - 1.0) < 1e-12);
    }
}

namespace {

ClusterProfile test_profile(int clusters, double ds) {
    ClusterProfile p;
    p.cluster_count = clusters;
    p.delay_spread_s = ds;
    p.asd_deg = 7.0;
    p.asa_deg = 12.0;
    p.zsd_deg = 25.0;
    p.zsa_deg = 30.0;
    p.los_azimuth_dep_deg = 18.4;
    p.los_zenith_dep_deg = 122.3;
    p.los_azimuth_arr_deg = -161.6;
    p.los_zenith_arr_deg = 57.7;
    return p;
}

}  // namespace

TEST_CASE("cluster draw: powers normalized, invalid profiles rejected") {
    Rng rng(9);
    ClusterSet set = draw_clusters(test_profile(20, 1.5e-4), rng);
    double total = 0.0;
    for (double p : set.power) {
        CHECK(p >= 0.0);
        total += p;
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-12));

    ClusterProfile bad = test_profile(0, 1.5e-4);
    CHECK_THROWS_AS(draw_clusters(bad, rng), std::invalid_argument);
    bad = test_profile(4, 0.0);
    CHECK_THROWS_AS(draw_clusters(bad, rng), std::invalid_argument);
}

TEST_CASE("geometric channel: vanishing delay spread flattens the response") {
    const ArrayGeometry bs(2, 2), rs(4, 2);
    const LinkBudget budget(db_to_linear(-48.0), db_to_linear(-59.0), 1e-9, 1.0);
    const OfdmNumerology ofdm(64, 4, 30e3, 4);
    const MobilityModel still(0.0, 3.5e9);
    Rng rng(21);
    GeometricChannelDraw draw(bs, rs, budget, ofdm, still, test_profile(8, 1e-30),
                              test_profile(8, 1e-30), rng);
    const MatrixC h0 = draw.bs_rs_at(0);
    const MatrixC h_far = draw.bs_rs_at(63);
    CHECK((h0 - h_far).norm() < 1e-9 * h0.norm());
    const MatrixC g0 = draw.rs_ue_at(0);
    const MatrixC g_far = draw.rs_ue_at(63);
    CHECK((g0 - g_far).norm() < 1e-9 * g0.norm());
}

TEST_CASE("geometric channel: single cluster yields the analytic phase ramp") {
    const ArrayGeometry bs(2, 2), rs(4, 2);
    const LinkBudget budget(1.0, 1.0, 1e-9, 1.0);
    const OfdmNumerology ofdm(16, 1, 30e3, 4);
    const MobilityModel still(0.0, 3.5e9);
    Rng rng(33);
    GeometricChannelDraw draw(bs, rs, budget, ofdm, still, test_profile(1, 5e-8),
                              test_profile(1, 5e-8), rng);
    const double tau = draw.rs_ue_clusters().delay_s[0];
    const cplx expected = std::polar(1.0, -2.0 * std::numbers::pi * 30e3 * tau);
    for (int k = 0; k + 1 < 16; ++k) {
        const MatrixC a = draw.rs_ue_at(k);
        const MatrixC b = draw.rs_ue_at(k + 1);
        const cplx ratio = b(0, 0) / a(0, 0);
        CHECK(std::abs(ratio - expected) < 1e-9);
    }
}

TEST_CASE("geometric channel: second-hop power calibrated to the link gain") {
    const ArrayGeometry bs(1, 1), rs(4, 2);
    const double l_beta = db_to_linear(-59.0);
    const LinkBudget budget(db_to_linear(-48.0), l_beta, 1e-9, 1.0);
    const OfdmNumerology ofdm(4, 0, 30e3, 2);
    const MobilityModel mob(9.72, 3.5e9);
    Rng rng(1234);
    double acc = 0.0;
    long long n = 0;
    for (int rep = 0; rep < 20000; ++rep) {
        GeometricChannelDraw draw(bs, rs, budget, ofdm, mob, test_profile(20, 1.5e-4),
                                  test_profile(20, 1.5e-4), rng);
        for (int k = 0; k < 4; ++k) {
            const MatrixC g = draw.rs_ue_at(k);
            acc += g.squaredNorm();
            n += g.size();
        }
    }
    CHECK(acc / static_cast<double>(n) == Catch::Approx(l_beta).epsilon(0.02));
}

TEST_CASE("geometric realization matches the on-demand draw") {
    const ArrayGeometry bs(2, 1), rs(2, 2);
    const LinkBudget budget(1.0, 1.0, 1e-9, 1.0);
    const OfdmNumerology ofdm(8, 1, 30e3, 5);
    const MobilityModel mob(50.0, 3.5e9);
    Rng r1(8), r2(8);
    ChannelRealization real = gen_geometric_pair(bs, rs, budget, ofdm, mob, test_profile(6, 1e-7),
                                                 test_profile(6, 1e-7), r1);
    GeometricChannelDraw draw(bs, rs, budget, ofdm, mob, test_profile(6, 1e-7), test_profile(6, 1e-7),
                              r2);
    REQUIRE(real.bs_rs.size() == 8);
    for (int k = 0; k < 8; ++k) {
        CHECK((real.bs_rs[k] - draw.bs_rs_at(k)).norm() == 0.0);
        CHECK((real.rs_ue[k] - draw.rs_ue_at(k)).norm() == 0.0);
    }
}
