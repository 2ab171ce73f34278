#include <catch2/catch_amalgamated.hpp>

#include "rislink/analysis.hpp"
#include "rislink/rng.hpp"

using namespace rislink;

TEST_CASE("closed-form moments") {
    SECTION("unit parameters, single antenna and element") {
        const MomentSet ms = moments_closed_form(1, 1, 1.0, 1.0, 1.0, 1.0);
        CHECK(ms.m_sI1 == 1.0);
        CHECK(ms.m_I1 == 4.0);
        CHECK(ms.m_I2 == 1.0);
        CHECK(ms.m_I3 == 1.0);
        CHECK(ms.m_I4 == 1.0);
    }
    SECTION("noise-free limit zeroes the noise moments") {
        const MomentSet ms = moments_closed_form(4, 16, 0.5, 2.0, 0.0, 3.0);
        CHECK(ms.m_I2 == 0.0);
        CHECK(ms.m_I3 == 0.0);
        CHECK(ms.m_I4 == 0.0);
        CHECK(ms.m_sI1 > 0.0);
    }
    SECTION("cross-term symmetry holds for arbitrary inputs") {
        Rng rng(70);
        for (int it = 0; it < 50; ++it) {
            const MomentSet ms =
                moments_closed_form(1 + rng.uniform_int(16), 1 + rng.uniform_int(256),
                                    rng.uniform(1e-6, 1.0), rng.uniform(1e-6, 1.0),
                                    rng.uniform(0.0, 1.0), rng.uniform(1e-3, 1e3));
            CHECK(ms.m_I2 == ms.m_I3);
        }
    }
}

TEST_CASE("closed-form SINR") {
    SECTION("high-power limit") {
        const double rho = sinr_ncds(4, 64, 1.0, 1.0, 1e-300, 1.0);
        CHECK(rho == Catch::Approx(3.710144927536232).epsilon(1e-9));
    }
    SECTION("hand-substituted unit case") {
        CHECK(sinr_ncds(1, 1, 1.0, 1.0, 1.0, 1.0) == Catch::Approx(1.0 / 6.0).epsilon(1e-15));
    }
    SECTION("doubling the element count strictly helps") {
        for (double px : {0.01, 1.0, 100.0})
            for (int m : {1, 2, 8, 64, 256})
                CHECK(sinr_ncds(4, 2 * m, 1e-4, 1e-6, 1e-9, px) > sinr_ncds(4, m, 1e-4, 1e-6, 1e-9, px));
    }
    SECTION("monotone in power and antennas") {
        double prev = 0.0;
        for (double px_db = -20.0; px_db <= 30.0; px_db += 2.0) {
            const double rho = sinr_ncds(4, 64, 1e-4, 1e-6, 1e-9, db_to_linear(px_db));
            CHECK(rho > prev);
            prev = rho;
        }
        for (int b = 1; b < 64; b *= 2)
            CHECK(sinr_ncds(2 * b, 64, 1e-4, 1e-6, 1e-9, 1.0) > sinr_ncds(b, 64, 1e-4, 1e-6, 1e-9, 1.0));
    }
    SECTION("algebraic identity with the moment set") {
        Rng rng(71);
        for (int it = 0; it < 1000; ++it) {
            const int b = 1 + rng.uniform_int(512);
            const int m = 1 + rng.uniform_int(512);
            const double sh2 = std::pow(10.0, rng.uniform(-8.0, 1.0));
            const double sg2 = std::pow(10.0, rng.uniform(-8.0, 1.0));
            const double sv2 = std::pow(10.0, rng.uniform(-12.0, 0.0));
            const double px = std::pow(10.0, rng.uniform(-3.0, 3.0));
            const double direct = sinr_ncds(b, m, sh2, sg2, sv2, px);
            const double rebuilt =
                sinr_from_moments(b, m, sh2, sg2, px, moments_closed_form(b, m, sh2, sg2, sv2, px));
            REQUIRE(std::abs(direct - rebuilt) <= 1e-12 * direct);
        }
    }
}

TEST_CASE("coherence time in OFDM symbols") {
    SECTION("definitional unity point") {
        const double fd = 30e3 * 0.423 * 1024.0 / 1096.0;
        CHECK(coherence_symbols(fd, 30e3, 1024, 72) == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("3 km/h at 3.5 GHz") {
        const double fd = (3.0 / 3.6) * 3.5e9 / 3.0e8;
        CHECK(coherence_symbols(fd, 30e3, 1024, 72, 1.0) ==
              Catch::Approx(1219.5103232533888).epsilon(1e-12));
        CHECK(coherence_symbols(fd, 30e3, 1024, 72, 0.5) ==
              Catch::Approx(609.7551616266944).epsilon(1e-12));
        // back-solved from the published 3 km/h efficiency at M = 32
        CHECK(coherence_symbols(fd, 30e3, 1024, 72, 0.5) == Catch::Approx(32.0 / (1.0 - 0.9475)).margin(1.0));
    }
    SECTION("static channel is unbounded") {
        CHECK(std::isinf(coherence_symbols(0.0, 30e3, 1024, 72)));
    }
}

TEST_CASE("efficiency factor") {
    SECTION("published spot values") {
        CHECK(efficiency_factor(32, 609.7551616266944) == Catch::Approx(0.9475).margin(3e-4));
        CHECK(efficiency_factor(64, 91.46327424400417) == Catch::Approx(0.2967).margin(5e-4));
        CHECK(efficiency_factor(512, 182.92654848800834) == 0.0);
    }
    SECTION("range and monotonicity") {
        for (double nc : {10.0, 91.46, 609.76, 1e4}) {
            double prev = 1.0;
            for (int m = 1; m <= 1024; m *= 2) {
                const double eta = efficiency_factor(m, nc);
                CHECK(eta >= 0.0);
                CHECK(eta <= 1.0);
                CHECK(eta <= prev);
                prev = eta;
            }
        }
    }
    SECTION("overhead ratio identity within one coherence block") {
        const double nc = 609.7551616266944;
        const double m1 = 32, m2 = 128;
        const double lhs = (1.0 - efficiency_factor(32, nc)) / (1.0 - efficiency_factor(128, nc));
        CHECK(lhs == Catch::Approx(m1 / m2).epsilon(1e-12));
    }
    SECTION("unbounded coherence gives full efficiency") {
        CHECK(efficiency_factor(512, std::numeric_limits<double>::infinity()) == 1.0);
    }
}

TEST_CASE("complexity counts") {
    SECTION("published spot values") {
        const ComplexityCounts c = complexity_counts(4, 64, 1024, 5);
        CHECK(c.cds_products == 4096);
        CHECK(c.ncds_products == 5115);
        CHECK(c.cds_opt_order == 5ull * (4 * 4 * 4 + 64) * 1024);
    }
    SECTION("single subcarrier has no differential pairs") {
        CHECK(complexity_counts(4, 64, 1, 5).ncds_products == 0);
    }
    SECTION("rejects non-positive parameters") {
        CHECK_THROWS_AS(complexity_counts(0, 1, 1, 1), std::invalid_argument);
    }
}
