#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "rislink/surface.hpp"

using namespace rislink;

TEST_CASE("random schedule: unit modulus, zero mean, deterministic") {
    Rng rng(100);
    PhaseSchedule s = random_schedule(1000, 1000, rng);
    cplx mean = 0.0;
    for (int n = 0; n < s.symbols(); ++n)
        for (int m = 0; m < s.elements(); ++m) {
            CHECK(std::abs(std::abs(s.coefficients(n, m)) - 1.0) < 1e-12);
            mean += s.coefficients(n, m);
        }
    mean /= static_cast<double>(s.coefficients.size());
    CHECK(std::abs(mean) < 0.005);

    Rng r1(55), r2(55);
    PhaseSchedule a = random_schedule(16, 5, r1);
    PhaseSchedule b = random_schedule(16, 5, r2);
    CHECK((a.coefficients - b.coefficients).norm() == 0.0);
}

TEST_CASE("static schedule repeats one configuration") {
    Rng rng(4);
    PhaseSchedule s = static_random_schedule(12, 7, rng);
    for (int n = 1; n < 7; ++n) CHECK((s.coefficients.row(n) - s.coefficients.row(0)).norm() == 0.0);
}

TEST_CASE("training schedule is the orthogonal DFT sounding pattern") {
    SECTION("single element") {
        PhaseSchedule s = training_schedule(1);
        CHECK(std::abs(s.coefficients(0, 0) - cplx(1.0, 0.0)) < 1e-15);
    }
    SECTION("rows 0 and 1 of the 4-element pattern are orthogonal") {
        PhaseSchedule s = training_schedule(4);
        const cplx ip = oracle::dot_loop(s.coefficients.row(0).transpose(), s.coefficients.row(1).transpose());
        CHECK(std::abs(ip) < 1e-12);
    }
    SECTION("Gram matrix equals M times identity") {
        PhaseSchedule s = training_schedule(8);
        MatrixC gram = s.coefficients * s.coefficients.adjoint();
        CHECK((gram - 8.0 * MatrixC::Identity(8, 8)).norm() < 1e-10);
    }
    SECTION("mutual orthogonality across all row pairs") {
        PhaseSchedule s = training_schedule(16);
        for (int i = 0; i < 16; ++i)
            for (int j = i + 1; j < 16; ++j) {
                const VectorC a = s.coefficients.row(i).transpose();
                const VectorC b = s.coefficients.row(j).transpose();
                CHECK(std::abs(a.dot(b)) < 1e-10);
            }
    }
}

TEST_CASE("phase optimizer") {
    SECTION("single element is canonical") {
        std::vector<MatrixC> c(3);
        Rng rng(1);
        double energy = 0.0;
        for (auto& ck : c) {
            ck = gen_iid_matrix(2, 1, 1.0, rng);
            energy += ck.squaredNorm();
        }
        PhaseOptimum opt = optimize_phases(c, 3);
        CHECK(std::abs(opt.phases[0] - cplx(1.0, 0.0)) < 1e-12);
        CHECK(opt.objective_per_sweep.back() == Catch::Approx(energy).epsilon(1e-12));
    }

    SECTION("two scalar terms align to the grid-search optimum") {
        std::vector<MatrixC> c(1);
        c[0] = MatrixC(1, 2);
        c[0] << cplx(1.0, 0.0), cplx(0.0, 1.0);
        PhaseOptimum opt = optimize_phases(c, 2);
        const double grid_best = oracle::two_element_grid_max(cplx(1.0, 0.0), cplx(0.0, 1.0));
        CHECK(grid_best == Catch::Approx(4.0).margin(1e-4));  // |1| + |j| aligned -> 2, squared -> 4
        CHECK(opt.objective_per_sweep.back() >= grid_best - 1e-4);
        // converged within the first two sweeps
        CHECK(opt.objective_per_sweep[1] == Catch::Approx(opt.objective_per_sweep[0]).epsilon(1e-12));
        const cplx combined = opt.phases[0] * cplx(1.0, 0.0) + opt.phases[1] * cplx(0.0, 1.0);
        CHECK(std::abs(combined) == Catch::Approx(2.0).margin(1e-9));
    }

    SECTION("objective is non-decreasing sweep over sweep") {
        Rng rng(17);
        std::vector<MatrixC> c(4);
        for (auto& ck : c) ck = gen_iid_matrix(2, 3, 1.0, rng);
        PhaseOptimum opt = optimize_phases(c, 8);
        for (std::size_t i = 1; i < opt.objective_per_sweep.size(); ++i)
            CHECK(opt.objective_per_sweep[i] >= opt.objective_per_sweep[i - 1] * (1.0 - 1e-12));
    }

    SECTION("beats a random configuration on almost every instance") {
        Rng rng(23);
        int wins = 0;
        double opt_sum = 0.0, rand_sum = 0.0;
        for (int it = 0; it < 100; ++it) {
            std::vector<MatrixC> c(2);
            for (auto& ck : c) ck = gen_iid_matrix(2, 8, 1.0, rng);
            PhaseOptimum opt = optimize_phases(c, 5);
            VectorC psi_rand(8);
            for (int m = 0; m < 8; ++m) psi_rand[m] = rng.unit_phasor();
            double rand_obj = 0.0;
            for (const auto& ck : c) rand_obj += (ck * psi_rand).squaredNorm();
            opt_sum += opt.objective_per_sweep.back();
            rand_sum += rand_obj;
            if (opt.objective_per_sweep.back() >= rand_obj) ++wins;
        }
        CHECK(wins >= 95);
        CHECK(opt_sum > rand_sum);
    }

    SECTION("degenerate input is rejected") {
        std::vector<MatrixC> c(2);
        for (auto& ck : c) ck = MatrixC::Zero(2, 3);
        CHECK_THROWS_AS(optimize_phases(c, 3), std::invalid_argument);
        CHECK_THROWS_AS(optimize_phases({}, 3), std::invalid_argument);
    }

    SECTION("schedule wrapper repeats the configuration") {
        Rng rng(2);
        std::vector<MatrixC> c(2);
        for (auto& ck : c) ck = gen_iid_matrix(2, 4, 1.0, rng);
        PhaseSchedule s = optimize_schedule_cds(c, 4, 6);
        CHECK(s.symbols() == 6);
        for (int n = 1; n < 6; ++n) CHECK((s.coefficients.row(n) - s.coefficients.row(0)).norm() == 0.0);
        for (int m = 0; m < 4; ++m) CHECK(std::abs(std::abs(s.coefficients(0, m)) - 1.0) < 1e-12);
    }
}
