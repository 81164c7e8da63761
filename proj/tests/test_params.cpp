#include <catch2/catch.hpp>

#include <cmath>

#include "qsim/epoch_params.hpp"

using namespace qsim;

// Golden constants evaluated independently (spreadsheet/REPL) from the
// closed-form parameter definitions.
TEST_CASE("theoretical parameters reproduce golden constants") {
    SECTION("unit system: eps=1, delta=0.5, N=K=1") {
        auto p = compute_theoretical_params(1.0, 0.5, 1, 1);
        REQUIRE(p.xi == Approx(3.125e-4).epsilon(1e-12));
        REQUIRE(p.check_period == 24);
        REQUIRE(p.converge_len == 2376);
        REQUIRE(p.epoch_len == 78408);
        REQUIRE(p.price_step == Approx(1.0 / 16.0));
    }
    SECTION("4x4 benchmark setting: eps=0.25, delta=0.1875") {
        auto p = compute_theoretical_params(0.25, 0.1875, 4, 4);
        REQUIRE(p.check_period == 148);
        REQUIRE(p.converge_len == 1262720);
        REQUIRE(p.epoch_len == 162890880);
    }
    SECTION("8x8 benchmark setting: eps=0.3125, delta=0.4") {
        auto p = compute_theoretical_params(0.3125, 0.4, 8, 8);
        REQUIRE(p.check_period == 67);
        REQUIRE(p.converge_len == 1711538);
        REQUIRE(p.epoch_len == 176973030);
    }
}

TEST_CASE("tuned parameters reproduce golden constants") {
    SECTION("unit system") {
        auto p = compute_tuned_params(1.0, 0.5, 1, 1);
        REQUIRE(p.check_period == 24);
        REQUIRE(p.converge_len == 6);
        REQUIRE(p.epoch_len == 12);
        REQUIRE(p.price_step == Approx(0.5));
    }
    SECTION("4x4 benchmark setting") {
        auto p = compute_tuned_params(0.25, 0.1875, 4, 4);
        REQUIRE(p.check_period == 148);
        REQUIRE(p.converge_len == 3189);
        REQUIRE(p.epoch_len == 25512);
        REQUIRE(p.price_step == Approx(0.125));
    }
    SECTION("8x8 benchmark setting") {
        auto p = compute_tuned_params(0.3125, 0.4, 8, 8);
        REQUIRE(p.check_period == 67);
        REQUIRE(p.converge_len == 4323);
        REQUIRE(p.epoch_len == 27668);
    }
    SECTION("tuned converge window never exceeds the theoretical one") {
        for (double eps : {0.25, 0.5, 1.0})
            for (double delta : {0.2, 0.5, 0.8})
                for (int n : {1, 4, 16})
                    for (int k : {1, 4, 8}) {
                        auto th = compute_theoretical_params(eps, delta, n, k);
                        auto tu = compute_tuned_params(eps, delta, n, k);
                        REQUIRE(tu.converge_len <= th.converge_len);
                        REQUIRE(tu.check_period == th.check_period);
                    }
    }
}

TEST_CASE("checking period satisfies its defining decay inequality") {
    // T_c must be long enough that T_c (1-delta)^{T_c} <= xi.
    for (double eps : {0.25, 0.3125, 0.5, 1.0})
        for (double delta : {0.1, 0.1875, 0.4, 0.7, 0.95})
            for (int n : {1, 2, 8, 64})
                for (int k : {1, 4, 8}) {
                    auto p = compute_theoretical_params(eps, delta, n, k);
                    double tc = static_cast<double>(p.check_period);
                    REQUIRE(tc * std::pow(1.0 - delta, tc) <= p.xi);
                }
}

TEST_CASE("structural invariants and limits") {
    SECTION("floor of 3 on the checking period as delta approaches 1") {
        auto p = compute_theoretical_params(1.0, 0.999, 1, 1);
        REQUIRE(p.check_period == 3);
    }
    SECTION("windows ordered and positive") {
        for (double eps : {0.25, 1.0})
            for (double delta : {0.2, 0.6}) {
                auto p = compute_theoretical_params(eps, delta, 4, 4);
                REQUIRE(p.check_period >= 3);
                REQUIRE(p.converge_len >= p.check_period);
                REQUIRE(p.epoch_len > p.converge_len);
                // L covers at least (32/eps) converge windows
                REQUIRE(static_cast<double>(p.epoch_len) >=
                        32.0 / eps * static_cast<double>(p.converge_len));
                auto tu = compute_tuned_params(eps, delta, 4, 4);
                REQUIRE(static_cast<double>(tu.epoch_len) >=
                        2.0 / eps * static_cast<double>(tu.converge_len));
            }
    }
    SECTION("shrinking eps never shrinks any window") {
        auto coarse = compute_theoretical_params(0.8, 0.3, 6, 5);
        auto fine = compute_theoretical_params(0.3, 0.3, 6, 5);
        REQUIRE(fine.check_period >= coarse.check_period);
        REQUIRE(fine.converge_len >= coarse.converge_len);
        REQUIRE(fine.epoch_len >= coarse.epoch_len);
    }
    SECTION("degenerate rate floors are rejected") {
        REQUIRE_THROWS_AS(compute_theoretical_params(1.0, 0.0, 1, 1), std::invalid_argument);
        REQUIRE_THROWS_AS(compute_theoretical_params(1.0, 1.0, 1, 1), std::invalid_argument);
        REQUIRE_THROWS_AS(compute_tuned_params(0.0, 0.5, 1, 1), std::invalid_argument);
        REQUIRE_THROWS_AS(compute_tuned_params(1.5, 0.5, 1, 1), std::invalid_argument);
    }
    SECTION("epoch arithmetic helpers") {
        auto p = compute_tuned_params(1.0, 0.5, 1, 1);  // L = 12, Ts = 6
        REQUIRE(p.epoch_start(1) == 1);
        REQUIRE(p.epoch_start(12) == 1);
        REQUIRE(p.epoch_start(13) == 13);
        REQUIRE(p.epoch_index(13) == 2);
        REQUIRE(p.in_converge_window(6));
        REQUIRE_FALSE(p.in_converge_window(7));
    }
}
