#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "toktrans/simplex.hpp"

using namespace toktrans;

TEST_CASE("sparsemax worked examples against the brute-force QP oracle") {
    {
        std::vector<double> z{1, 0};
        auto r = sparsemax(z, {1.0});
        CHECK(r.p[0] == doctest::Approx(1.0));
        CHECK(r.p[1] == doctest::Approx(0.0));
        CHECK(r.tau == doctest::Approx(0.0));
        CHECK(r.support.size() == 1);
        CHECK(oracles::rel_err(r.p, oracles::sparsemax_bruteforce(z, 1.0)) <= 1e-12);
    }
    {
        std::vector<double> z{0.5, 0.5};
        auto r = sparsemax(z, {1.0});
        CHECK(r.p[0] == doctest::Approx(0.5));
        CHECK(r.p[1] == doctest::Approx(0.5));
        CHECK(r.tau == doctest::Approx(0.0));
        CHECK(r.support.size() == 2);
    }
    {
        std::vector<double> z{2, 0, 0};
        auto r = sparsemax(z, {1.0});
        CHECK(r.p[0] == doctest::Approx(1.0));
        CHECK(r.tau == doctest::Approx(1.0));
        CHECK(r.support.size() == 1);
        CHECK(oracles::rel_err(r.p, oracles::sparsemax_bruteforce(z, 1.0)) <= 1e-12);
    }
    {
        std::vector<double> z{0.3, 0.2, 0.1};
        auto r = sparsemax(z, {0.5});
        CHECK(r.p[0] == doctest::Approx(0.8 / 3.0).epsilon(1e-9));
        CHECK(r.p[1] == doctest::Approx(0.5 / 3.0).epsilon(1e-9));
        CHECK(r.p[2] == doctest::Approx(0.2 / 3.0).epsilon(1e-9));
        CHECK(r.tau == doctest::Approx(0.1 / 3.0).epsilon(1e-9));
        CHECK(oracles::rel_err(r.p, oracles::sparsemax_bruteforce(z, 0.5)) <= 1e-10);
    }
}

TEST_CASE("sparsemax error conditions") {
    CHECK_THROWS_AS(sparsemax(std::vector<double>{}, {1.0}), ConfigError);
    CHECK_THROWS_AS(sparsemax(std::vector<double>{1.0}, {0.0}), ConfigError);
    CHECK_THROWS_AS(sparsemax(std::vector<double>{1.0, NAN}, {1.0}), NumericalError);
}

TEST_CASE("sparsemax oracle equivalence on random instances") {
    Rng rng(101);
    std::normal_distribution<double> zd(0.0, 1.0);
    std::uniform_real_distribution<double> ad(0.05, 3.0);
    std::uniform_int_distribution<std::size_t> kd(1, 8);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t K = kd(rng);
        std::vector<double> z(K);
        for (auto& x : z) x = zd(rng);
        double alpha = ad(rng);
        auto r = sparsemax(z, {alpha});
        auto want = oracles::sparsemax_bruteforce(z, alpha);
        double sum = 0.0;
        double max_err = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            sum += r.p[i];
            max_err = std::max(max_err, std::abs(r.p[i] - want[i]));
        }
        CHECK(max_err <= 1e-8);
        CHECK(sum == doctest::Approx(alpha).epsilon(1e-12));
    }
}

TEST_CASE("sparsemax idempotence and shift invariance") {
    Rng rng(103);
    std::normal_distribution<double> zd(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> z(6);
        for (auto& x : z) x = zd(rng);
        double alpha = 0.7;
        auto r = sparsemax(z, {alpha});
        auto r2 = sparsemax(r.p, {alpha});
        CHECK(oracles::rel_err(r2.p, r.p) <= 1e-12);

        std::vector<double> shifted(z);
        for (auto& x : shifted) x += 3.21;
        auto rs = sparsemax(shifted, {alpha});
        CHECK(oracles::rel_err(rs.p, r.p) <= 1e-9);
    }
}

TEST_CASE("sparsemax_vjp closed-form cases") {
    {
        // full support, constant upstream -> zero gradient
        auto r = sparsemax(std::vector<double>{0.1, 0.2, 0.3}, {2.0});
        CHECK(r.support.size() == 3);
        auto g = sparsemax_vjp(r, std::vector<double>{5.0, 5.0, 5.0});
        for (double x : g) CHECK(x == doctest::Approx(0.0));
    }
    {
        // singleton support -> zero Jacobian
        auto r = sparsemax(std::vector<double>{10.0, 0.0, 0.0}, {1.0});
        REQUIRE(r.support == std::vector<std::size_t>{0});
        auto g = sparsemax_vjp(r, std::vector<double>{1.0, 2.0, 3.0});
        for (double x : g) CHECK(x == doctest::Approx(0.0));
    }
    CHECK_THROWS_AS(sparsemax_vjp(sparsemax(std::vector<double>{1.0, 0.0}, {1.0}),
                                  std::vector<double>{1.0}),
                    ConfigError);
}

TEST_CASE("sparsemax_vjp matches finite differences on stable supports") {
    Rng rng(107);
    std::normal_distribution<double> zd(0.0, 1.0);
    std::normal_distribution<double> ud(0.0, 1.0);
    int checked = 0;
    for (int trial = 0; trial < 100 && checked < 40; ++trial) {
        std::vector<double> z(7);
        for (auto& x : z) x = zd(rng);
        double alpha = 1.0;
        auto r = sparsemax(z, {alpha});
        // condition on support stability under +-1e-7 perturbations
        bool stable = true;
        for (std::size_t i = 0; i < z.size() && stable; ++i) {
            for (double d : {1e-7, -1e-7}) {
                auto zq = z;
                zq[i] += d;
                if (sparsemax(zq, {alpha}).support != r.support) stable = false;
            }
        }
        if (!stable) continue;
        ++checked;
        std::vector<double> upstream(z.size());
        for (auto& x : upstream) x = ud(rng);
        auto got = sparsemax_vjp(r, upstream);
        auto fd = oracles::finite_diff(
            [&](const std::vector<double>& x) {
                auto p = sparsemax(x, {alpha}).p;
                double s = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) s += upstream[i] * p[i];
                return s;
            },
            z, 1e-7);
        CHECK(oracles::rel_err(got, fd) <= 1e-6);
    }
    CHECK(checked >= 20);
}

TEST_CASE("softmax_scaled basics and positivity") {
    auto r = softmax_scaled(std::vector<double>{0.0, 0.0}, {1.0});
    CHECK(r[0] == doctest::Approx(0.5));
    CHECK(r[1] == doctest::Approx(0.5));

    auto r4 = softmax_scaled(std::vector<double>{0, 0, 0, 0}, {0.2});
    for (double x : r4) CHECK(x == doctest::Approx(0.05));

    Rng rng(109);
    std::normal_distribution<double> zd(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> z(9);
        for (auto& x : z) x = zd(rng);
        double alpha = 0.37;
        auto s = softmax_scaled(z, {alpha});
        double sum = 0.0;
        for (double x : s) {
            CHECK(x > 0.0);
            sum += x;
        }
        CHECK(sum == doctest::Approx(alpha).epsilon(1e-12));
        // sparsity ordering: sparsemax has at least as many zeros as softmax
        auto sp = sparsemax(z, {alpha});
        std::size_t zeros_sp = 0, zeros_soft = 0;
        for (double x : sp.p) zeros_sp += (x == 0.0);
        for (double x : s) zeros_soft += (x == 0.0);
        CHECK(zeros_sp >= zeros_soft);
        CHECK(zeros_soft == 0);
    }
    CHECK_THROWS_AS(softmax_scaled(std::vector<double>{1.0, INFINITY}, {1.0}), NumericalError);
}
