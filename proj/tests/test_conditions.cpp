#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fbsde/conditions.hpp"
#include "fbsde/oracles.hpp"
#include "generators.hpp"

#include <cmath>

using namespace fbsde;
using testing::random_point;

namespace {

DerivativePoint scalar_point(double dz_b, double dy_b, double dx_sigma, double dy_sigma, double dz_f) {
    auto dp = DerivativePoint::zero({1, 1});
    dp.dz_b(0, 0) = dz_b;
    dp.dy_b(0) = dy_b;
    dp.dx_sigma(0) = dx_sigma;
    dp.dy_sigma(0, 0) = dy_sigma;
    dp.dz_f[0](0, 0) = dz_f;
    return dp;
}

const Vector one = Vector::Constant(1, 1.0);
const Vector minus_one = Vector::Constant(1, -1.0);

SamplePlan plan_for(const ProblemSpec& spec, std::uint64_t seed = 1) {
    return make_sample_plan(spec, -2.0, 2.0, 8, 32, 16, seed);
}

}  // namespace

TEST_CASE("lambda3 values") {
    const auto ex24 = scalar_point(0, -1, 0, 0, 0);
    CHECK(lambda3(ex24, one) == -1.0);
    CHECK(lambda3(ex24, minus_one) == 1.0);
    CHECK(lambda3(DerivativePoint::zero({3, 2}), Vector::Unit(3, 1)) == 0.0);
    CHECK(lambda3(scalar_point(1, 0, 2, 0, 0), one) == 2.0);
}

TEST_CASE("lambda4 values") {
    const auto ex24 = scalar_point(0, -1, 0, 0, 0);
    CHECK(lambda4(ex24, one) == 0.0);
    CHECK(lambda4(ex24, minus_one) == 0.0);
    CHECK(lambda4(scalar_point(1, 0, 0, -1, 0), one) == -2.0);
    CHECK(lambda4(DerivativePoint::zero({2, 2}), Vector::Unit(2, 0)) == 0.0);
}

TEST_CASE("functionals agree with index-by-index references") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 3;
        const int d = 1 + (trial / 3) % 3;
        const auto dp = random_point(rng, n, d);
        const Vector y = testing::unit(rng, n);
        const double l3 = testing::lambda3_reference(dp, y);
        const double l4 = testing::lambda4_reference(dp, y);
        CHECK(lambda3(dp, y) == doctest::Approx(l3).epsilon(1e-12).scale(10));
        CHECK(lambda4(dp, y) == doctest::Approx(l4).epsilon(1e-12).scale(10));
        CHECK(key_margin(dp, y, 0.7, 0.1) == doctest::Approx(-l4 - 0.7 * std::abs(l3) + 0.1).scale(10));
    }
}

TEST_CASE("lambda4 with dz_b = 0 vanishes whatever dy_sigma is") {
    std::mt19937_64 rng(4);
    auto dp = random_point(rng, 3, 2);
    dp.dz_b.setZero();
    CHECK(lambda4(dp, testing::unit(rng, 3)) == 0.0);
}

TEST_CASE("functional preconditions") {
    const auto dp = DerivativePoint::zero({2, 1});
    try {
        lambda3(dp, Vector::Constant(2, 1.0));
        FAIL("non-unit direction accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_argument);
    }
    try {
        lambda4(dp, Vector::Unit(3, 0));
        FAIL("wrong-length direction accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::dimension_mismatch);
    }
    auto broken = dp;
    broken.dz_f.pop_back();
    CHECK_THROWS_AS(lambda3(broken, Vector::Unit(2, 0)), Error);
    // Slightly off the sphere but within 1e-12 is accepted.
    CHECK_NOTHROW(lambda4(dp, Vector::Unit(2, 0) * (1.0 + 5e-13)));
}

TEST_CASE("the functionals work on long double") {
    auto dp = BasicDerivativePoint<long double>::zero({1, 1});
    dp.dz_b(0, 0) = 1;
    dp.dy_sigma(0, 0) = -1;
    dp.dy_b(0) = 3;
    Eigen::Matrix<long double, Eigen::Dynamic, 1> y(1);
    y << 1;
    CHECK(static_cast<double>(lambda4(dp, y)) == -2.0);
    CHECK(static_cast<double>(lambda3(dp, y)) == 3.0);
    CHECK(check_sufficient_1(dp, 0.5L));
}

TEST_CASE("key condition on problems") {
    SUBCASE("example 2.4 fails with margin -c at direction 1") {
        const auto spec = get_problem("example24").spec();
        for (double c : {0.01, 1.0, 5.0}) {
            const auto report = check_key_condition(spec, c, plan_for(spec));
            CHECK_FALSE(report.passed);
            CHECK(report.worst_margin == doctest::Approx(-c));
            CHECK(report.worst_point.direction(0) == 1.0);
            CHECK(report.mode == "exact");
        }
    }
    SUBCASE("zero derivatives pass with margin 0") {
        const auto spec = get_problem("zero").spec();
        const auto report = check_key_condition(spec, 3.0, plan_for(spec));
        CHECK(report.passed);
        CHECK(report.worst_margin == 0.0);
    }
    SUBCASE("linear point with dz_b = 1, dy_sigma = -1") {
        const auto spec = linear_problem(scalar_point(1, 0, 0, -1, 0), 1.0, 0.0);
        const auto report = check_key_condition(spec, 1.0, plan_for(spec));
        CHECK(report.passed);
        CHECK(report.worst_margin == doctest::Approx(2.0));
        CHECK(report.samples_evaluated == 2 * 8);
    }
    SUBCASE("slack raises the margin") {
        const auto spec = get_problem("example24").spec();
        const auto report = check_key_condition(spec, 1.0, plan_for(spec), 1.0);
        CHECK(report.passed);
        CHECK(report.worst_margin == doctest::Approx(0.0));
    }
    SUBCASE("c must be positive") {
        const auto spec = get_problem("zero").spec();
        CHECK_THROWS_AS(check_key_condition(spec, 0.0, plan_for(spec)), Error);
    }
}

TEST_CASE("sampled search finds a direction-specific violation") {
    // n = 3: Lambda^4 = 2 y* dz_b dy_sigma y with dz_b dy_sigma = diag(-1, -1, +1)
    // is positive only near the third axis, rotated so no coordinate direction hits it.
    auto dp = DerivativePoint::zero({3, 3});
    const Eigen::Matrix3d rotation =
        (Eigen::AngleAxisd(0.7, Eigen::Vector3d::UnitX()) * Eigen::AngleAxisd(0.4, Eigen::Vector3d::UnitY()))
            .toRotationMatrix();
    dp.dz_b = Matrix::Identity(3, 3);
    dp.dy_sigma = rotation * Eigen::Vector3d(-1, -1, 1).asDiagonal() * rotation.transpose();
    const auto report = check_key_condition_at(dp, 1.0, 0.0, 64, 64, 3);
    CHECK_FALSE(report.passed);
    CHECK(report.mode == "sampled");
    // The exact minimum is -Lambda^4 at the rotated third axis: -(3 - 1 + 2) = -4.
    CHECK(report.worst_margin < -3.0);
    CHECK(report.worst_margin >= -4.0 - 1e-9);
    CHECK(report.worst_point.direction.norm() == doctest::Approx(1.0));
}

TEST_CASE("checker is deterministic and passed matches the margin sign") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const auto dp = random_point(rng, 2, 2);
        const auto a = check_key_condition_at(dp, 0.5, 0.0, 40, 20, 9);
        const auto b = check_key_condition_at(dp, 0.5, 0.0, 40, 20, 9);
        CHECK(a.worst_margin == b.worst_margin);
        CHECK(a.passed == (a.worst_margin >= 0.0));
    }
}

TEST_CASE("sample plan invariants") {
    const auto spec = get_problem("linear_constant").spec();
    SamplePlan plan = make_sample_plan(spec, -1, 1, 4, 1, 0, 5);
    CHECK(plan.state_points.size() == 4);
    CHECK_THROWS_AS(check_key_condition(spec, 1.0, plan), Error);
    CHECK_THROWS_AS(make_sample_plan(spec, -1, 1, 0, 8, 0, 5), Error);
}

TEST_CASE("sufficient condition 1") {
    CHECK(check_sufficient_1(scalar_point(1, 0, 0, -1, 0), 0.5));
    CHECK_FALSE(check_sufficient_1(DerivativePoint::zero({2, 2}), 0.1));
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        auto dp = random_point(rng, 2, 1);
        dp.dy_sigma.setZero();
        CHECK_FALSE(check_sufficient_1(dp, 1e-3));
    }
}

TEST_CASE("sufficient condition 2") {
    std::mt19937_64 rng(9);
    auto decoupled = random_point(rng, 2, 2);
    decoupled.dy_sigma.setZero();
    decoupled.dy_b.setZero();
    decoupled.dz_b.setZero();
    CHECK(check_sufficient_2(decoupled));

    auto no_z = random_point(rng, 2, 2);
    for (auto& f : no_z.dz_f) f.setZero();
    no_z.dy_b.setZero();
    no_z.dz_b.setZero();
    CHECK(check_sufficient_2(no_z));

    auto coupled = no_z;
    coupled.dz_b(0, 1) = 0.3;
    CHECK_FALSE(check_sufficient_2(coupled));

    auto tiny = no_z;
    tiny.dy_b(0) = 1e-12;
    CHECK(check_sufficient_2(tiny));
    CHECK_FALSE(check_sufficient_2(tiny, 0.0));
}

TEST_CASE("sufficient condition 3") {
    CHECK(check_sufficient_3(scalar_point(1, 0, 0, -1, 0), 1.0));
    CHECK(check_sufficient_3(DerivativePoint::zero({1, 1}), 1.0));
    CHECK_FALSE(check_sufficient_3(scalar_point(0, -1, 0, 0, 0), 1.0));
    try {
        check_sufficient_3(DerivativePoint::zero({2, 1}), 1.0);
        FAIL("n = 2 accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::wrong_dimension);
    }
}

TEST_CASE("sufficient conditions imply the key condition") {
    std::mt19937_64 rng(31);
    SUBCASE("the second, with any c") {
        for (int trial = 0; trial < 200; ++trial) {
            const auto dp = testing::satisfying_sufficient_2(rng, 1 + trial % 3, 1 + trial % 2);
            REQUIRE(check_sufficient_2(dp));
            CHECK(check_key_condition_at(dp, 0.1 + trial, 0.0, 24, 8, trial).passed);
        }
    }
    SUBCASE("the third, with the same c") {
        for (int trial = 0; trial < 200; ++trial) {
            const double c = 0.2 + 0.05 * trial;
            const auto dp = testing::satisfying_sufficient_3(rng, 1 + trial % 3, c);
            CHECK(check_key_condition_at(dp, c, 0.0, 2, 0, trial).passed);
        }
    }
    SUBCASE("the first bounds Lambda^4 by -c") {
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 1 + trial % 2;
            const auto dp = testing::satisfying_sufficient_1(rng, n, n + trial % 2, 0.5);
            for (int k = 0; k < 10; ++k) CHECK(lambda4(dp, testing::unit(rng, n)) <= -0.5 + 1e-9);
        }
    }
}

TEST_CASE("kbar0") {
    CHECK(kbar0(0, 1, 0) == 0.0);
    CHECK(kbar0(1, 1, 1) == doctest::Approx(std::sqrt(2 * std::exp(1.0) - 1)));
    CHECK(kbar0(1, 1, 1) == doctest::Approx(2.1063).epsilon(1e-4));
    CHECK(kbar0(1, 1, 2) > kbar0(1, 1, 1));
}

TEST_CASE("lipschitz schedule") {
    const auto s = lipschitz_schedule(0, 0.7, 1, 1);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == 0.0);
    CHECK(s[1] == doctest::Approx(std::exp(0.7) - 1));

    for (int m : {1, 2, 5, 17}) {
        const auto sched = lipschitz_schedule(1.3, 0.9, 2.5, m);
        REQUIRE(sched.size() == static_cast<std::size_t>(m + 1));
        CHECK(sched.front() == doctest::Approx(1.69).epsilon(1e-14));
        CHECK(std::abs(sched.back() - std::pow(kbar0(1.3, 0.9, 2.5), 2)) <= 1e-12);
        for (int i = 1; i <= m; ++i) CHECK(sched[i] >= sched[i - 1]);
    }
    CHECK_THROWS_AS(lipschitz_schedule(1, 1, 1, 0), Error);
}

TEST_CASE("sufficient reports over a plan") {
    const auto ex = get_problem("coupled_s3").spec();
    const auto plan = plan_for(ex);
    const auto r3 = check_sufficient_3_over(ex, 1.0, plan);
    CHECK(r3.applicable);
    CHECK(r3.passed);
    CHECK(r3.points_evaluated == 8);
    const auto r2 = check_sufficient_2_over(ex, plan);
    CHECK_FALSE(r2.passed);
    CHECK(r2.first_failure == 0);

    auto wide = linear_problem(DerivativePoint::zero({2, 2}), 1.0, 0.0);
    const auto na = check_sufficient_3_over(wide, 1.0, make_sample_plan(wide, -1, 1, 2, 8, 0, 1));
    CHECK_FALSE(na.applicable);
}
