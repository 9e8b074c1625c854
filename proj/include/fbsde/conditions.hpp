#pragma once

#include "fbsde/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <vector>

namespace fbsde {

namespace detail {

template <typename Scalar, typename Derived>
void require_unit(const Eigen::MatrixBase<Derived>& y, Eigen::Index n) {
    if (y.size() != n) throw Error(ErrorKind::dimension_mismatch, "direction length differs from n");
    using std::abs;
    if (abs(y.norm() - Scalar(1)) > Scalar(1e-12))
        throw Error(ErrorKind::invalid_argument, "direction must have unit length");
}

}  // namespace detail

/// The first-order functional Lambda^3 at a unit direction y in R^n.
template <typename Scalar, typename Derived>
Scalar lambda3(const BasicDerivativePoint<Scalar>& dp, const Eigen::MatrixBase<Derived>& y) {
    dp.check_shapes();
    detail::require_unit<Scalar>(y, dp.dz_b.rows());
    Scalar sum(0);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const auto& dzf = dp.dz_f[static_cast<std::size_t>(i)];
        const Scalar trace = (dzf * dp.dz_b.transpose()).trace();
        const Scalar cross = y.dot(dp.dz_b * (dzf.transpose() * y));
        const Scalar diffusion = y.dot(dp.dy_sigma.transpose() * (dzf.transpose() * y));
        sum += y(i) * (trace - cross + diffusion);
    }
    return sum + dp.dx_sigma.dot(dp.dz_b.transpose() * y) + dp.dy_b.dot(y);
}

/// The second-order functional Lambda^4 at a unit direction y in R^n.
template <typename Scalar, typename Derived>
Scalar lambda4(const BasicDerivativePoint<Scalar>& dp, const Eigen::MatrixBase<Derived>& y) {
    dp.check_shapes();
    detail::require_unit<Scalar>(y, dp.dz_b.rows());
    return dp.dz_b.squaredNorm() - (dp.dz_b.transpose() * y).squaredNorm() +
           Scalar(2) * y.dot(dp.dz_b * (dp.dy_sigma * y));
}

/// Margin -Lambda^4 - c|Lambda^3| + epsilon; the key condition holds at y
/// when it is non-negative.
template <typename Scalar, typename Derived>
Scalar key_margin(const BasicDerivativePoint<Scalar>& dp, const Eigen::MatrixBase<Derived>& y, Scalar c,
                  Scalar epsilon) {
    using std::abs;
    return -lambda4(dp, y) - c * abs(lambda3(dp, y)) + epsilon;
}

/// dz_b dz_b* - dy_sigma* dz_b* - dz_b dy_sigma >= (|dz_b|^2 + c) Id.
template <typename Scalar>
bool check_sufficient_1(const BasicDerivativePoint<Scalar>& dp, Scalar c) {
    dp.check_shapes();
    using MatrixType = typename BasicDerivativePoint<Scalar>::MatrixType;
    const MatrixType s = dp.dz_b * dp.dz_b.transpose() - dp.dy_sigma.transpose() * dp.dz_b.transpose() -
                         dp.dz_b * dp.dy_sigma;
    const MatrixType sym = Scalar(0.5) * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixType> eig(sym, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() >= dp.dz_b.squaredNorm() + c;
}

/// dy_b = 0, dz_b = 0 and dy_sigma* (dz_f^i)* = 0 for every i, up to tol.
template <typename Scalar>
bool check_sufficient_2(const BasicDerivativePoint<Scalar>& dp, Scalar tol = Scalar(1e-10)) {
    dp.check_shapes();
    if (dp.dy_b.norm() > tol || dp.dz_b.norm() > tol) return false;
    for (const auto& dzf : dp.dz_f)
        if ((dp.dy_sigma.transpose() * dzf.transpose()).norm() > tol) return false;
    return true;
}

/// Scalar-Y condition -dz_b.dy_sigma >= c |dy_b + dz_f.dy_sigma + dz_b.dx_sigma|.
template <typename Scalar>
bool check_sufficient_3(const BasicDerivativePoint<Scalar>& dp, Scalar c) {
    dp.check_shapes();
    if (dp.dz_b.rows() != 1) throw Error(ErrorKind::wrong_dimension, "condition requires n = 1");
    using std::abs;
    const auto dz_b = dp.dz_b.row(0);
    const auto dy_sigma = dp.dy_sigma.col(0);
    const Scalar lhs = -dz_b.dot(dy_sigma);
    const Scalar rhs = dp.dy_b(0) + dp.dz_f[0].row(0).dot(dy_sigma) + dz_b.dot(dp.dx_sigma);
    return lhs >= c * abs(rhs);
}

/// sqrt([K0^2 + 1] exp(C_K T) - 1).
inline double kbar0(double K0, double C_K, double T) {
    return std::sqrt(std::max(0.0, (K0 * K0 + 1.0) * std::exp(C_K * T) - 1.0));
}

/// Squared Lipschitz bounds [K_0^2, K_1^2, ..., K_m^2] for the intermediate
/// terminal functions g_m, g_{m-1}, ..., g_0 on the partition T_i = iT/m.
std::vector<double> lipschitz_schedule(double K0, double C_K, double T, int m);

struct StatePoint {
    double t = 0.0;
    double x = 0.0;
    Vector y;
    Matrix z;
};

struct SamplePlan {
    std::vector<StatePoint> state_points;
    int sphere_samples = 64;
    int refine_iters = 32;
    std::uint64_t seed = 0;
};

/// State points at uniformly random (t, x) with standard normal (y, z).
SamplePlan make_sample_plan(const ProblemSpec& spec, double x_lo, double x_hi, int points, int sphere_samples,
                            int refine_iters, std::uint64_t seed);

struct WorstPoint {
    double t = 0.0;
    double x = 0.0;
    Vector y_state;
    Matrix z;
    Vector direction;
};

struct ConditionReport {
    bool passed = false;
    double c = 0.0;
    double epsilon = 0.0;
    double worst_margin = 0.0;
    WorstPoint worst_point;
    long samples_evaluated = 0;
    /// "exact" when n = 1 (the unit sphere is {-1, +1}), otherwise "sampled".
    std::string mode;
};

/// Key-condition search at a single derivative point.
ConditionReport check_key_condition_at(const DerivativePoint& dp, double c, double epsilon, int sphere_samples,
                                       int refine_iters, std::uint64_t seed);

/// Minimum margin over every state point of the plan. A failing report is a
/// counterexample; a passing report in sampled mode is evidence only.
ConditionReport check_key_condition(const ProblemSpec& spec, double c, const SamplePlan& plan, double epsilon = 0.0);

struct SufficientReport {
    std::string condition;
    bool applicable = true;
    bool passed = false;
    int points_evaluated = 0;
    int first_failure = -1;  // index into the plan, -1 when none failed
};

SufficientReport check_sufficient_1_over(const ProblemSpec& spec, double c, const SamplePlan& plan);
SufficientReport check_sufficient_2_over(const ProblemSpec& spec, const SamplePlan& plan, double tol = 1e-10);
SufficientReport check_sufficient_3_over(const ProblemSpec& spec, double c, const SamplePlan& plan);

}  // namespace fbsde
