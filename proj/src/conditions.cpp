#include "fbsde/conditions.hpp"

#include <limits>

namespace fbsde {

std::vector<double> lipschitz_schedule(double K0, double C_K, double T, int m) {
    if (m < 1) throw Error(ErrorKind::invalid_argument, "schedule needs m >= 1");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m) + 1);
    for (int i = m; i >= 0; --i) {
        const double remaining = T - i * T / m;
        out.push_back((K0 * K0 + 1.0) * std::exp(C_K * remaining) - 1.0);
    }
    return out;
}

SamplePlan make_sample_plan(const ProblemSpec& spec, double x_lo, double x_hi, int points, int sphere_samples,
                            int refine_iters, std::uint64_t seed) {
    if (points < 1) throw Error(ErrorKind::invalid_argument, "sample plan needs at least one state point");
    SamplePlan plan;
    plan.sphere_samples = sphere_samples;
    plan.refine_iters = refine_iters;
    plan.seed = seed;
    auto rng = make_stream(seed, 0xC0FFEEu);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal;
    for (int p = 0; p < points; ++p) {
        StatePoint sp;
        sp.t = spec.horizon * unit(rng);
        sp.x = x_lo + (x_hi - x_lo) * unit(rng);
        sp.y.resize(spec.dims.n);
        for (auto& v : sp.y) v = normal(rng);
        sp.z.resize(spec.dims.n, spec.dims.d);
        for (auto& v : sp.z.reshaped()) v = normal(rng);
        plan.state_points.push_back(std::move(sp));
    }
    return plan;
}

namespace {

Vector random_unit(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> normal;
    Vector v(n);
    double norm = 0.0;
    do {
        for (auto& e : v) e = normal(rng);
        norm = v.norm();
    } while (norm < 1e-12);
    return v / norm;
}

struct DirectionSearch {
    double margin = std::numeric_limits<double>::infinity();
    Vector direction;
    long evaluated = 0;
};

DirectionSearch search_directions(const DerivativePoint& dp, double c, double epsilon, int sphere_samples,
                                  int refine_iters, std::mt19937_64& rng) {
    const int n = static_cast<int>(dp.dz_b.rows());
    DirectionSearch best;
    const auto consider = [&](const Vector& y) {
        const double m = key_margin(dp, y, c, epsilon);
        ++best.evaluated;
        if (m < best.margin) {
            best.margin = m;
            best.direction = y;
        }
    };

    for (int i = 0; i < n; ++i) {
        consider(Vector::Unit(n, i));
        consider(-Vector::Unit(n, i));
    }
    if (n == 1) return best;

    for (int s = 2 * n; s < sphere_samples; ++s) consider(random_unit(rng, n));

    // Perturb-and-renormalize hill climbing around the current worst direction.
    double step = 0.5;
    for (int it = 0; it < refine_iters; ++it) {
        Vector candidate = best.direction + step * random_unit(rng, n);
        const double norm = candidate.norm();
        if (norm < 1e-12) continue;
        candidate /= norm;
        const double before = best.margin;
        consider(candidate);
        if (!(best.margin < before)) step = std::max(step * 0.7, 1e-6);
    }
    return best;
}

}  // namespace

ConditionReport check_key_condition_at(const DerivativePoint& dp, double c, double epsilon, int sphere_samples,
                                       int refine_iters, std::uint64_t seed) {
    if (!(c > 0.0)) throw Error(ErrorKind::invalid_argument, "margin constant c must be positive");
    if (!(epsilon >= 0.0)) throw Error(ErrorKind::invalid_argument, "slack epsilon must be non-negative");
    dp.check_shapes();
    const int n = static_cast<int>(dp.dz_b.rows());
    if (sphere_samples < 2 * n) throw Error(ErrorKind::invalid_argument, "sphere_samples must be at least 2n");

    auto rng = make_stream(seed, 0);
    const DirectionSearch found = search_directions(dp, c, epsilon, sphere_samples, refine_iters, rng);
    ConditionReport report;
    report.c = c;
    report.epsilon = epsilon;
    report.worst_margin = found.margin;
    report.passed = found.margin >= 0.0;
    report.worst_point.direction = found.direction;
    report.worst_point.y_state = Vector::Zero(n);
    report.worst_point.z = Matrix::Zero(n, dp.dz_b.cols());
    report.samples_evaluated = found.evaluated;
    report.mode = n == 1 ? "exact" : "sampled";
    return report;
}

ConditionReport check_key_condition(const ProblemSpec& spec, double c, const SamplePlan& plan, double epsilon) {
    spec.check();
    if (!(c > 0.0)) throw Error(ErrorKind::invalid_argument, "margin constant c must be positive");
    if (!(epsilon >= 0.0)) throw Error(ErrorKind::invalid_argument, "slack epsilon must be non-negative");
    if (plan.state_points.empty()) throw Error(ErrorKind::invalid_argument, "sample plan has no state points");
    const int n = spec.dims.n;
    if (plan.sphere_samples < 2 * n) throw Error(ErrorKind::invalid_argument, "sphere_samples must be at least 2n");

    ConditionReport report;
    report.c = c;
    report.epsilon = epsilon;
    report.mode = n == 1 ? "exact" : "sampled";
    report.worst_margin = std::numeric_limits<double>::infinity();

    for (std::size_t p = 0; p < plan.state_points.size(); ++p) {
        const auto& sp = plan.state_points[p];
        const DerivativePoint dp = derivative_point(spec, sp.t, sp.x, sp.y, sp.z);
        auto rng = make_stream(plan.seed, p);
        const DirectionSearch found =
            search_directions(dp, c, epsilon, plan.sphere_samples, plan.refine_iters, rng);
        report.samples_evaluated += found.evaluated;
        if (found.margin < report.worst_margin) {
            report.worst_margin = found.margin;
            report.worst_point = {sp.t, sp.x, sp.y, sp.z, found.direction};
        }
    }
    report.passed = report.worst_margin >= 0.0;
    return report;
}

namespace {

template <typename Check>
SufficientReport over_plan(const ProblemSpec& spec, const SamplePlan& plan, std::string name, Check&& check) {
    SufficientReport report;
    report.condition = std::move(name);
    report.passed = true;
    for (std::size_t p = 0; p < plan.state_points.size(); ++p) {
        const auto& sp = plan.state_points[p];
        const DerivativePoint dp = derivative_point(spec, sp.t, sp.x, sp.y, sp.z);
        ++report.points_evaluated;
        if (!check(dp)) {
            report.passed = false;
            report.first_failure = static_cast<int>(p);
            break;
        }
    }
    return report;
}

}  // namespace

SufficientReport check_sufficient_1_over(const ProblemSpec& spec, double c, const SamplePlan& plan) {
    return over_plan(spec, plan, "sufficient_1", [c](const DerivativePoint& dp) { return check_sufficient_1(dp, c); });
}

SufficientReport check_sufficient_2_over(const ProblemSpec& spec, const SamplePlan& plan, double tol) {
    return over_plan(spec, plan, "sufficient_2",
                     [tol](const DerivativePoint& dp) { return check_sufficient_2(dp, tol); });
}

SufficientReport check_sufficient_3_over(const ProblemSpec& spec, double c, const SamplePlan& plan) {
    if (spec.dims.n != 1) {
        SufficientReport report;
        report.condition = "sufficient_3";
        report.applicable = false;
        return report;
    }
    return over_plan(spec, plan, "sufficient_3", [c](const DerivativePoint& dp) { return check_sufficient_3(dp, c); });
}

}  // namespace fbsde
