#pragma once

#include "fbsde/core.hpp"
#include "fbsde/small_time.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fbsde {

using ParamMap = std::map<std::string, double>;

enum class Expectation { satisfies, violates, not_applicable };

const char* to_string(Expectation e);

/// Which well-posedness conditions an entry is expected to meet, at the
/// stored margin constant c.
struct ConditionProfile {
    double c = 1.0;
    Expectation key = Expectation::satisfies;
    Expectation sufficient_1 = Expectation::violates;
    Expectation sufficient_2 = Expectation::violates;
    Expectation sufficient_3 = Expectation::violates;
};

struct AnalyticForm {
    std::function<Vector(double t, double x)> u;
    std::function<Matrix(double t, double x)> v;
    /// Deterministic trajectory (X_t, Y_t) when the forward state is not random.
    std::function<std::pair<double, Vector>(double t)> path;
};

struct OracleEntry {
    std::string name;
    std::string description;
    ParamMap params;
    std::function<ProblemSpec(const ParamMap&)> spec_factory;
    std::optional<AnalyticForm> analytic;
    ConditionProfile condition_profile;
    /// Recommended grid for solves of this entry.
    double x_lo = -1.0;
    double x_hi = 1.0;

    ProblemSpec spec() const { return spec_factory(params); }
};

/// Registered names in listing order.
std::vector<std::string> problem_names();

/// Entry with its defaults overridden by `params`; throws unknown_name.
OracleEntry get_problem(const std::string& name, const ParamMap& params = {});

/// Closed-form decoupling fields; throws no_analytic_form.
std::pair<Vector, Matrix> analytic_eval(const OracleEntry& entry, double t, double x);

/// FBSDE with coefficients linear in (x, y, z) whose derivative blocks are
/// the constant point dp:
///   b = <dy_b, y> + <dz_b, z>,  sigma = dx_sigma x + dy_sigma y,
///   f^i = <dz_f^i, z>,  g = slope * x * (1, ..., 1).
ProblemSpec linear_problem(const DerivativePoint& dp, double T, double x0, double g_slope = 1.0);

/// g_0 of the same backward construction at a finer resolution with twice
/// the number of subintervals used by the run under test.
GridFunction brute_force_reference(const ProblemSpec& spec, const DiscretizationParams& fine_params, int m_under_test);

}  // namespace fbsde
