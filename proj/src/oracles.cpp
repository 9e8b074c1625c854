#include "fbsde/oracles.hpp"

#include "fbsde/global_solver.hpp"

#include <cmath>

namespace fbsde {

const char* to_string(Expectation e) {
    switch (e) {
        case Expectation::satisfies: return "satisfies";
        case Expectation::violates: return "violates";
        case Expectation::not_applicable: return "not-applicable";
    }
    return "unknown";
}

namespace {

double param(const ParamMap& p, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end()) throw Error(ErrorKind::invalid_argument, "missing problem parameter '" + key + "'");
    return it->second;
}

Vector scalar(double v) { return Vector::Constant(1, v); }

Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }

ProblemSpec scalar_problem(std::string name, double T, double x0, double K, double K0) {
    ProblemSpec spec;
    spec.name = std::move(name);
    spec.dims = {1, 1};
    spec.horizon = T;
    spec.x0 = InitialState::point(x0);
    spec.K = K;
    spec.K0 = K0;
    return spec;
}

DerivativePoint scalar_derivatives(double dz_b, double dy_b, double dx_sigma, double dy_sigma, double dz_f) {
    DerivativePoint dp = DerivativePoint::zero({1, 1});
    dp.dz_b(0, 0) = dz_b;
    dp.dy_b(0) = dy_b;
    dp.dx_sigma(0) = dx_sigma;
    dp.dy_sigma(0, 0) = dy_sigma;
    dp.dz_f[0](0, 0) = dz_f;
    return dp;
}

DerivativeFn constant_derivatives(DerivativePoint dp) {
    return [dp = std::move(dp)](double, double, const Vector&, const Matrix&) { return dp; };
}

OracleEntry zero_entry() {
    OracleEntry e;
    e.name = "zero";
    e.description = "all coefficients zero; g is the identity (g_identity=1) or zero";
    e.params = {{"T", 1.0}, {"x0", 0.0}, {"g_identity", 1.0}};
    e.spec_factory = [](const ParamMap& p) {
        const bool identity = param(p, "g_identity") != 0.0;
        ProblemSpec spec = scalar_problem("zero", param(p, "T"), param(p, "x0"), 1.0, identity ? 1.0 : 0.0);
        spec.coeffs.b = [](double, double, const Vector&, const Matrix&) { return 0.0; };
        spec.coeffs.sigma = [](double, double, const Vector&) { return scalar(0.0); };
        spec.coeffs.f = [](double, double, const Vector&, const Matrix&) { return scalar(0.0); };
        spec.coeffs.g = [identity](double x) { return scalar(identity ? x : 0.0); };
        spec.derivs.analytic = constant_derivatives(DerivativePoint::zero({1, 1}));
        return spec;
    };
    e.condition_profile = {1.0, Expectation::satisfies, Expectation::violates, Expectation::satisfies,
                           Expectation::satisfies};
    e.x_lo = -2.0;
    e.x_hi = 2.0;
    return e;
}

OracleEntry example24_entry() {
    OracleEntry e;
    e.name = "example24";
    e.description = "X_t = 1 - int Y ds, Y_t = X_T - int Z dW (violates the key condition, still well-posed)";
    e.params = {{"T", 1.0}, {"x0", 1.0}};
    e.spec_factory = [](const ParamMap& p) {
        ProblemSpec spec = scalar_problem("example24", param(p, "T"), param(p, "x0"), 1.0, 1.0);
        spec.coeffs.b = [](double, double, const Vector& y, const Matrix&) { return -y(0); };
        spec.coeffs.sigma = [](double, double, const Vector&) { return scalar(0.0); };
        spec.coeffs.f = [](double, double, const Vector&, const Matrix&) { return scalar(0.0); };
        spec.coeffs.g = [](double x) { return scalar(x); };
        spec.derivs.analytic = constant_derivatives(scalar_derivatives(0.0, -1.0, 0.0, 0.0, 0.0));
        return spec;
    };
    e.condition_profile = {1.0, Expectation::violates, Expectation::violates, Expectation::violates,
                           Expectation::violates};
    e.x_lo = -1.0;
    e.x_hi = 3.0;
    return e;
}

OracleEntry brownian_identity_entry() {
    OracleEntry e;
    e.name = "brownian_identity";
    e.description = "b = 0, sigma = 1, f = 0, g(x) = x; u(t, x) = x, v = 1";
    e.params = {{"T", 1.0}, {"x0", 0.0}};
    e.spec_factory = [](const ParamMap& p) {
        ProblemSpec spec = scalar_problem("brownian_identity", param(p, "T"), param(p, "x0"), 1.0, 1.0);
        spec.coeffs.b = [](double, double, const Vector&, const Matrix&) { return 0.0; };
        spec.coeffs.sigma = [](double, double, const Vector&) { return scalar(1.0); };
        spec.coeffs.f = [](double, double, const Vector&, const Matrix&) { return scalar(0.0); };
        spec.coeffs.g = [](double x) { return scalar(x); };
        spec.derivs.analytic = constant_derivatives(DerivativePoint::zero({1, 1}));
        return spec;
    };
    e.analytic = AnalyticForm{[](double, double x) { return scalar(x); },
                              [](double, double) { return scalar_matrix(1.0); }, {}};
    e.condition_profile = {1.0, Expectation::satisfies, Expectation::violates, Expectation::satisfies,
                           Expectation::satisfies};
    e.x_lo = -4.0;
    e.x_hi = 4.0;
    return e;
}

OracleEntry brownian_square_entry() {
    OracleEntry e;
    e.name = "brownian_square";
    e.description = "b = 0, sigma = 1, f = 0, g(x) = x^2 on [-L, L], linear outside; u = x^2 + T - t, v = 2x";
    e.params = {{"T", 1.0}, {"x0", 0.0}, {"L", 4.0}};
    e.spec_factory = [](const ParamMap& p) {
        const double L = param(p, "L");
        ProblemSpec spec = scalar_problem("brownian_square", param(p, "T"), param(p, "x0"), 1.0, 2.0 * L);
        spec.coeffs.b = [](double, double, const Vector&, const Matrix&) { return 0.0; };
        spec.coeffs.sigma = [](double, double, const Vector&) { return scalar(1.0); };
        spec.coeffs.f = [](double, double, const Vector&, const Matrix&) { return scalar(0.0); };
        spec.coeffs.g = [L](double x) {
            const double a = std::abs(x);
            return scalar(a <= L ? x * x : L * L + 2.0 * L * (a - L));
        };
        spec.derivs.analytic = constant_derivatives(DerivativePoint::zero({1, 1}));
        return spec;
    };
    e.condition_profile = {1.0, Expectation::satisfies, Expectation::violates, Expectation::satisfies,
                           Expectation::satisfies};
    e.x_lo = -4.0;
    e.x_hi = 4.0;
    return e;
}

OracleEntry coupled_s3_entry() {
    OracleEntry e;
    e.name = "coupled_s3";
    e.description = "b = z, sigma = s0 - y, f = 0, g = sin x (scalar-Y sufficient condition)";
    e.params = {{"T", 0.5}, {"x0", 0.5}, {"s0", 2.0}};
    e.spec_factory = [](const ParamMap& p) {
        const double s0 = param(p, "s0");
        ProblemSpec spec = scalar_problem("coupled_s3", param(p, "T"), param(p, "x0"), 1.0, 1.0);
        spec.coeffs.b = [](double, double, const Vector&, const Matrix& z) { return z(0, 0); };
        spec.coeffs.sigma = [s0](double, double, const Vector& y) { return scalar(s0 - y(0)); };
        spec.coeffs.f = [](double, double, const Vector&, const Matrix&) { return scalar(0.0); };
        spec.coeffs.g = [](double x) { return scalar(std::sin(x)); };
        spec.derivs.analytic = constant_derivatives(scalar_derivatives(1.0, 0.0, 0.0, -1.0, 0.0));
        return spec;
    };
    e.condition_profile = {1.0, Expectation::satisfies, Expectation::satisfies, Expectation::violates,
                           Expectation::satisfies};
    e.x_lo = -8.0;
    e.x_hi = 8.0;
    return e;
}

OracleEntry linear_constant_entry() {
    OracleEntry e;
    e.name = "linear_constant";
    e.description =
        "linear FBSDE with constant coefficients: b = a1 x + b1 y + g1 z, sigma = a2 x + b2 y, "
        "f = a3 x + b3 y + g3 z, g = G x";
    e.params = {{"T", 1.0}, {"x0", 1.0}, {"a1", -0.5}, {"b1", 0.0}, {"g1", 1.0}, {"a2", 0.3},
                {"b2", -1.0}, {"a3", 0.2}, {"b3", -0.1}, {"g3", 0.0}, {"G", 0.8}};
    e.spec_factory = [](const ParamMap& p) {
        const double a1 = param(p, "a1"), b1 = param(p, "b1"), g1 = param(p, "g1");
        const double a2 = param(p, "a2"), b2 = param(p, "b2");
        const double a3 = param(p, "a3"), b3 = param(p, "b3"), g3 = param(p, "g3");
        const double G = param(p, "G");
        const double K = std::max({std::abs(a1), std::abs(b1), std::abs(g1), std::abs(a2), std::abs(b2), std::abs(a3),
                                   std::abs(b3), std::abs(g3), 1e-3});
        ProblemSpec spec = scalar_problem("linear_constant", param(p, "T"), param(p, "x0"), K, std::abs(G));
        spec.coeffs.b = [=](double, double x, const Vector& y, const Matrix& z) {
            return a1 * x + b1 * y(0) + g1 * z(0, 0);
        };
        spec.coeffs.sigma = [=](double, double x, const Vector& y) { return scalar(a2 * x + b2 * y(0)); };
        spec.coeffs.f = [=](double, double x, const Vector& y, const Matrix& z) {
            return scalar(a3 * x + b3 * y(0) + g3 * z(0, 0));
        };
        spec.coeffs.g = [G](double x) { return scalar(G * x); };
        spec.derivs.analytic = constant_derivatives(scalar_derivatives(g1, b1, a2, b2, g3));
        return spec;
    };
    e.condition_profile = {1.0, Expectation::satisfies, Expectation::satisfies, Expectation::violates,
                           Expectation::satisfies};
    e.x_lo = -3.0;
    e.x_hi = 5.0;
    return e;
}

OracleEntry decoupled_f_no_z_entry() {
    OracleEntry e;
    e.name = "decoupled_f_no_z";
    e.description = "b = -x/2, sigma = 1 + sin(y)/4, f = -y/2 + cos(x)/4, g = cos x (driver free of z)";
    e.params = {{"T", 1.0}, {"x0", 0.0}};
    e.spec_factory = [](const ParamMap& p) {
        ProblemSpec spec = scalar_problem("decoupled_f_no_z", param(p, "T"), param(p, "x0"), 0.5, 1.0);
        spec.coeffs.b = [](double, double x, const Vector&, const Matrix&) { return -0.5 * x; };
        spec.coeffs.sigma = [](double, double, const Vector& y) { return scalar(1.0 + 0.25 * std::sin(y(0))); };
        spec.coeffs.f = [](double, double x, const Vector& y, const Matrix&) {
            return scalar(-0.5 * y(0) + 0.25 * std::cos(x));
        };
        spec.coeffs.g = [](double x) { return scalar(std::cos(x)); };
        spec.derivs.analytic = [](double, double, const Vector& y, const Matrix&) {
            return scalar_derivatives(0.0, 0.0, 0.0, 0.25 * std::cos(y(0)), 0.0);
        };
        return spec;
    };
    e.condition_profile = {1.0, Expectation::satisfies, Expectation::violates, Expectation::satisfies,
                           Expectation::satisfies};
    e.x_lo = -6.0;
    e.x_hi = 6.0;
    return e;
}

using Factory = OracleEntry (*)();

const std::vector<std::pair<std::string, Factory>>& registry() {
    static const std::vector<std::pair<std::string, Factory>> entries = {
        {"zero", zero_entry},
        {"example24", example24_entry},
        {"brownian_identity", brownian_identity_entry},
        {"brownian_square", brownian_square_entry},
        {"coupled_s3", coupled_s3_entry},
        {"linear_constant", linear_constant_entry},
        {"decoupled_f_no_z", decoupled_f_no_z_entry},
    };
    return entries;
}

// Closed forms that depend on the entry's parameters.
void bind_analytic(OracleEntry& e) {
    const ParamMap& p = e.params;
    if (e.name == "zero") {
        const bool identity = param(p, "g_identity") != 0.0;
        const double x0 = param(p, "x0");
        e.analytic = AnalyticForm{[identity](double, double x) { return scalar(identity ? x : 0.0); },
                                  [](double, double) { return scalar_matrix(0.0); },
                                  [identity, x0](double) {
                                      return std::pair<double, Vector>{x0, scalar(identity ? x0 : 0.0)};
                                  }};
    } else if (e.name == "example24") {
        const double T = param(p, "T");
        const double x0 = param(p, "x0");
        // Z = 0 makes Y_t = X_T deterministic; from (t, x) the terminal state
        // solves X_T = x - (T - t) X_T.
        e.analytic = AnalyticForm{[T](double t, double x) { return scalar(x / (1.0 + T - t)); },
                                  [](double, double) { return scalar_matrix(0.0); },
                                  [T, x0](double t) {
                                      return std::pair<double, Vector>{x0 * (1.0 - t / (1.0 + T)),
                                                                       scalar(x0 / (1.0 + T))};
                                  }};
    } else if (e.name == "brownian_square") {
        const double T = param(p, "T");
        e.analytic = AnalyticForm{[T](double t, double x) { return scalar(x * x + (T - t)); },
                                  [](double, double x) { return scalar_matrix(2.0 * x); }, {}};
    }
}

}  // namespace

std::vector<std::string> problem_names() {
    std::vector<std::string> names;
    for (const auto& [name, factory] : registry()) names.push_back(name);
    return names;
}

OracleEntry get_problem(const std::string& name, const ParamMap& params) {
    for (const auto& [key, factory] : registry()) {
        if (key != name) continue;
        OracleEntry e = factory();
        for (const auto& [k, v] : params) {
            if (!e.params.count(k)) throw Error(ErrorKind::invalid_argument, "problem '" + name + "' has no parameter '" + k + "'");
            e.params[k] = v;
        }
        bind_analytic(e);
        if (e.name == "brownian_square") {
            const double L = param(e.params, "L");
            e.x_lo = -L;
            e.x_hi = L;
        }
        return e;
    }
    throw Error(ErrorKind::unknown_name, "no registered problem named '" + name + "'");
}

std::pair<Vector, Matrix> analytic_eval(const OracleEntry& entry, double t, double x) {
    if (!entry.analytic || !entry.analytic->u || !entry.analytic->v)
        throw Error(ErrorKind::no_analytic_form, "problem '" + entry.name + "' has no closed form");
    return {entry.analytic->u(t, x), entry.analytic->v(t, x)};
}

ProblemSpec linear_problem(const DerivativePoint& dp, double T, double x0, double g_slope) {
    dp.check_shapes();
    const Dimensions dims = dp.dims();
    ProblemSpec spec;
    spec.name = "linear";
    spec.dims = dims;
    spec.horizon = T;
    spec.x0 = InitialState::point(x0);
    double K = std::max({dp.dz_b.norm(), dp.dy_b.norm(), dp.dx_sigma.norm(), dp.dy_sigma.norm(), 1e-3});
    for (const auto& m : dp.dz_f) K = std::max(K, m.norm());
    spec.K = K;
    spec.K0 = std::abs(g_slope) * std::sqrt(static_cast<double>(dims.n));
    spec.coeffs.b = [dp](double, double, const Vector& y, const Matrix& z) {
        return dp.dy_b.dot(y) + (dp.dz_b.array() * z.array()).sum();
    };
    spec.coeffs.sigma = [dp](double, double x, const Vector& y) -> Vector { return dp.dx_sigma * x + dp.dy_sigma * y; };
    spec.coeffs.f = [dp](double, double, const Vector&, const Matrix& z) {
        Vector out(static_cast<Eigen::Index>(dp.dz_f.size()));
        for (std::size_t i = 0; i < dp.dz_f.size(); ++i)
            out(static_cast<Eigen::Index>(i)) = (dp.dz_f[i].array() * z.array()).sum();
        return out;
    };
    const int n = dims.n;
    spec.coeffs.g = [g_slope, n](double x) { return Vector::Constant(n, g_slope * x); };
    spec.derivs.analytic = constant_derivatives(dp);
    return spec;
}

GridFunction brute_force_reference(const ProblemSpec& spec, const DiscretizationParams& fine_params, int m_under_test) {
    GlobalOptions options;
    options.m = 2 * std::max(m_under_test, 1);
    return solve(spec, options, fine_params).g_funcs.front();
}

}  // namespace fbsde
