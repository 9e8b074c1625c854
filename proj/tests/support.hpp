#pragma once

#include "fbsde/core.hpp"

#include <cmath>

namespace testing {

using fbsde::Matrix;
using fbsde::Vector;

// Scalar FBSDE (n = d = 1) from plain lambdas.
template <typename B, typename S, typename F, typename G>
fbsde::ProblemSpec scalar_problem(B b, S s, F f, G g, double T = 1.0, double x0 = 0.0) {
    fbsde::ProblemSpec spec;
    spec.name = "test";
    spec.dims = {1, 1};
    spec.coeffs.b = [b](double t, double x, const Vector& y, const Matrix& z) { return b(t, x, y(0), z(0, 0)); };
    spec.coeffs.sigma = [s](double t, double x, const Vector& y) { return Vector::Constant(1, s(t, x, y(0))); };
    spec.coeffs.f = [f](double t, double x, const Vector& y, const Matrix& z) {
        return Vector::Constant(1, f(t, x, y(0), z(0, 0)));
    };
    spec.coeffs.g = [g](double x) { return Vector::Constant(1, g(x)); };
    spec.horizon = T;
    spec.x0 = fbsde::InitialState::point(x0);
    return spec;
}

inline fbsde::ProblemSpec zero_problem(double T = 1.0) {
    return scalar_problem([](double, double, double, double) { return 0.0; },
                          [](double, double, double) { return 0.0; },
                          [](double, double, double, double) { return 0.0; }, [](double) { return 0.0; }, T);
}

inline fbsde::ProblemSpec brownian(double T, double (*g)(double)) {
    return scalar_problem([](double, double, double, double) { return 0.0; },
                          [](double, double, double) { return 1.0; },
                          [](double, double, double, double) { return 0.0; }, g, T);
}

inline double identity(double x) { return x; }

}  // namespace testing
