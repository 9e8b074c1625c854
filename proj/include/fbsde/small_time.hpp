#pragma once

#include "fbsde/core.hpp"

#include <optional>
#include <vector>

namespace fbsde {

struct DiscretizationParams {
    int steps = 16;  // time steps per subinterval
    double x_lo = -1.0;
    double x_hi = 1.0;
    double dx = 0.01;
    int quad_order = 8;  // Gauss-Hermite points per Brownian dimension
    double inner_tol = 1e-12;
    int inner_max = 200;
    double damping = 1.0;
    int threads = 1;

    void check(int d) const;
};

/// Tensor Gauss-Hermite rule for E[phi(W)], W ~ N(0, I_d). Column k of
/// nodes is the k-th point in R^d.
struct QuadratureRule {
    Matrix nodes;
    Vector weights;
};

QuadratureRule gauss_hermite(int order, int d);

struct OneStepResult {
    Vector y;
    Matrix z;
    int iterations = 0;
    /// Geometric mean of the residual decrease per inner iteration.
    double contraction_ratio = 0.0;
    /// Quadrature weight landing outside [x_lo, x_hi] at the final iterate.
    double outside_mass = 0.0;
};

/// Fixed point of the damped one-step map at node x:
///   X+(w) = x + b dt + sigma* w sqrt(dt)
///   y = E[u_next(X+)] + f dt,  z = E[u_next(X+) w*] / sqrt(dt)
/// Starts from (u_next(x), z_guess or 0). Throws no_contraction when
/// inner_max is reached without the residual decreasing.
OneStepResult solve_one_step(double x, double t, double dt, const GridFunction& u_next, const ProblemSpec& spec,
                             const DiscretizationParams& params, const Matrix* z_guess = nullptr);

struct SegmentSolution {
    double t_start = 0.0;
    double t_end = 0.0;
    std::vector<GridFunction> u;  // J + 1 fields with values in R^n
    std::vector<GridFunction> v;  // J fields, Z flattened row-major (n*d)
    int inner_iterations_max_used = 0;
    double worst_outside_mass = 0.0;

    int steps() const { return static_cast<int>(v.size()); }
    double time(int j) const;
};

/// Backward induction over [t_start, t_end] from the terminal field. The
/// optional warm start seeds the inner iteration of the last step with a Z
/// field (the v[0] of the segment solved just after this one).
SegmentSolution backward_sweep(const GridFunction& terminal, double t_start, double t_end, const ProblemSpec& spec,
                               const DiscretizationParams& params, const GridFunction* z_warm_start = nullptr);

/// Largest subinterval length, found by halving from 1/max(1, K^2), for
/// which the inner iteration contracts with ratio <= 1/2 at probe nodes.
double estimate_delta0(const ProblemSpec& spec, double terminal_lipschitz, const DiscretizationParams& params,
                       double t_probe);

/// Row-major flattening of an n x d matrix and its inverse.
Vector flatten_rows(const Matrix& z);
Matrix unflatten_rows(const Eigen::Ref<const Vector>& flat, int n, int d);

}  // namespace fbsde
