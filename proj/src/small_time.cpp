#include "fbsde/small_time.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fbsde {

void DiscretizationParams::check(int d) const {
    if (steps < 1) throw Error(ErrorKind::invalid_argument, "steps must be >= 1");
    GridFunction::node_count_for(x_lo, x_hi, dx);
    if (quad_order < 2) throw Error(ErrorKind::invalid_argument, "quad_order must be >= 2");
    if (std::pow(static_cast<double>(quad_order), d) > 1e5)
        throw Error(ErrorKind::invalid_argument, "quad_order^d exceeds 1e5 quadrature nodes");
    if (!(inner_tol > 0.0)) throw Error(ErrorKind::invalid_argument, "inner_tol must be positive");
    if (inner_max < 1) throw Error(ErrorKind::invalid_argument, "inner_max must be >= 1");
    if (!(damping > 0.0 && damping <= 1.0)) throw Error(ErrorKind::invalid_argument, "damping must lie in (0, 1]");
}

QuadratureRule gauss_hermite(int order, int d) {
    if (order < 2 || d < 1) throw Error(ErrorKind::invalid_argument, "Gauss-Hermite rule needs order >= 2, d >= 1");
    if (std::pow(static_cast<double>(order), d) > 1e5)
        throw Error(ErrorKind::invalid_argument, "tensor rule exceeds 1e5 nodes");

    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
    Matrix jacobi = Matrix::Zero(order, order);
    for (int k = 1; k < order; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
    Vector points = eig.eigenvalues();
    Vector w = eig.eigenvectors().row(0).transpose().array().square();
    // Exact symmetry of the 1-D rule keeps odd moments at zero.
    for (int k = 0; k < order / 2; ++k) {
        const int j = order - 1 - k;
        const double p = 0.5 * (points(j) - points(k));
        const double m = 0.5 * (w(k) + w(j));
        points(k) = -p;
        points(j) = p;
        w(k) = w(j) = m;
    }
    if (order % 2 == 1) points(order / 2) = 0.0;
    w /= w.sum();

    long count = 1;
    for (int i = 0; i < d; ++i) count *= order;
    QuadratureRule rule;
    rule.nodes.resize(d, count);
    rule.weights.resize(count);
    for (long k = 0; k < count; ++k) {
        long rest = k;
        double weight = 1.0;
        for (int i = 0; i < d; ++i) {
            const int idx = static_cast<int>(rest % order);
            rest /= order;
            rule.nodes(i, k) = points(idx);
            weight *= w(idx);
        }
        rule.weights(k) = weight;
    }
    return rule;
}

Vector flatten_rows(const Matrix& z) {
    return z.transpose().reshaped();
}

Matrix unflatten_rows(const Eigen::Ref<const Vector>& flat, int n, int d) {
    return flat.reshaped(d, n).transpose();
}

double SegmentSolution::time(int j) const {
    const int J = steps();
    if (j == J) return t_end;
    return t_start + j * ((t_end - t_start) / J);
}

namespace {

struct InnerOutcome {
    OneStepResult result;
    bool converged = false;
};

InnerOutcome iterate_one_step(double x, double t, double dt, const GridFunction& u_next, const ProblemSpec& spec,
                              const DiscretizationParams& params, const QuadratureRule& rule, const Matrix* z_guess) {
    const int n = spec.dims.n;
    const int d = spec.dims.d;
    const auto& c = spec.coeffs;
    const double sqdt = std::sqrt(dt);
    const long count = rule.weights.size();

    Vector y = u_next(x);
    if (y.size() != n) throw Error(ErrorKind::dimension_mismatch, "terminal field width differs from n");
    Matrix z = z_guess ? *z_guess : Matrix::Zero(n, d);

    Vector u(n);
    Vector y_acc(n);
    Matrix z_acc(n, d);
    double first_residual = 0.0;
    double last_residual = 0.0;
    double outside = 0.0;

    InnerOutcome out;
    int k = 0;
    while (k < params.inner_max) {
        ++k;
        const double drift = c.b(t, x, y, z);
        const Vector sigma = c.sigma(t, x, y);
        if (sigma.size() != d) throw Error(ErrorKind::dimension_mismatch, "sigma width differs from d");
        const double base = x + drift * dt;

        y_acc.setZero();
        z_acc.setZero();
        outside = 0.0;
        for (long q = 0; q < count; ++q) {
            const double xp = base + sqdt * sigma.dot(rule.nodes.col(q));
            u_next.eval_into(xp, u);
            const double w = rule.weights(q);
            y_acc.noalias() += w * u;
            z_acc.noalias() += (w * u) * rule.nodes.col(q).transpose();
            if (xp < u_next.x_lo() || xp > u_next.x_hi()) outside += w;
        }
        const Vector y_new = y_acc + c.f(t, x, y, z) * dt;
        const Matrix z_new = z_acc / sqdt;

        const Vector y_next = (1.0 - params.damping) * y + params.damping * y_new;
        const Matrix z_next = (1.0 - params.damping) * z + params.damping * z_new;
        const double residual = std::max((y_next - y).norm(), (z_next - z).norm());
        y = y_next;
        z = z_next;

        if (!std::isfinite(residual) || !y.allFinite() || !z.allFinite()) {
            out.result.contraction_ratio = std::numeric_limits<double>::infinity();
            out.result.iterations = k;
            out.result.y = y;
            out.result.z = z;
            return out;
        }
        if (k == 1) first_residual = residual;
        last_residual = residual;
        if (residual <= params.inner_tol) {
            out.converged = true;
            break;
        }
    }

    out.result.y = std::move(y);
    out.result.z = std::move(z);
    out.result.iterations = k;
    out.result.outside_mass = outside;
    if (k >= 2 && first_residual > 0.0)
        out.result.contraction_ratio = std::pow(last_residual / first_residual, 1.0 / (k - 1));
    return out;
}

OneStepResult finish(InnerOutcome&& outcome, double x, double t) {
    auto& r = outcome.result;
    if (!std::isfinite(r.contraction_ratio) || !r.y.allFinite() || !r.z.allFinite()) {
        std::ostringstream msg;
        msg << "inner iteration diverged at t=" << t << ", x=" << x;
        throw Error(ErrorKind::non_finite_output, msg.str());
    }
    if (!outcome.converged && r.contraction_ratio >= 1.0) {
        std::ostringstream msg;
        msg << "inner iteration did not contract at t=" << t << ", x=" << x << " (ratio " << r.contraction_ratio
            << " after " << r.iterations << " iterations); reduce dt";
        throw Error(ErrorKind::no_contraction, msg.str());
    }
    return std::move(r);
}

}  // namespace

OneStepResult solve_one_step(double x, double t, double dt, const GridFunction& u_next, const ProblemSpec& spec,
                             const DiscretizationParams& params, const Matrix* z_guess) {
    spec.check();
    params.check(spec.dims.d);
    if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be positive");
    const QuadratureRule rule = gauss_hermite(params.quad_order, spec.dims.d);
    return finish(iterate_one_step(x, t, dt, u_next, spec, params, rule, z_guess), x, t);
}

SegmentSolution backward_sweep(const GridFunction& terminal, double t_start, double t_end, const ProblemSpec& spec,
                               const DiscretizationParams& params, const GridFunction* z_warm_start) {
    spec.check();
    params.check(spec.dims.d);
    if (!(t_start < t_end)) throw Error(ErrorKind::invalid_argument, "segment needs t_start < t_end");
    if (terminal.width() != spec.dims.n) throw Error(ErrorKind::dimension_mismatch, "terminal width differs from n");
    const int nodes = GridFunction::node_count_for(params.x_lo, params.x_hi, params.dx);
    if (terminal.size() != nodes || std::abs(terminal.x_lo() - params.x_lo) > 1e-12 ||
        std::abs(terminal.x_hi() - params.x_hi) > 1e-12)
        throw Error(ErrorKind::invalid_argument, "terminal grid does not match the configured domain");

    const int n = spec.dims.n;
    const int d = spec.dims.d;
    const int J = params.steps;
    const QuadratureRule rule = gauss_hermite(params.quad_order, d);

    SegmentSolution seg;
    seg.t_start = t_start;
    seg.t_end = t_end;
    seg.u.resize(J + 1);
    seg.v.resize(J);
    seg.u[J] = terminal;
    const double dt = (t_end - t_start) / J;

    std::vector<int> iterations(nodes);
    std::vector<double> outside(nodes);
    for (int j = J - 1; j >= 0; --j) {
        const double t = seg.time(j);
        const GridFunction& u_next = seg.u[j + 1];
        const GridFunction* z_prev = j + 1 < J ? &seg.v[j + 1] : z_warm_start;
        Matrix u_vals(nodes, n);
        Matrix v_vals(nodes, n * d);
        parallel_for(nodes, params.threads, [&](int k) {
            const double x = terminal.node(k);
            std::optional<Matrix> guess;
            if (z_prev) guess = unflatten_rows(z_prev->values().row(k).transpose(), n, d);
            try {
                OneStepResult r = finish(
                    iterate_one_step(x, t, dt, u_next, spec, params, rule, guess ? &*guess : nullptr), x, t);
                u_vals.row(k) = r.y.transpose();
                v_vals.row(k) = flatten_rows(r.z).transpose();
                iterations[k] = r.iterations;
                outside[k] = r.outside_mass;
            } catch (const Error& e) {
                std::ostringstream msg;
                msg << e.what() << " [time step j=" << j << ", node " << k << "]";
                throw Error(e.kind(), msg.str());
            }
        });
        seg.u[j] = GridFunction(params.x_lo, params.x_hi, params.dx, std::move(u_vals));
        seg.v[j] = GridFunction(params.x_lo, params.x_hi, params.dx, std::move(v_vals));
        seg.inner_iterations_max_used =
            std::max(seg.inner_iterations_max_used, *std::max_element(iterations.begin(), iterations.end()));
        seg.worst_outside_mass = std::max(seg.worst_outside_mass, *std::max_element(outside.begin(), outside.end()));
    }
    return seg;
}

double estimate_delta0(const ProblemSpec& spec, double terminal_lipschitz, const DiscretizationParams& params,
                       double t_probe) {
    spec.check();
    params.check(spec.dims.d);
    const int n = spec.dims.n;
    const QuadratureRule rule = gauss_hermite(params.quad_order, spec.dims.d);
    const double slope = terminal_lipschitz / std::sqrt(static_cast<double>(n));
    const GridFunction probe_field = GridFunction::sample(
        params.x_lo, params.x_hi, params.dx, n, [slope, n](double x) { return Vector::Constant(n, slope * x); });

    const int nodes = probe_field.size();
    std::vector<int> probe_nodes;
    for (double frac : {0.1, 0.3, 0.5, 0.7, 0.9})
        probe_nodes.push_back(std::clamp(static_cast<int>(std::lround(frac * (nodes - 1))), 0, nodes - 1));

    double delta = 1.0 / std::max(1.0, spec.K * spec.K);
    while (delta >= 1e-6) {
        bool contracting = true;
        for (int k : probe_nodes) {
            const InnerOutcome outcome =
                iterate_one_step(probe_field.node(k), t_probe, delta, probe_field, spec, params, rule, nullptr);
            const double ratio = outcome.result.contraction_ratio;
            if (!(ratio <= 0.5)) {
                contracting = false;
                break;
            }
        }
        if (contracting) return delta;
        delta *= 0.5;
    }
    throw Error(ErrorKind::not_contracting_at_floor,
                "inner iteration does not contract for any subinterval length >= 1e-6");
}

}  // namespace fbsde
