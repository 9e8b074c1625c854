#include "fbsde/global_solver.hpp"

#include <cmath>
#include <sstream>

namespace fbsde {

double fit_C_K(const std::vector<double>& partition, const std::vector<double>& measured_lipschitz) {
    const double T = partition.back();
    double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < partition.size(); ++i) {
        const double lip = measured_lipschitz[i];
        if (!(lip > 0.0)) continue;
        const double tau = T - partition[i];
        const double level = std::log(lip * lip + 1.0);
        st += tau;
        sl += level;
        stt += tau * tau;
        stl += tau * level;
        ++count;
    }
    if (count < 2) return 0.0;
    const double denom = count * stt - st * st;
    if (denom <= 0.0) return 0.0;
    return (count * stl - st * sl) / denom;
}

GlobalSolution solve(const ProblemSpec& spec, const GlobalOptions& options, const DiscretizationParams& params) {
    spec.check();
    params.check(spec.dims.d);
    const double T = spec.horizon;

    GlobalSolution sol;
    int m = options.m;
    if (m <= 0) {
        sol.delta0 = estimate_delta0(spec, spec.K0, params, 0.0);
        m = static_cast<int>(std::ceil(T / sol.delta0 - 1e-12));
        m = std::max(m, 1);
    }

    sol.partition.resize(m + 1);
    for (int i = 0; i <= m; ++i) sol.partition[i] = i == m ? T : i * T / m;
    sol.segments.resize(m);
    sol.g_funcs.resize(m + 1);
    sol.measured_lipschitz.assign(m + 1, 0.0);

    sol.g_funcs[m] = GridFunction::sample(params.x_lo, params.x_hi, params.dx, spec.dims.n, spec.coeffs.g);
    sol.measured_lipschitz[m] = lipschitz_estimate(sol.g_funcs[m]);

    const GridFunction* warm = nullptr;
    for (int k = m - 1; k >= 0; --k) {
        try {
            sol.segments[k] =
                backward_sweep(sol.g_funcs[k + 1], sol.partition[k], sol.partition[k + 1], spec, params, warm);
        } catch (const Error& e) {
            std::ostringstream msg;
            msg << e.what() << " [subinterval " << k + 1 << " of " << m << "]";
            throw Error(e.kind(), msg.str());
        }
        warm = &sol.segments[k].v[0];
        sol.g_funcs[k] = sol.segments[k].u[0];
        sol.measured_lipschitz[k] = lipschitz_estimate(sol.g_funcs[k]);
        if (sol.measured_lipschitz[k] > options.lipschitz_cap) {
            std::ostringstream msg;
            msg << "Lip(g_" << k << ") = " << sol.measured_lipschitz[k] << " exceeds cap " << options.lipschitz_cap;
            throw Error(ErrorKind::lipschitz_explosion, msg.str());
        }
    }
    sol.fitted_C_K = fit_C_K(sol.partition, sol.measured_lipschitz);
    return sol;
}

Vector initial_value_map(const GlobalSolution& sol, double x) {
    return sol.g_funcs.front()(x);
}

PathBundle forward_assemble(const GlobalSolution& sol, const ProblemSpec& spec, const AssembleOptions& options,
                            int* escaped_paths) {
    spec.check();
    if (options.paths < 1) throw Error(ErrorKind::invalid_argument, "forward_assemble needs at least one path");
    if (sol.segments.empty()) throw Error(ErrorKind::invalid_argument, "solution has no segments");
    const int n = spec.dims.n;
    const int d = spec.dims.d;
    if (sol.g_funcs.front().width() != n) throw Error(ErrorKind::dimension_mismatch, "solution width differs from n");

    PathBundle bundle;
    bundle.dims = spec.dims;
    bundle.seed = options.seed;
    struct StepRef {
        const SegmentSolution* seg;
        int j;
    };
    std::vector<StepRef> steps;
    for (const auto& seg : sol.segments)
        for (int j = 0; j < seg.steps(); ++j) {
            steps.push_back({&seg, j});
            bundle.time_grid.push_back(seg.time(j));
        }
    bundle.time_grid.push_back(sol.horizon());
    const int N = static_cast<int>(steps.size());

    const GridFunction& any = sol.g_funcs.front();
    const double width = any.x_hi() - any.x_lo();
    const double lo = any.x_lo() - options.escape_multiple * width;
    const double hi = any.x_hi() + options.escape_multiple * width;

    bundle.paths.resize(options.paths);
    std::vector<char> escaped(options.paths, 0);
    parallel_for(options.paths, options.threads, [&](int p) {
        auto rng = make_stream(options.seed, static_cast<std::uint64_t>(p));
        std::normal_distribution<double> normal;
        SamplePath path;
        path.x.resize(N + 1);
        path.y.resize(N + 1, n);
        path.z.resize(N + 1, n * d);
        Vector y(n);
        Vector zf(n * d);
        Vector dw(d);
        double x = spec.x0.sample(rng);
        for (int s = 0; s < N; ++s) {
            const auto& ref = steps[s];
            const double t = bundle.time_grid[s];
            const double dt = bundle.time_grid[s + 1] - t;
            ref.seg->u[ref.j].eval_into(x, y);
            ref.seg->v[ref.j].eval_into(x, zf);
            path.x(s) = x;
            path.y.row(s) = y.transpose();
            path.z.row(s) = zf.transpose();
            if (x < lo || x > hi) escaped[p] = 1;
            const Matrix z = unflatten_rows(zf, n, d);
            const double sq = std::sqrt(dt);
            for (int i = 0; i < d; ++i) dw(i) = sq * normal(rng);
            x += spec.coeffs.b(t, x, y, z) * dt + spec.coeffs.sigma(t, x, y).dot(dw);
        }
        sol.segments.back().u.back().eval_into(x, y);
        path.x(N) = x;
        path.y.row(N) = y.transpose();
        path.z.row(N) = path.z.row(N - 1);
        if (x < lo || x > hi) escaped[p] = 1;
        if (!path.x.allFinite() || !path.y.allFinite() || !path.z.allFinite())
            throw Error(ErrorKind::non_finite_output, "forward path is not finite");
        bundle.paths[p] = std::move(path);
    });

    int count = 0;
    for (char e : escaped) count += e;
    if (escaped_paths) *escaped_paths = count;
    if (count * 100 > options.paths) {
        std::ostringstream msg;
        msg << count << " of " << options.paths << " paths left the grid domain";
        throw Error(ErrorKind::path_escaped_domain, msg.str());
    }
    return bundle;
}

Certificate wellposedness_certificate(const ProblemSpec& spec, const GlobalSolution& sol,
                                      const AssembleOptions& options) {
    Certificate cert;
    const PathBundle bundle = forward_assemble(sol, spec, options, &cert.escaped_paths);
    cert.theta_sq = theta_norm(bundle);
    const int steps = static_cast<int>(bundle.time_grid.size()) - 1;
    cert.i0_sq = i0_norm(spec, options.paths, steps, options.seed);
    if (cert.i0_sq >= 1e-14) cert.ratio = cert.theta_sq / cert.i0_sq;
    return cert;
}

}  // namespace fbsde
