#include "fbsde/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace fbsde {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::dimension_mismatch: return "dimension-mismatch";
        case ErrorKind::non_finite_output: return "non-finite-output";
        case ErrorKind::wrong_dimension: return "wrong-dimension";
        case ErrorKind::no_contraction: return "no-contraction";
        case ErrorKind::not_contracting_at_floor: return "not-contracting-at-floor";
        case ErrorKind::lipschitz_explosion: return "lipschitz-explosion";
        case ErrorKind::path_escaped_domain: return "path-escaped-domain";
        case ErrorKind::unknown_name: return "unknown-name";
        case ErrorKind::no_analytic_form: return "no-analytic-form";
        case ErrorKind::config_invalid: return "config-invalid";
    }
    return "unknown";
}

void Dimensions::check() const {
    if (n < 1 || d < 1) throw Error(ErrorKind::invalid_argument, "dimensions must satisfy n >= 1 and d >= 1");
}

double InitialState::sample(std::mt19937_64& rng) const {
    switch (kind) {
        case Kind::point: return a;
        case Kind::uniform: return std::uniform_real_distribution<double>(a, b)(rng);
        case Kind::gaussian: return std::normal_distribution<double>(a, b)(rng);
    }
    return a;
}

std::pair<double, double> InitialState::support() const {
    switch (kind) {
        case Kind::point: return {a, a};
        case Kind::uniform: return {a, b};
        case Kind::gaussian: return {a - 6.0 * b, a + 6.0 * b};
    }
    return {a, a};
}

InitialState InitialState::scaled(double factor) const {
    InitialState out = *this;
    out.a *= factor;
    if (kind != Kind::point) out.b *= kind == Kind::gaussian ? std::abs(factor) : factor;
    return out;
}

void ProblemSpec::check() const {
    dims.check();
    if (!(horizon > 0.0)) throw Error(ErrorKind::invalid_argument, "horizon T must be positive");
    if (!(K > 0.0)) throw Error(ErrorKind::invalid_argument, "Lipschitz constant K must be positive");
    if (!(K0 >= 0.0)) throw Error(ErrorKind::invalid_argument, "Lipschitz constant K0 must be non-negative");
    if (!coeffs.b || !coeffs.sigma || !coeffs.f || !coeffs.g)
        throw Error(ErrorKind::invalid_argument, "all four coefficient maps must be set");
}

namespace {

double fd_step(double scale, double arg) { return scale * std::max(1.0, std::abs(arg)); }

}  // namespace

DerivativePoint derivative_point(const ProblemSpec& spec, double t, double x, const Vector& y, const Matrix& z) {
    if (spec.derivs.analytic) {
        DerivativePoint dp = spec.derivs.analytic(t, x, y, z);
        dp.check_shapes();
        if (dp.dims() != spec.dims)
            throw Error(ErrorKind::dimension_mismatch, "analytic derivatives do not match problem dimensions");
        return dp;
    }

    const int n = spec.dims.n;
    const int d = spec.dims.d;
    const auto& c = spec.coeffs;
    const double scale = spec.derivs.fd_step;
    DerivativePoint dp = DerivativePoint::zero(spec.dims);

    Matrix zp = z;
    Matrix zm = z;
    for (int r = 0; r < n; ++r) {
        for (int col = 0; col < d; ++col) {
            const double h = fd_step(scale, z(r, col));
            zp(r, col) = z(r, col) + h;
            zm(r, col) = z(r, col) - h;
            dp.dz_b(r, col) = (c.b(t, x, y, zp) - c.b(t, x, y, zm)) / (2.0 * h);
            const Vector df = (c.f(t, x, y, zp) - c.f(t, x, y, zm)) / (2.0 * h);
            for (int i = 0; i < n; ++i) dp.dz_f[i](r, col) = df(i);
            zp(r, col) = z(r, col);
            zm(r, col) = z(r, col);
        }
    }

    Vector yp = y;
    Vector ym = y;
    for (int j = 0; j < n; ++j) {
        const double h = fd_step(scale, y(j));
        yp(j) = y(j) + h;
        ym(j) = y(j) - h;
        dp.dy_b(j) = (c.b(t, x, yp, z) - c.b(t, x, ym, z)) / (2.0 * h);
        dp.dy_sigma.col(j) = (c.sigma(t, x, yp) - c.sigma(t, x, ym)) / (2.0 * h);
        yp(j) = y(j);
        ym(j) = y(j);
    }

    const double hx = fd_step(scale, x);
    dp.dx_sigma = (c.sigma(t, x + hx, y) - c.sigma(t, x - hx, y)) / (2.0 * hx);

    if (!dp.all_finite()) throw Error(ErrorKind::non_finite_output, "finite-difference derivative is not finite");
    return dp;
}

int GridFunction::node_count_for(double x_lo, double x_hi, double dx) {
    if (!(x_lo < x_hi) || !(dx > 0.0))
        throw Error(ErrorKind::invalid_argument, "grid needs x_lo < x_hi and dx > 0");
    const double cells = (x_hi - x_lo) / dx;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, rounded))
        throw Error(ErrorKind::invalid_argument, "grid width is not an integer multiple of dx");
    if (rounded < 1.0) throw Error(ErrorKind::invalid_argument, "grid needs at least two nodes");
    return static_cast<int>(rounded) + 1;
}

GridFunction::GridFunction(double x_lo, double x_hi, double dx, Matrix values)
    : x_lo_(x_lo), x_hi_(x_hi), dx_(dx), values_(std::move(values)) {
    if (values_.rows() != node_count_for(x_lo, x_hi, dx))
        throw Error(ErrorKind::dimension_mismatch, "grid values do not match the node count");
    if (values_.cols() < 1) throw Error(ErrorKind::dimension_mismatch, "grid values need at least one component");
}

void GridFunction::eval_into(double x, Eigen::Ref<Vector> out) const {
    const int last = size() - 1;
    const double s = (x - x_lo_) / dx_;
    int k = static_cast<int>(std::floor(s));
    k = std::clamp(k, 0, last - 1);
    const double theta = s - k;
    out = values_.row(k).transpose() + theta * (values_.row(k + 1) - values_.row(k)).transpose();
}

Vector GridFunction::operator()(double x) const {
    Vector out(width());
    eval_into(x, out);
    return out;
}

double lipschitz_estimate(const GridFunction& gf) {
    double best = 0.0;
    for (int k = 0; k + 1 < gf.size(); ++k)
        best = std::max(best, (gf.values().row(k + 1) - gf.values().row(k)).norm() / gf.dx());
    return best;
}

void PathBundle::check() const {
    if (paths.empty()) throw Error(ErrorKind::invalid_argument, "path bundle is empty");
    const auto steps = static_cast<Eigen::Index>(time_grid.size());
    for (const auto& p : paths) {
        if (p.x.size() != steps || p.y.rows() != steps || p.z.rows() != steps || p.y.cols() != dims.n ||
            p.z.cols() != dims.n * dims.d)
            throw Error(ErrorKind::dimension_mismatch, "path does not match the bundle time grid");
    }
}

double theta_norm(const PathBundle& bundle) {
    bundle.check();
    const auto& grid = bundle.time_grid;
    double total = 0.0;
    for (const auto& p : bundle.paths) {
        double sup = 0.0;
        double integral = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const auto row = static_cast<Eigen::Index>(j);
            sup = std::max(sup, p.x(row) * p.x(row) + p.y.row(row).squaredNorm());
            if (j + 1 < grid.size()) integral += p.z.row(row).squaredNorm() * (grid[j + 1] - grid[j]);
        }
        total += sup + integral;
    }
    const double out = total / static_cast<double>(bundle.paths.size());
    if (!std::isfinite(out)) throw Error(ErrorKind::non_finite_output, "theta norm is not finite");
    return out;
}

double i0_norm(const ProblemSpec& spec, int mc_samples, int time_steps, std::uint64_t seed) {
    spec.check();
    if (mc_samples < 1 || time_steps < 1)
        throw Error(ErrorKind::invalid_argument, "i0_norm needs mc_samples >= 1 and time_steps >= 1");

    double x0_moment = 0.0;
    for (int s = 0; s < mc_samples; ++s) {
        auto rng = make_stream(seed, static_cast<std::uint64_t>(s));
        const double x0 = spec.x0.sample(rng);
        x0_moment += x0 * x0;
    }
    x0_moment /= mc_samples;

    const Vector y0 = Vector::Zero(spec.dims.n);
    const Matrix z0 = Matrix::Zero(spec.dims.n, spec.dims.d);
    const auto integrand = [&](double t) {
        const double b = spec.coeffs.b(t, 0.0, y0, z0);
        return b * b + spec.coeffs.sigma(t, 0.0, y0).squaredNorm() + spec.coeffs.f(t, 0.0, y0, z0).squaredNorm();
    };
    const double dt = spec.horizon / time_steps;
    double integral = 0.5 * (integrand(0.0) + integrand(spec.horizon));
    for (int j = 1; j < time_steps; ++j) integral += integrand(j * dt);
    integral *= dt;

    const double out = x0_moment + spec.coeffs.g(0.0).squaredNorm() + integral;
    if (!std::isfinite(out)) throw Error(ErrorKind::non_finite_output, "I0 norm is not finite");
    return out;
}

namespace {

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
    if (!m.allFinite()) throw Error(ErrorKind::non_finite_output, std::string(what) + " returned a non-finite value");
}

void require_size(Eigen::Index got, int want, const char* what) {
    if (got != want) {
        std::ostringstream msg;
        msg << what << " returned " << got << " components, expected " << want;
        throw Error(ErrorKind::dimension_mismatch, msg.str());
    }
}

Vector unit_direction(std::mt19937_64& rng, int size) {
    std::normal_distribution<double> normal;
    Vector v(size);
    for (int i = 0; i < size; ++i) v(i) = normal(rng);
    const double norm = v.norm();
    return norm > 0.0 ? Vector(v / norm) : Vector(Vector::Unit(size, 0));
}

}  // namespace

ValidationReport validate_problem(const ProblemSpec& spec, int probe_count, std::uint64_t seed) {
    spec.check();
    if (probe_count < 1) throw Error(ErrorKind::invalid_argument, "probe_count must be >= 1");
    const int n = spec.dims.n;
    const int d = spec.dims.d;
    const auto& c = spec.coeffs;
    const auto [lo, hi] = spec.x0.support();

    ValidationReport report;
    report.probes = probe_count;
    std::normal_distribution<double> normal;
    for (int p = 0; p < probe_count; ++p) {
        auto rng = make_stream(seed, static_cast<std::uint64_t>(p));
        const double t = std::uniform_real_distribution<double>(0.0, spec.horizon)(rng);
        const double x = std::uniform_real_distribution<double>(lo - 1.0, hi + 1.0)(rng);
        Vector y(n);
        for (int i = 0; i < n; ++i) y(i) = normal(rng);
        Matrix z(n, d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) z(i, j) = normal(rng);

        const double b = c.b(t, x, y, z);
        const Vector s = c.sigma(t, x, y);
        const Vector f = c.f(t, x, y, z);
        const Vector g = c.g(x);
        require_size(s.size(), d, "sigma");
        require_size(f.size(), n, "f");
        require_size(g.size(), n, "g");
        if (!std::isfinite(b)) throw Error(ErrorKind::non_finite_output, "b returned a non-finite value");
        require_finite(s, "sigma");
        require_finite(f, "f");
        require_finite(g, "g");

        // Local slopes along one random direction per argument block.
        const double hx = 1e-4 * std::max(1.0, std::abs(x));
        const double hy = 1e-4 * std::max(1.0, y.norm());
        const double hz = 1e-4 * std::max(1.0, z.norm());
        const Vector dy = hy * unit_direction(rng, n);
        const Matrix dz = hz * unit_direction(rng, n * d).reshaped(n, d);
        const Vector yp = y + dy;
        const Matrix zp = z + dz;

        const double bx = std::abs(c.b(t, x + hx, y, z) - b) / hx;
        const double by = std::abs(c.b(t, x, yp, z) - b) / hy;
        const double bz = std::abs(c.b(t, x, y, zp) - b) / hz;
        report.lip_b = std::max(report.lip_b, std::sqrt(bx * bx + by * by + bz * bz));

        const double sx = (c.sigma(t, x + hx, y) - s).norm() / hx;
        const double sy = (c.sigma(t, x, yp) - s).norm() / hy;
        report.lip_sigma = std::max(report.lip_sigma, std::sqrt(sx * sx + sy * sy));

        const double fx = (c.f(t, x + hx, y, z) - f).norm() / hx;
        const double fy = (c.f(t, x, yp, z) - f).norm() / hy;
        const double fz = (c.f(t, x, y, zp) - f).norm() / hz;
        report.lip_f = std::max(report.lip_f, std::sqrt(fx * fx + fy * fy + fz * fz));

        report.lip_g = std::max(report.lip_g, (c.g(x + hx) - g).norm() / hx);
    }
    return report;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
    return std::mt19937_64(seq);
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    if (count <= 0) return;
    const int workers = std::min(std::max(threads, 1), count);
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }

    std::atomic<int> next{0};
    std::mutex guard;
    int failed_index = count;
    std::exception_ptr failure;
    auto run = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                // Keep the failure with the lowest index so the reported
                // error does not depend on scheduling.
                std::lock_guard lock(guard);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace fbsde
