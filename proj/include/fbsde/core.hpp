#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbsde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorKind {
    invalid_argument,
    dimension_mismatch,
    non_finite_output,
    wrong_dimension,
    no_contraction,
    not_contracting_at_floor,
    lipschitz_explosion,
    path_escaped_domain,
    unknown_name,
    no_analytic_form,
    config_invalid,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Sizes of the backward component (n) and of the Brownian motion (d).
/// The forward state is always scalar.
struct Dimensions {
    int n = 1;
    int d = 1;

    void check() const;
    bool operator==(const Dimensions&) const = default;
};

using DriftFn = std::function<double(double t, double x, const Vector& y, const Matrix& z)>;
using DiffusionFn = std::function<Vector(double t, double x, const Vector& y)>;
using DriverFn = std::function<Vector(double t, double x, const Vector& y, const Matrix& z)>;
using TerminalFn = std::function<Vector(double x)>;

/// Deterministic (Markovian) coefficients b, sigma, f, g.
struct CoefficientSet {
    DriftFn b;
    DiffusionFn sigma;
    DriverFn f;
    TerminalFn g;
};

/// The derivative blocks entering the two Lambda functionals at one point.
///
/// Shapes: dz_b is n x d, dy_b has n entries, dx_sigma has d entries,
/// dy_sigma is d x n and dz_f holds n matrices of shape n x d, the i-th
/// being the gradient of f^i with respect to z.
template <typename Scalar>
struct BasicDerivativePoint {
    using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    MatrixType dz_b;
    VectorType dy_b;
    VectorType dx_sigma;
    MatrixType dy_sigma;
    std::vector<MatrixType> dz_f;

    static BasicDerivativePoint zero(const Dimensions& dims) {
        BasicDerivativePoint dp;
        dp.dz_b = MatrixType::Zero(dims.n, dims.d);
        dp.dy_b = VectorType::Zero(dims.n);
        dp.dx_sigma = VectorType::Zero(dims.d);
        dp.dy_sigma = MatrixType::Zero(dims.d, dims.n);
        dp.dz_f.assign(dims.n, MatrixType::Zero(dims.n, dims.d));
        return dp;
    }

    Dimensions dims() const { return {static_cast<int>(dz_b.rows()), static_cast<int>(dz_b.cols())}; }

    /// Throws dimension_mismatch when the blocks disagree with each other.
    void check_shapes() const {
        const auto n = dz_b.rows();
        const auto d = dz_b.cols();
        bool ok = n >= 1 && d >= 1 && dy_b.size() == n && dx_sigma.size() == d &&
                  dy_sigma.rows() == d && dy_sigma.cols() == n &&
                  static_cast<Eigen::Index>(dz_f.size()) == n;
        for (const auto& m : dz_f) ok = ok && m.rows() == n && m.cols() == d;
        if (!ok) throw Error(ErrorKind::dimension_mismatch, "derivative blocks have inconsistent shapes");
    }

    bool all_finite() const {
        bool ok = dz_b.allFinite() && dy_b.allFinite() && dx_sigma.allFinite() && dy_sigma.allFinite();
        for (const auto& m : dz_f) ok = ok && m.allFinite();
        return ok;
    }
};

using DerivativePoint = BasicDerivativePoint<double>;

using DerivativeFn = std::function<DerivativePoint(double t, double x, const Vector& y, const Matrix& z)>;

/// Analytic derivative maps when available; otherwise central differences
/// with step fd_step * max(1, |argument|).
struct DerivativeSet {
    DerivativeFn analytic;
    double fd_step = 1e-5;
};

/// Distribution of the initial forward state.
struct InitialState {
    enum class Kind { point, uniform, gaussian };

    Kind kind = Kind::point;
    double a = 0.0;  // point value, lower bound or mean
    double b = 0.0;  // unused, upper bound or standard deviation

    static InitialState point(double x) { return {Kind::point, x, 0.0}; }
    static InitialState uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
    static InitialState gaussian(double mean, double stddev) { return {Kind::gaussian, mean, stddev}; }

    double sample(std::mt19937_64& rng) const;
    /// Interval containing the support (mean +/- 6 sd for the Gaussian).
    std::pair<double, double> support() const;
    InitialState scaled(double factor) const;
};

struct ProblemSpec {
    std::string name;
    Dimensions dims;
    CoefficientSet coeffs;
    DerivativeSet derivs;
    double horizon = 1.0;
    InitialState x0;
    double K = 1.0;   // declared Lipschitz constant of b, sigma, f
    double K0 = 1.0;  // declared Lipschitz constant of g

    /// Throws invalid_argument when T, K or K0 are out of range.
    void check() const;
};

/// Derivative blocks at (t, x, y, z), analytic when provided.
DerivativePoint derivative_point(const ProblemSpec& spec, double t, double x, const Vector& y, const Matrix& z);

/// Scalar function of x sampled on a uniform grid, vector valued. Outside
/// [x_lo, x_hi] it continues with the one-sided boundary slope.
class GridFunction {
public:
    GridFunction() = default;
    /// values has one row per node and one column per component.
    GridFunction(double x_lo, double x_hi, double dx, Matrix values);

    template <typename Fn>
    static GridFunction sample(double x_lo, double x_hi, double dx, int width, Fn&& fn) {
        const int nodes = node_count_for(x_lo, x_hi, dx);
        Matrix values(nodes, width);
        for (int k = 0; k < nodes; ++k) values.row(k) = fn(x_lo + k * dx).transpose();
        return GridFunction(x_lo, x_hi, dx, std::move(values));
    }

    static int node_count_for(double x_lo, double x_hi, double dx);

    double x_lo() const { return x_lo_; }
    double x_hi() const { return x_hi_; }
    double dx() const { return dx_; }
    int size() const { return static_cast<int>(values_.rows()); }
    int width() const { return static_cast<int>(values_.cols()); }
    double node(int k) const { return k == size() - 1 ? x_hi_ : x_lo_ + k * dx_; }
    const Matrix& values() const { return values_; }
    Matrix& values() { return values_; }

    Vector operator()(double x) const;
    /// Allocation-free evaluation; out must have width() entries.
    void eval_into(double x, Eigen::Ref<Vector> out) const;

private:
    double x_lo_ = 0.0;
    double x_hi_ = 1.0;
    double dx_ = 1.0;
    Matrix values_;
};

/// Largest divided difference between adjacent nodes (Euclidean norm).
double lipschitz_estimate(const GridFunction& gf);

/// One Monte Carlo path of (X, Y, Z) on the bundle's time grid. Row j of y
/// holds Y at time j; row j of z holds Z flattened row-major (Z_11..Z_nd).
struct SamplePath {
    Vector x;
    Matrix y;
    Matrix z;
};

struct PathBundle {
    Dimensions dims;
    std::vector<double> time_grid;
    std::vector<SamplePath> paths;
    std::uint64_t seed = 0;

    void check() const;
};

/// Empirical E{ sup_j [|X_j|^2 + |Y_j|^2] + sum_j |Z_j|^2 dt_j }.
double theta_norm(const PathBundle& bundle);

/// Estimate of E|X_0|^2 + |g(0)|^2 + int_0^T |b|^2 + |sigma|^2 + |f|^2 at the origin.
double i0_norm(const ProblemSpec& spec, int mc_samples, int time_steps, std::uint64_t seed);

struct ValidationReport {
    bool passed = true;
    int probes = 0;
    double lip_b = 0.0;
    double lip_sigma = 0.0;
    double lip_f = 0.0;
    double lip_g = 0.0;
};

/// Probes all coefficients at pseudo-random points; throws on the first
/// dimension mismatch or non-finite output.
ValidationReport validate_problem(const ProblemSpec& spec, int probe_count, std::uint64_t seed);

/// Independent RNG stream for sample `index` of a run seeded with `seed`.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// processed exactly once; callers write results into per-index slots.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

}  // namespace fbsde
