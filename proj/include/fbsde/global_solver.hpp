#pragma once

#include "fbsde/core.hpp"
#include "fbsde/small_time.hpp"

#include <optional>
#include <vector>

namespace fbsde {

struct GlobalOptions {
    int m = 0;  // number of subintervals; 0 selects m = ceil(T / delta0)
    double lipschitz_cap = 1e6;
};

/// Partition-and-stitch solution. segments[k] covers [T_k, T_{k+1}];
/// g_funcs[k] is the terminal function at T_k, so g_funcs[m] is the sampled
/// g and g_funcs[k] = segments[k].u[0] for k < m.
struct GlobalSolution {
    std::vector<double> partition;
    std::vector<SegmentSolution> segments;
    std::vector<GridFunction> g_funcs;
    std::vector<double> measured_lipschitz;
    double fitted_C_K = 0.0;
    double delta0 = 0.0;  // estimated subinterval length when m was chosen automatically

    int m() const { return static_cast<int>(segments.size()); }
    double horizon() const { return partition.back(); }
};

GlobalSolution solve(const ProblemSpec& spec, const GlobalOptions& options, const DiscretizationParams& params);

/// Least-squares slope of log(Lip(g_i)^2 + 1) against T - T_i, over the
/// knots with positive measured Lipschitz constant. Zero with fewer than two
/// such knots.
double fit_C_K(const std::vector<double>& partition, const std::vector<double>& measured_lipschitz);

/// x -> Y_0 = g_0(x).
Vector initial_value_map(const GlobalSolution& sol, double x);

struct AssembleOptions {
    int paths = 1000;
    std::uint64_t seed = 0;
    int threads = 1;
    /// A path escapes when X leaves the grid by more than this multiple of the grid width.
    double escape_multiple = 1.0;
};

/// Euler-Maruyama forward paths with Y = u(t, X), Z = v(t, X) read from the
/// segments. Throws path_escaped_domain when more than 1% of paths escape.
PathBundle forward_assemble(const GlobalSolution& sol, const ProblemSpec& spec, const AssembleOptions& options,
                            int* escaped_paths = nullptr);

struct Certificate {
    double theta_sq = 0.0;
    double i0_sq = 0.0;
    std::optional<double> ratio;  // unset when I0^2 < 1e-14
    int escaped_paths = 0;
};

Certificate wellposedness_certificate(const ProblemSpec& spec, const GlobalSolution& sol,
                                      const AssembleOptions& options);

}  // namespace fbsde
