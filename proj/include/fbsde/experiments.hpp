#pragma once

#include "fbsde/conditions.hpp"
#include "fbsde/global_solver.hpp"
#include "fbsde/io.hpp"
#include "fbsde/oracles.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fbsde {

/// Everything one command needs. Loaded from a JSON file whose sections
/// mirror the members: problem, discretization, partition, check, mc,
/// stability, converge, lipschitz, threads.
struct ExperimentConfig {
    std::string problem = "example24";
    ParamMap params;
    DiscretizationParams disc;
    int m = 0;  // 0 = auto

    struct Check {
        double c = 1.0;
        double epsilon = 0.0;
        int points = 16;
        int sphere_samples = 64;
        int refine_iters = 32;
        std::uint64_t seed = 7;
    } check;

    struct MonteCarlo {
        int paths = 1000;
        std::uint64_t seed = 42;
    } mc;

    struct Stability {
        std::string g_shape = "constant";  // none | constant | sine
        std::string f_shape = "none";
        std::vector<double> epsilons{0.1, 0.01, 0.001};
    } stability;

    int levels = 3;
    double C_K = 1.0;
    int probe_pairs = 200;
    double lipschitz_cap = 1e6;
    int threads = 1;

    /// Canonical JSON of every field that can change results (threads excluded).
    json canonical() const;
    std::string hash() const { return fnv1a_hex(canonical().dump()); }
    OracleEntry entry() const { return get_problem(problem, params); }
};

/// Throws config_invalid on unknown names or out-of-range fields. Missing
/// discretization bounds default to the registry entry's grid.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct CheckOutcome {
    ConditionReport key;
    std::vector<SufficientReport> sufficient;
    bool matches_profile = true;
    std::vector<std::string> mismatches;
};

CheckOutcome run_check(const ExperimentConfig& cfg);

struct SolveOutcome {
    GlobalSolution solution;
    PathBundle bundle;
    Certificate certificate;
    Vector y0;
};

SolveOutcome run_solve(const ExperimentConfig& cfg);

struct ConvergenceRow {
    int level = 0;
    double dt = 0.0;
    double dx = 0.0;
    double err_y0 = 0.0;
    double err_field_sup = 0.0;
    double observed_order = 0.0;  // NaN on the first level and at the roundoff floor
};

/// Halves dt and dx per level; errors against the closed form when the entry
/// has one, otherwise against a brute-force reference solved with twice the
/// subintervals at 4x the finest resolution.
std::vector<ConvergenceRow> run_convergence(const ExperimentConfig& cfg, int levels);

struct StabilityRow {
    double epsilon = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    std::optional<double> ratio;
};

struct StabilityOutcome {
    bool in_hypothesis = true;
    std::vector<StabilityRow> rows;
};

/// Perturbs g -> g + eps h and f -> f + eps phi with the configured shapes,
/// solves both problems, and compares ||dTheta||^2 on paired paths with the
/// Monte Carlo right-hand side along the perturbed solution.
StabilityOutcome run_stability(const ExperimentConfig& cfg, const std::vector<double>& epsilons);

struct LipschitzRow {
    int i = 0;
    double T_i = 0.0;
    double measured_sq = 0.0;
    double bound_config = 0.0;
    double bound_fitted = 0.0;
};

struct LipschitzProbe {
    int pairs = 0;
    double max_ratio = 0.0;
    double kbar0_config = 0.0;
    double kbar0_fitted = 0.0;
};

struct LipschitzOutcome {
    double fitted_C_K = 0.0;
    std::vector<LipschitzRow> rows;
    LipschitzProbe probe;
};

LipschitzOutcome run_lipschitz(const ExperimentConfig& cfg);

/// Command wrappers: write artifacts under out_dir and return the exit code
/// (0 success, 1 expectation mismatch, 2 computational failure).
int cmd_check(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_solve(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_converge(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_stability(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_lipschitz(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace fbsde
