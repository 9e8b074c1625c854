// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
// Tolerances are pinned here and shared with nothing else.

#include "fbsde/conditions.hpp"
#include "fbsde/experiments.hpp"
#include "fbsde/global_solver.hpp"
#include "fbsde/oracles.hpp"
#include "generators.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace fbsde;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

DiscretizationParams grid(double lo, double hi, double dx, int steps) {
    DiscretizationParams p;
    p.x_lo = lo;
    p.x_hi = hi;
    p.dx = dx;
    p.steps = steps;
    return p;
}

GlobalOptions with_m(int m) {
    GlobalOptions o;
    o.m = m;
    return o;
}

// 1. Example 2.4 end to end.
Verdict example24_end_to_end() {
    const double T = 1.0;
    const auto spec = get_problem("example24", {{"T", T}}).spec();
    const auto sol = solve(spec, with_m(4), grid(-1, 3, 0.01, 16));
    const double y0_err = std::abs(initial_value_map(sol, 1.0)(0) - 1.0 / (1.0 + T));
    AssembleOptions opts;
    opts.paths = 8;
    const auto bundle = forward_assemble(sol, spec, opts);
    double x_err = 0.0;
    for (const auto& path : bundle.paths)
        for (std::size_t j = 0; j < bundle.time_grid.size(); ++j)
            x_err = std::max(x_err, std::abs(path.x(static_cast<Eigen::Index>(j)) -
                                             (1.0 - bundle.time_grid[j] / (1.0 + T))));
    return {y0_err <= 1e-3 && x_err <= 1e-3, fmt("|Y0 - 0.5| = %.3g, sup |X_t - (1 - t/2)| = %.3g", y0_err, x_err)};
}

// 2. Condition checker ground truth.
Verdict checker_ground_truth() {
    auto dp = DerivativePoint::zero({1, 1});
    dp.dy_b(0) = -1.0;
    const Vector one = Vector::Constant(1, 1.0);
    const double l3 = lambda3(dp, one);
    const double l4 = lambda4(dp, one);
    bool all_fail = true;
    for (double c : {1e-8, 1e-4, 0.01, 0.5, 1.0, 10.0, 1e4})
        all_fail = all_fail && !check_key_condition_at(dp, c, 0.0, 2, 0, 1).passed;
    const auto ex_spec = get_problem("example24").spec();
    const auto ex_plan = make_sample_plan(ex_spec, -1, 3, 16, 2, 0, 3);
    for (double c : {1e-6, 1.0, 100.0}) all_fail = all_fail && !check_key_condition(ex_spec, c, ex_plan).passed;

    const auto s3 = get_problem("coupled_s3").spec();
    const auto plan = make_sample_plan(s3, -8, 8, 64, 2, 0, 5);
    const auto key = check_key_condition(s3, 1.0, plan);
    const auto suff = check_sufficient_3_over(s3, 1.0, plan);
    const bool ok = l3 == -1.0 && l4 == 0.0 && all_fail && key.passed && key.worst_margin == 2.0 &&
                    key.mode == "exact" && suff.applicable && suff.passed;
    return {ok, fmt("Lambda3(1) = %g, Lambda4(1) = %g, example24 fails for all c: %s; coupled_s3 key %s "
                    "(margin %g, %s), sufficient_3 %s",
                    l3, l4, all_fail ? "yes" : "no", key.passed ? "PASS" : "FAIL", key.worst_margin,
                    key.mode.c_str(), suff.passed ? "PASS" : "FAIL")};
}

// 3. Each sufficient condition implies the key condition with the same c.
Verdict sufficiency_suite() {
    constexpr int kPoints = 1000;
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> c_dist(0.1, 2.0);
    std::uniform_int_distribution<int> dim(1, 3);

    int violations[3] = {0, 0, 0};
    int rescued = 0;  // first-condition violations that pass once c is divided by max(1, max|Lambda3|)
    for (int k = 0; k < kPoints; ++k) {
        const double c = c_dist(rng);
        const int n = dim(rng);
        const int d = std::max(n, dim(rng));
        const auto dp1 = testing::satisfying_sufficient_1(rng, n, d, c);
        const auto report = check_key_condition_at(dp1, c, 0.0, 64, 32, k);
        if (!report.passed) {
            ++violations[0];
            double max_l3 = 1.0;
            for (int s = 0; s < 256; ++s) max_l3 = std::max(max_l3, std::abs(lambda3(dp1, testing::unit(rng, n))));
            for (int i = 0; i < n; ++i) max_l3 = std::max(max_l3, std::abs(lambda3(dp1, Vector::Unit(n, i))));
            max_l3 = std::max(max_l3, std::abs(lambda3(dp1, report.worst_point.direction)));
            if (check_key_condition_at(dp1, c / max_l3, 0.0, 64, 32, k).passed) ++rescued;
        }

        const auto dp2 = testing::satisfying_sufficient_2(rng, dim(rng), dim(rng));
        if (!check_key_condition_at(dp2, c, 0.0, 64, 32, k).passed) ++violations[1];

        const auto dp3 = testing::satisfying_sufficient_3(rng, dim(rng), c);
        if (!check_key_condition_at(dp3, c, 0.0, 2, 0, k).passed) ++violations[2];
    }
    const bool ok = violations[0] == 0 && violations[1] == 0 && violations[2] == 0;
    return {ok, fmt("violations out of %d: first %d (of which %d pass with c / max|Lambda3|), second %d, third %d",
                    kPoints, violations[0], rescued, violations[1], violations[2])};
}

// 4. Decoupled oracles.
Verdict decoupled_oracles() {
    const auto id = get_problem("brownian_identity").spec();
    const auto id_sol = solve(id, with_m(1), grid(-4, 4, 0.01, 16));
    double id_u = 0.0, id_v = 0.0;
    const auto& u0 = id_sol.g_funcs[0];
    const auto& v0 = id_sol.segments[0].v[0];
    for (int k = 0; k < u0.size(); ++k) {
        id_u = std::max(id_u, std::abs(u0.values()(k, 0) - u0.node(k)));
        id_v = std::max(id_v, std::abs(v0.values()(k, 0) - 1.0));
    }

    const double T = 0.1;  // dt = T / 16 = 1/160
    const auto sq = get_problem("brownian_square", {{"T", T}}).spec();
    const auto sq_sol = solve(sq, with_m(1), grid(-4, 4, 0.01, 16));
    double sq_err = 0.0;
    for (int k = 0; k < sq_sol.g_funcs[0].size(); ++k) {
        const double x = sq_sol.g_funcs[0].node(k);
        if (std::abs(x) <= 3.0) sq_err = std::max(sq_err, std::abs(sq_sol.g_funcs[0].values()(k, 0) - (x * x + T)));
    }
    return {id_u <= 1e-8 && id_v <= 1e-8 && sq_err <= 1e-3,
            fmt("identity: u err %.3g, v err %.3g; square (T = 0.1, |x| <= 3): u err %.3g", id_u, id_v, sq_err)};
}

// 5. Lipschitz propagation with the fitted C_K.
Verdict lipschitz_propagation() {
    constexpr double kRoundoff = 1e-9;
    bool ok = true;
    std::string detail;
    for (const char* name : {"brownian_identity", "coupled_s3"}) {
        const auto entry = get_problem(name);
        const auto spec = entry.spec();
        for (int m : {2, 4}) {
            const auto sol = solve(spec, with_m(m), grid(entry.x_lo, entry.x_hi, 0.02, 8));
            const auto sched = lipschitz_schedule(spec.K0, sol.fitted_C_K, spec.horizon, m);
            double worst = -1e300;
            for (int i = 0; i <= m; ++i) {
                const double excess = std::pow(sol.measured_lipschitz[i], 2) - sched[m - i];
                worst = std::max(worst, excess);
                ok = ok && excess <= kRoundoff * std::max(1.0, sched[m - i]);
            }
            const double kb = kbar0(spec.K0, sol.fitted_C_K, spec.horizon);
            const double last = std::abs(sched.back() - kb * kb);
            ok = ok && last <= 1e-12;
            detail += fmt("%s m=%d: C_K %.4g, max(Lip^2 - bound) %.3g, |last - kbar0^2| %.2g; ", name, m,
                          sol.fitted_C_K, worst, last);
        }
    }
    return {ok, detail};
}

// 6. Initial-value map probe on a single short interval.
Verdict initial_value_probe() {
    const double T = 0.25;
    const auto spec = get_problem("coupled_s3", {{"T", T}}).spec();
    const auto p = grid(-8, 8, 0.01, 16);
    const double delta0 = estimate_delta0(spec, spec.K0, p, 0.0);
    const auto sol = solve(spec, GlobalOptions{}, p);
    const double bound = kbar0(spec.K0, sol.fitted_C_K, T) + 0.05;
    auto rng = make_stream(2024, 6);
    std::uniform_real_distribution<double> x(-4.0, 4.0);
    double worst = 0.0;
    int pairs = 0;
    for (; pairs < 2000; ++pairs) {
        const double a = x(rng), b = x(rng);
        if (a == b) continue;
        worst = std::max(worst, (initial_value_map(sol, a) - initial_value_map(sol, b)).norm() / std::abs(a - b));
    }
    return {T <= delta0 && worst <= bound,
            fmt("T = %g, delta0 = %g, m = %d; max ratio %.5g vs kbar0 + 0.05 = %.5g over %d pairs", T, delta0, sol.m(),
                worst, bound, pairs)};
}

// 7. Stability harness.
Verdict stability_harness() {
    const std::vector<double> eps{0.1, 0.01, 0.001};
    auto id_cfg = parse_config({{"problem", "brownian_identity"},
                                {"partition", 1},
                                {"discretization", {{"dx", 0.02}, {"steps", 8}}},
                                {"mc", {{"M", 500}, {"seed", 11}}}});
    const auto id = run_stability(id_cfg, eps);
    bool ok = id.in_hypothesis;
    double id_dev = 0.0;
    for (const auto& r : id.rows) {
        ok = ok && r.ratio.has_value();
        if (r.ratio) id_dev = std::max(id_dev, std::abs(*r.ratio - 1.0));
    }
    ok = ok && id_dev <= 0.01;

    auto s3_cfg = parse_config({{"problem", "coupled_s3"},
                                {"discretization", {{"dx", 0.02}, {"steps", 8}}},
                                {"mc", {{"M", 500}, {"seed", 11}}}});
    const auto s3 = run_stability(s3_cfg, eps);
    double lo = 1e300, hi = 0.0;
    bool decreasing = true;
    for (std::size_t k = 0; k < s3.rows.size(); ++k) {
        const auto& r = s3.rows[k];
        ok = ok && r.ratio.has_value();
        if (r.ratio) {
            lo = std::min(lo, *r.ratio);
            hi = std::max(hi, *r.ratio);
        }
        if (k > 0) decreasing = decreasing && r.lhs < s3.rows[k - 1].lhs;
    }
    const double shrink = s3.rows.back().lhs / s3.rows.front().lhs;
    ok = ok && s3.in_hypothesis && hi / lo < 10.0 && decreasing && shrink <= 1e-3;
    return {ok, fmt("identity max |ratio - 1| = %.3g; coupled_s3 ratios in [%.4g, %.4g] (spread %.3gx), "
                    "lhs %.3g -> %.3g",
                    id_dev, lo, hi, hi / lo, s3.rows.front().lhs, s3.rows.back().lhs)};
}

// 8. Partition insensitivity and refinement.
Verdict scheme_consistency() {
    const auto s3 = get_problem("coupled_s3").spec();
    auto p = grid(-8, 8, 0.02, 8);
    const auto coarse = solve(s3, with_m(2), p);
    p.steps = 4;
    const auto fine = solve(s3, with_m(4), p);
    const double diff = (coarse.g_funcs[0].values() - fine.g_funcs[0].values()).cwiseAbs().maxCoeff();
    const bool insensitive = diff <= 2.0 * p.inner_tol;

    const auto ex_rows = run_convergence(parse_config({{"problem", "example24"},
                                                       {"partition", 4},
                                                       {"discretization", {{"dx", 0.04}, {"steps", 4}}}}),
                                         3);
    double ex_max = 0.0;
    for (const auto& r : ex_rows) ex_max = std::max(ex_max, r.err_field_sup);
    const double ex_order = ex_rows.back().observed_order;
    // Example 2.4 has a linear decoupling field, which the scheme reproduces
    // exactly; its errors sit at the roundoff floor and the order is undefined.
    // Exactness at every level is then the (stronger) convergence statement,
    // and first order is demonstrated on a problem with a genuine error.
    const bool ex_exact = ex_max <= 1e-10;
    const bool ex_ok = std::isnan(ex_order) ? ex_exact : ex_order >= 0.8;

    const auto s3_rows = run_convergence(
        parse_config({{"problem", "coupled_s3"}, {"partition", 2}, {"discretization", {{"dx", 0.04}, {"steps", 4}}}}),
        3);
    const double s3_order = s3_rows.back().observed_order;
    const bool ok = insensitive && ex_ok && s3_order >= 0.8;
    return {ok, fmt("m vs 2m sup diff %.3g (limit %.1g); example24 max err %.3g, order %s; coupled_s3 order %.3g",
                    diff, 2.0 * p.inner_tol, ex_max,
                    std::isnan(ex_order) ? "undefined (exact)" : fmt("%.3g", ex_order).c_str(), s3_order)};
}

// 9. Determinism of the solve command.
Verdict solve_determinism() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "fbsde_acceptance_determinism";
    fs::remove_all(root);
    auto cfg = parse_config({{"problem", "coupled_s3"},
                             {"discretization", {{"dx", 0.02}, {"steps", 8}}},
                             {"mc", {{"M", 300}, {"seed", 3}}}});
    std::ostringstream log;
    int codes = 0;
    codes += cmd_solve(cfg, root / "a", log);
    codes += cmd_solve(cfg, root / "b", log);
    cfg.threads = cfg.disc.threads = 4;
    codes += cmd_solve(cfg, root / "c", log);
    const auto slurp = [](const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    };
    bool identical = codes == 0;
    for (const char* file : {"paths.csv", "solution.json", "summary.json"}) {
        const auto a = slurp(root / "a" / file);
        identical = identical && !a.empty() && a == slurp(root / "b" / file) && a == slurp(root / "c" / file);
    }
    return {identical, fmt("3 runs (threads 1, 1, 4): %s", identical ? "byte-identical" : "outputs differ")};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Verdict()>> criteria[] = {
        {"example24 end-to-end", example24_end_to_end},
        {"condition-checker ground truth", checker_ground_truth},
        {"sufficiency implication suite", sufficiency_suite},
        {"decoupled oracles", decoupled_oracles},
        {"Lipschitz propagation", lipschitz_propagation},
        {"initial-value map probe", initial_value_probe},
        {"stability harness", stability_harness},
        {"scheme self-consistency", scheme_consistency},
        {"determinism", solve_determinism},
    };
    int failed = 0;
    int index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s  [%d] %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", index, name, v.detail.c_str(), secs);
        std::fflush(stdout);
        if (!v.pass) ++failed;
    }
    std::printf("%d of %d criteria passed\n", index - failed, index);
    return failed == 0 ? 0 : 1;
}
