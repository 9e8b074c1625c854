#include "fbsde/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>

namespace fbsde {

namespace {

json vector_json(const Eigen::Ref<const Vector>& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json matrix_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
    return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const GridFunction& gf) {
    return {{"x_lo", gf.x_lo()}, {"x_hi", gf.x_hi()}, {"dx", gf.dx()}, {"n", gf.size()},
            {"values", matrix_json(gf.values())}};
}

GridFunction grid_function_from_json(const json& j) {
    const auto& rows = j.at("values");
    if (!rows.is_array() || rows.empty()) throw Error(ErrorKind::invalid_argument, "grid values must be a non-empty array");
    const auto width = static_cast<Eigen::Index>(rows.front().size());
    Matrix values(static_cast<Eigen::Index>(rows.size()), width);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != width)
            throw Error(ErrorKind::dimension_mismatch, "grid rows have different widths");
        for (Eigen::Index c = 0; c < width; ++c) values(static_cast<Eigen::Index>(r), c) = rows[r][c].get<double>();
    }
    if (j.contains("n") && j.at("n").get<long>() != values.rows())
        throw Error(ErrorKind::dimension_mismatch, "node count n differs from the number of value rows");
    return GridFunction(j.at("x_lo").get<double>(), j.at("x_hi").get<double>(), j.at("dx").get<double>(),
                        std::move(values));
}

json to_json(const ConditionReport& report) {
    const auto& w = report.worst_point;
    return {{"passed", report.passed},
            {"c", report.c},
            {"epsilon", report.epsilon},
            {"worst_margin", finite_or_null(report.worst_margin)},
            {"worst_point",
             {{"t", w.t},
              {"x", w.x},
              {"y_state", vector_json(w.y_state)},
              {"z", matrix_json(w.z)},
              {"direction", vector_json(w.direction)}}},
            {"samples_evaluated", report.samples_evaluated},
            {"mode", report.mode}};
}

json to_json(const SufficientReport& report) {
    return {{"condition", report.condition},
            {"applicable", report.applicable},
            {"passed", report.passed},
            {"points_evaluated", report.points_evaluated},
            {"first_failure", report.first_failure >= 0 ? json(report.first_failure) : json(nullptr)}};
}

json to_json(const SegmentSolution& seg) {
    json u = json::array();
    for (const auto& gf : seg.u) u.push_back(to_json(gf));
    json v = json::array();
    for (const auto& gf : seg.v) v.push_back(to_json(gf));
    return {{"t_start", seg.t_start}, {"t_end", seg.t_end}, {"J", seg.steps()}, {"u", u}, {"v", v}};
}

json to_json(const GlobalSolution& sol) {
    json segments = json::array();
    for (int k = 0; k < sol.m(); ++k) {
        const auto& seg = sol.segments[k];
        segments.push_back({{"index", k + 1},
                            {"t_start", seg.t_start},
                            {"t_end", seg.t_end},
                            {"J", seg.steps()},
                            {"inner_iterations_max_used", seg.inner_iterations_max_used},
                            {"worst_outside_mass", seg.worst_outside_mass}});
    }
    json lipschitz = json::array();
    for (std::size_t i = 0; i < sol.partition.size(); ++i)
        lipschitz.push_back({{"i", i}, {"T_i", sol.partition[i]}, {"lipschitz", sol.measured_lipschitz[i]}});
    return {{"m", sol.m()},
            {"partition", sol.partition},
            {"segments", segments},
            {"lipschitz", lipschitz},
            {"fitted_C_K", sol.fitted_C_K},
            {"delta0", sol.delta0 > 0.0 ? json(sol.delta0) : json(nullptr)},
            {"g_0", to_json(sol.g_funcs.front())}};
}

json to_json(const ConditionProfile& profile) {
    return {{"c", profile.c},
            {"key", to_string(profile.key)},
            {"sufficient_1", to_string(profile.sufficient_1)},
            {"sufficient_2", to_string(profile.sufficient_2)},
            {"sufficient_3", to_string(profile.sufficient_3)}};
}

json registry_listing() {
    json out = json::array();
    for (const auto& name : problem_names()) {
        const OracleEntry e = get_problem(name);
        json params = json::object();
        for (const auto& [k, v] : e.params) params[k] = v;
        out.push_back({{"name", e.name},
                       {"description", e.description},
                       {"parameters", params},
                       {"condition_profile", to_json(e.condition_profile)},
                       {"has_analytic", e.analytic.has_value()}});
    }
    return out;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void write_paths_csv(std::ostream& out, const PathBundle& bundle) {
    bundle.check();
    const int n = bundle.dims.n;
    const int d = bundle.dims.d;
    out << "t,path_id,X";
    for (int i = 1; i <= n; ++i) out << ",Y_" << i;
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= d; ++j) out << ",Z_" << i << j;
    out << '\n';
    for (std::size_t p = 0; p < bundle.paths.size(); ++p) {
        const auto& path = bundle.paths[p];
        for (std::size_t s = 0; s < bundle.time_grid.size(); ++s) {
            const auto r = static_cast<Eigen::Index>(s);
            out << format_double(bundle.time_grid[s]) << ',' << p << ',' << format_double(path.x(r));
            for (int i = 0; i < n; ++i) out << ',' << format_double(path.y(r, i));
            for (int k = 0; k < n * d; ++k) out << ',' << format_double(path.z(r, k));
            out << '\n';
        }
    }
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace fbsde
