#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "loja/errors.hpp"

namespace loja {

/// Every tolerance and knob used by the library, addressable by dotted key in
/// a config file (`key = value`, `#` comments) or via CLI `--set key=value`.
/// Reports embed the full snapshot so results are reproducible.
struct Config {
    // poly
    double poly_prune_eps = 1e-14;

    // kernel splitting / classification
    double kernel_tol = 1e-8;        // |lambda| <= tol * max|lambda| joins the kernel
    double rank_gap_warn = 1e3;      // smaller rank gaps flag an ill-conditioned split
    int max_order = 8;               // reduced-function Taylor order examined
    double crit_tol = 1e-8;          // gradient norm threshold for "critical point"
    double vanish_tol = 1e-10;       // relative floor for "coefficient is zero" in g
    int sphere_samples_per_dim = 512;
    int ascent_steps = 20;

    // Newton solvers (branch solve, quadratic factorization)
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
    double trust_factor = 0.5;       // fraction of the Kantorovich contraction radius
    double trust_radius = 0.0;       // >0 overrides the heuristic
    double factor_neighborhood = 0.5; // max ||B-A||/||A|| accepted by factor_quadratic
    int quadrature_nodes = 16;

    // sampling estimator
    double sampling_r_min = 1e-4;
    double sampling_r_max = 1e-1;
    int sampling_shells = 24;
    int sampling_dirs = 256;
    int sampling_bins = 20;
    int sampling_min_bins = 5;
    double sampling_floor = 1e-300;  // |f| and ||grad f|| below this carry no slope
    int sampling_refine_starts = 8;  // per-shell worst-direction descents (0 disables)
    int sampling_refine_steps = 60;
    int sampling_polish_passes = 4;  // level-set polish sweeps over the bin minimizers
    double window_decades = 4.0;     // fit the lowest decades: theta is an asymptotic object
    double theta_clamp = 0.999;
    double low_theta_flag = 0.45;

    // gradient flow
    double flow_rtol = 1e-8;
    double flow_atol = 1e-10;
    double flow_grad_floor = 1e-10;
    double flow_t_end = 5000.0;
    double flow_fit_drop = 10.0;     // fitting window starts once f falls below f0/drop
    int flow_min_fit_samples = 20;
    double bound_pass_tol = 1e-9;    // scaled by (1 + ||x0||) in check_bound

    // cli orchestration
    bool analyze_flow = false;       // run the flow pipeline inside `analyze`
    int reduce_grid = 5;

    void set(const std::string& key, const std::string& value) {
        if (!try_set(key, value))
            throw input_error("unknown config key: " + key);
    }

    /// All keys with current values, in declaration order.
    std::vector<std::pair<std::string, std::string>> snapshot() const;

    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw input_error("cannot open config file: " + path);
        Config cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            if (eq == std::string::npos)
                throw input_error("config line " + std::to_string(lineno) + ": expected key = value");
            cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return cfg;
    }

    /// Explicit path, else $LOJATOOL_CONFIG, else defaults.
    static Config load(const std::string& path) {
        if (!path.empty()) return from_file(path);
        if (const char* env = std::getenv("LOJATOOL_CONFIG"); env && *env)
            return from_file(env);
        return Config{};
    }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    }

    static double to_double(const std::string& v) {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw input_error("bad numeric config value: " + v);
        return x;
    }

    static int to_int(const std::string& v) {
        std::size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw input_error("bad integer config value: " + v);
        return x;
    }

    static bool to_bool(const std::string& v) {
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw input_error("bad boolean config value: " + v);
    }

    bool try_set(const std::string& key, const std::string& value);
};

namespace detail {

template <class T>
std::string config_str(T v) {
    if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
    else if constexpr (std::is_same_v<T, int>) return std::to_string(v);
    else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
}

} // namespace detail

// clang-format off
#define LOJA_CONFIG_FIELDS(X)                       \
    X(poly_prune_eps,      "poly.prune_eps",        double) \
    X(kernel_tol,          "kernel.tol",            double) \
    X(rank_gap_warn,       "kernel.rank_gap_warn",  double) \
    X(max_order,           "classify.max_order",    int)    \
    X(crit_tol,            "classify.crit_tol",     double) \
    X(vanish_tol,          "classify.vanish_tol",   double) \
    X(sphere_samples_per_dim, "classify.sphere_samples", int) \
    X(ascent_steps,        "classify.ascent_steps", int)    \
    X(newton_tol,          "newton.tol",            double) \
    X(newton_max_iter,     "newton.max_iter",       int)    \
    X(trust_factor,        "trust.factor",          double) \
    X(trust_radius,        "trust.radius",          double) \
    X(factor_neighborhood, "factor.neighborhood",   double) \
    X(quadrature_nodes,    "quadrature.nodes",      int)    \
    X(sampling_r_min,      "sampling.r_min",        double) \
    X(sampling_r_max,      "sampling.r_max",        double) \
    X(sampling_shells,     "sampling.shells",       int)    \
    X(sampling_dirs,       "sampling.dirs_per_shell", int)  \
    X(sampling_bins,       "sampling.bins",         int)    \
    X(sampling_min_bins,   "sampling.min_bins",     int)    \
    X(sampling_floor,      "sampling.floor",        double) \
    X(sampling_refine_starts, "sampling.refine_starts", int) \
    X(sampling_refine_steps,  "sampling.refine_steps",  int) \
    X(sampling_polish_passes, "sampling.polish_passes", int) \
    X(window_decades,      "sampling.window_decades", double) \
    X(theta_clamp,         "sampling.theta_clamp",  double) \
    X(low_theta_flag,      "sampling.low_theta_flag", double) \
    X(flow_rtol,           "flow.rtol",             double) \
    X(flow_atol,           "flow.atol",             double) \
    X(flow_grad_floor,     "flow.grad_floor",       double) \
    X(flow_t_end,          "flow.t_end",            double) \
    X(flow_fit_drop,       "flow.fit_drop",         double) \
    X(flow_min_fit_samples,"flow.min_fit_samples",  int)    \
    X(bound_pass_tol,      "bound.pass_tol",        double) \
    X(analyze_flow,        "analyze.flow",          bool)   \
    X(reduce_grid,         "reduce.grid",           int)
// clang-format on

inline bool Config::try_set(const std::string& key, const std::string& value) {
#define LOJA_SET_FIELD(field, name, type)                                     \
    if (key == name) {                                                        \
        if constexpr (std::is_same_v<type, double>) field = to_double(value); \
        else if constexpr (std::is_same_v<type, int>) field = to_int(value);  \
        else field = to_bool(value);                                          \
        return true;                                                          \
    }
    LOJA_CONFIG_FIELDS(LOJA_SET_FIELD)
#undef LOJA_SET_FIELD
    return false;
}

inline std::vector<std::pair<std::string, std::string>> Config::snapshot() const {
    std::vector<std::pair<std::string, std::string>> out;
#define LOJA_SNAP_FIELD(field, name, type) out.emplace_back(name, detail::config_str(field));
    LOJA_CONFIG_FIELDS(LOJA_SNAP_FIELD)
#undef LOJA_SNAP_FIELD
    return out;
}

} // namespace loja
