#pragma once

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

#include <json.hpp>

#include "loja/config.hpp"
#include "loja/flow.hpp"
#include "loja/lojasiewicz.hpp"
#include "loja/morse_bott.hpp"
#include "loja/version.hpp"

namespace loja {

using json = nlohmann::ordered_json;

namespace detail {

inline void dump_json_to(const json& j, std::string& out, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
    const std::string pad_in(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in + json(it.key()).dump() + ": ";
                dump_json_to(it.value(), out, indent, depth + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            bool first = true;
            for (const auto& el : j) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                dump_json_to(el, out, indent, depth + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case json::value_t::number_float: {
            double v = j.get<double>();
            if (std::isnan(v)) {
                out += "null";
                return;
            }
            // JSON has no infinities; saturate at the largest finite double.
            if (std::isinf(v)) v = std::copysign(1.7976931348623157e308, v);
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out += buf;
            // Keep floats recognizably floats.
            if (out.find_first_of(".eE", out.size() - std::strlen(buf)) == std::string::npos)
                out += ".0";
            return;
        }
        default:
            out += j.dump();
            return;
    }
}

} // namespace detail

/// Serialize with every float at 17 significant digits so identical inputs
/// and configuration produce byte-identical reports.
inline std::string dump_json(const json& j, int indent = 2) {
    std::string out;
    detail::dump_json_to(j, out, indent, 0);
    out += "\n";
    return out;
}

inline json to_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline json to_json(const ExponentEstimate& e) {
    json j;
    j["theta_hat"] = e.theta_hat;
    j["method"] = to_string(e.method);
    j["fit_residual"] = e.fit_residual;
    j["n_samples"] = e.n_samples;
    j["radii_range"] = {e.radii_range[0], e.radii_range[1]};
    j["constant_hat"] = e.constant_hat ? json(*e.constant_hat) : json(nullptr);
    j["flags"] = e.flags;
    return j;
}

inline json to_json(const MorseBottVerdict& v) {
    json j;
    j["kind"] = to_string(v.kind);
    j["kernel_dim"] = v.kernel_dim;
    switch (v.kind) {
        case VerdictKind::MorseBott:
            j["critical_dim"] = v.critical_dim;
            break;
        case VerdictKind::NotMorseBott:
            j["order"] = v.order;
            j["direction"] = to_json(v.direction);
            j["exponent_bound"] = v.exponent_bound;
            break;
        case VerdictKind::Inconclusive:
            j["max_order_checked"] = v.max_order_checked;
            break;
        default:
            break;
    }
    json d;
    d["gradient_norm"] = v.diagnostics.gradient_norm;
    d["rank_gap"] = v.diagnostics.rank_gap;
    d["ill_conditioned_split"] = v.diagnostics.ill_conditioned_split;
    d["exact_elimination"] = v.diagnostics.exact_elimination;
    d["kernel_tol"] = v.diagnostics.kernel_tol;
    d["vanish_tol"] = v.diagnostics.vanish_tol;
    d["notes"] = v.diagnostics.notes;
    j["diagnostics"] = d;
    return j;
}

inline json to_json(const MarginReport& r) {
    json j;
    j["theta"] = r.theta;
    j["constant"] = r.constant;
    j["min_margin"] = r.min_margin;
    j["worst_point"] = to_json(r.worst_point);
    j["n_samples"] = r.n_samples;
    j["pass"] = r.pass;
    return j;
}

inline json to_json(const DecayFit& f) {
    json j;
    j["kind"] = to_string(f.kind);
    if (f.kind == DecayFit::Kind::exponential)
        j["rate"] = f.rate;
    else
        j["beta"] = f.beta;
    j["residual"] = f.residual;
    j["window"] = {f.window_begin, f.window_end};
    j["n_samples"] = f.n_samples;
    return j;
}

inline json to_json(const BoundReport& r) {
    json j;
    j["c"] = r.c;
    j["theta"] = r.theta;
    j["gamma"] = r.gamma;
    j["a"] = r.a;
    j["branch"] = r.branch;
    j["max_violation"] = r.max_violation;
    j["t_worst"] = r.t_worst;
    j["pass"] = r.pass;
    j["constants_note"] = r.constants_note;
    j["interior_c1"] = r.interior_c1;
    return j;
}

inline json to_json(const Config& cfg) {
    json j;
    for (const auto& [key, value] : cfg.snapshot()) j[key] = value;
    return j;
}

/// Write one trajectory row per accepted step, full double precision.
inline std::string trajectory_csv(const FlowTrajectory& traj) {
    std::string out = "t";
    const int d = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
    for (int i = 1; i <= d; ++i) out += ",x" + std::to_string(i);
    out += ",f,gradnorm\n";
    char buf[40];
    const auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out += buf;
        out += sep;
    };
    for (std::size_t k = 0; k < traj.size(); ++k) {
        put(traj.times[k], ',');
        for (int i = 0; i < d; ++i) put(traj.states[k][i], ',');
        put(traj.f_values[k], ',');
        std::snprintf(buf, sizeof(buf), "%.17g", traj.grad_norms[k]);
        out += buf;
        out += '\n';
    }
    return out;
}

} // namespace loja
