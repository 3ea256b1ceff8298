// lojatool: numerical critical-point analysis for multivariate polynomials.
// Subcommands: analyze, monomial, flow, reduce, exponent.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loja/loja.hpp"

namespace {

using namespace loja;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Poly load_poly(const std::string& arg) {
    if (!arg.empty() && arg[0] == '@') return parse_poly(read_file(arg.substr(1)));
    return parse_poly(arg);
}

Vec parse_point(const std::string& text, int dim) {
    if (text.empty()) return Vec::Zero(dim);
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        vals.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw input_error("bad coordinate: " + item);
    }
    if (static_cast<int>(vals.size()) != dim)
        throw input_error("point has " + std::to_string(vals.size()) + " coordinates, expected " +
                          std::to_string(dim));
    Vec x(dim);
    for (int i = 0; i < dim; ++i) x[i] = vals[i];
    return x;
}

MultiIndex parse_multi_index(const std::string& text) {
    MultiIndex n;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        const int v = std::stoi(item, &pos);
        if (pos != item.size() || v < 0) throw input_error("bad exponent: " + item);
        n.push_back(v);
    }
    if (n.empty()) throw input_error("empty multi-index");
    return n;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw input_error("cannot write: " + out_path);
    out << text;
}

Config make_config(const std::string& path, const std::vector<std::string>& sets) {
    Config cfg = Config::load(path);
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw input_error("--set expects key=value, got: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

json wrap_report(json body, json timings) {
    json rep;
    rep["report_version"] = kReportVersion;
    rep["body"] = std::move(body);
    rep["timings"] = std::move(timings);
    return rep;
}

int cmd_analyze(const std::string& poly_text, const std::string& at, const Config& cfg,
                bool with_flow, const std::string& out_path) {
    const auto t0 = Clock::now();
    json timings;

    const Poly f = load_poly(poly_text);
    const Vec x0 = parse_point(at, f.dim());

    json body;
    body["input"] = {{"poly", to_text(f)}, {"at", to_json(x0)}, {"dim", f.dim()}};

    auto t = Clock::now();
    const MorseBottVerdict verdict = classify(f, x0, cfg.max_order, cfg);
    timings["classify_ms"] = ms_since(t);
    body["verdict"] = to_json(verdict);
    if (verdict.reduced)
        body["verdict"]["diagnostics"]["reduced_poly"] = to_text(*verdict.reduced);

    t = Clock::now();
    const ExponentEstimate est = estimate_sampling(f, x0, cfg);
    timings["sampling_ms"] = ms_since(t);
    body["exponent_sampling"] = to_json(est);

    const Mat H = f.hessian_at(x0);
    if (H.norm() > 0) {
        t = Clock::now();
        const auto margin = verify_inequality(f, x0, 0.5, quadratic_constant(H, cfg.kernel_tol), cfg);
        timings["inequality_ms"] = ms_since(t);
        body["inequality_check"] = to_json(margin);
    } else {
        body["inequality_check"] = nullptr;
    }

    body["exponent_flow"] = nullptr;
    body["decay_fit"] = nullptr;
    body["bound_check"] = nullptr;
    if (with_flow) {
        t = Clock::now();
        // Start the flow off the critical point, at the outer sampling radius
        // along a deterministic direction.
        const Vec dir = detail::sphere_directions(f.dim(), 1).front();
        const Vec start = x0 + cfg.sampling_r_max * dir;
        const auto traj = integrate(f, start, cfg.flow_t_end, FlowOptions::from(cfg));
        timings["flow_ms"] = ms_since(t);
        try {
            const DecayFit fit = fit_decay(traj, cfg);
            body["decay_fit"] = to_json(fit);
            const ExponentEstimate ef = exponent_from_flow(fit);
            body["exponent_flow"] = to_json(ef);
            if (traj.terminated_by == FlowTermination::gradient_floor) {
                const double theta = ef.theta_hat;
                const double c = verified_constant(f, x0, theta, cfg);
                double gamma = traj.f_values.front();
                for (double fv : traj.f_values) gamma = std::max(gamma, fv);
                const double a = traj.f_values.back();
                auto rep = check_bound(traj, c, theta, gamma, a, cfg);
                rep.constants_note = "c sampled from the inequality; gamma/a from the trajectory hull";
                body["bound_check"] = to_json(rep);
            }
        } catch (const numeric_error& e) {
            body["decay_fit"] = {{"error", e.what()}};
        }
    }

    body["config"] = to_json(cfg);
    body["tool_version"] = kVersion;
    timings["total_ms"] = ms_since(t0);
    emit(dump_json(wrap_report(std::move(body), std::move(timings))), out_path);
    return 0;
}

int cmd_monomial(const std::string& index_text, const std::string& format,
                 const std::string& out_path) {
    const MultiIndex n = parse_multi_index(index_text);
    const auto [theta, N] = monomial_exponent(n);
    if (format == "csv") {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g\n", theta);
        emit(buf, out_path);
    } else {
        json j;
        j["multi_index"] = n;
        j["N"] = N;
        j["theta"] = theta;
        emit(dump_json(j), out_path);
    }
    return 0;
}

int cmd_flow(const std::string& poly_text, const std::string& at, double t_end,
             const std::string& out_csv, const Config& cfg) {
    const Poly f = load_poly(poly_text);
    const Vec x0 = parse_point(at, f.dim());
    if (t_end <= 0) t_end = cfg.flow_t_end;
    const auto t0 = Clock::now();
    const auto traj = integrate(f, x0, t_end, FlowOptions::from(cfg));
    emit(trajectory_csv(traj), out_csv);

    json timings;
    timings["total_ms"] = ms_since(t0);
    json body;
    body["input"] = {{"poly", to_text(f)}, {"at", to_json(x0)}, {"t_end", t_end}};
    body["terminated_by"] = to_string(traj.terminated_by);
    body["steps"] = static_cast<int>(traj.size());
    const DecayFit fit = fit_decay(traj, cfg); // throws insufficient_decay when flat
    body["decay_fit"] = to_json(fit);
    body["exponent_flow"] = to_json(exponent_from_flow(fit));
    body["config"] = to_json(cfg);
    body["tool_version"] = kVersion;
    std::cout << dump_json(wrap_report(std::move(body), std::move(timings)));
    return 0;
}

int cmd_reduce(const std::string& poly_text, const std::string& at, int grid, const Config& cfg,
               const std::string& out_path) {
    const auto t0 = Clock::now();
    const Poly f = load_poly(poly_text);
    const Vec x0 = parse_point(at, f.dim());
    const int d = f.dim();

    Poly p = f.compose_affine(Mat::Identity(d, d), x0);
    p -= Poly::constant(d, p(Vec::Zero(d)));
    const KernelSplit split = kernel_split(p.hessian_at(Vec::Zero(d)), cfg.kernel_tol);
    if (split.complement_dim() == 0)
        throw input_error("reduce: Hessian vanishes; there is no quadratic block to normalize");
    SplittingProblem prob(p, split, SplitOptions::from(cfg));

    const double rho = prob.trust_radius();
    const Vec uz = Vec::Ones(split.complement_dim()).normalized();
    const Vec uxi = split.kernel_dim() > 0 ? Vec::Ones(split.kernel_dim()).normalized() : Vec(0);

    json cells = json::array();
    double max_resid = 0.0;
    const int nxi = split.kernel_dim() > 0 ? grid : 1;
    for (int i = 0; i < grid; ++i) {
        // Stay strictly inside the region; the boundary is the contraction limit.
        const double sz = 0.9 * rho * (grid == 1 ? 0.0 : -1.0 + 2.0 * i / (grid - 1));
        for (int j = 0; j < nxi; ++j) {
            const double sxi =
                split.kernel_dim() > 0 && nxi > 1 ? 0.9 * rho * (-1.0 + 2.0 * j / (nxi - 1)) : 0.0;
            const double resid =
                prob.normal_form_residual(sz * uz, split.kernel_dim() > 0 ? Vec(sxi * uxi) : Vec(0));
            max_resid = std::max(max_resid, resid);
            json cell;
            cell["z_scale"] = sz;
            cell["xi_scale"] = sxi;
            cell["residual"] = resid;
            cells.push_back(std::move(cell));
        }
    }

    json timings;
    timings["total_ms"] = ms_since(t0);
    json body;
    body["input"] = {{"poly", to_text(f)}, {"at", to_json(x0)}, {"grid", grid}};
    body["trust_radius"] = rho;
    body["kernel_dim"] = split.kernel_dim();
    body["rank_gap"] = split.rank_gap;
    body["cells"] = std::move(cells);
    body["max_residual"] = max_resid;
    body["config"] = to_json(cfg);
    body["tool_version"] = kVersion;
    emit(dump_json(wrap_report(std::move(body), std::move(timings))), out_path);
    return 0;
}

int cmd_exponent(const std::string& poly_text, const std::string& at, double theta, double constant,
                 const Config& cfg, const std::string& out_path) {
    const auto t0 = Clock::now();
    const Poly f = load_poly(poly_text);
    const Vec x0 = parse_point(at, f.dim());

    json body;
    body["input"] = {{"poly", to_text(f)}, {"at", to_json(x0)}};
    body["exponent_sampling"] = to_json(estimate_sampling(f, x0, cfg));
    if (theta > 0) {
        if (constant <= 0) throw input_error("--theta requires a positive --constant");
        body["inequality_check"] = to_json(verify_inequality(f, x0, theta, constant, cfg));
    } else {
        body["inequality_check"] = nullptr;
    }
    body["config"] = to_json(cfg);
    body["tool_version"] = kVersion;
    json timings;
    timings["total_ms"] = ms_since(t0);
    emit(dump_json(wrap_report(std::move(body), std::move(timings))), out_path);
    return 0;
}

int emit_error(const char* kind, const std::string& message, int code) {
    json j;
    j["report_version"] = kReportVersion;
    j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
    std::cout << dump_json(j);
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical critical-point analysis for multivariate polynomials"};
    app.require_subcommand(1);

    std::string poly_text, at, config_path, out_path, format = "json";
    std::vector<std::string> sets;
    bool with_flow = false;
    double t_end = 0.0, theta = 0.0, constant = 0.0;
    int grid = 0;
    std::string monomial_index;

    const auto add_common = [&](CLI::App* sub, bool needs_poly) {
        if (needs_poly)
            sub->add_option("--poly", poly_text, "polynomial text or @file")->required();
        sub->add_option("--at", at, "comma-separated point (default: origin)");
        sub->add_option("--config", config_path, "config file (fallback: $LOJATOOL_CONFIG)");
        sub->add_option("--set", sets, "override a config key, key=value")->take_all();
        sub->add_option("--out", out_path, "write the primary output to a file");
        sub->add_option("--format", format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    };

    auto* analyze = app.add_subcommand("analyze", "classify and estimate exponents");
    add_common(analyze, true);
    analyze->add_flag("--flow", with_flow, "also run the gradient-flow pipeline");

    auto* monomial = app.add_subcommand("monomial", "exact exponent of a monomial");
    monomial->add_option("index", monomial_index, "multi-index, e.g. 2,1")->required();
    add_common(monomial, false);

    auto* flow = app.add_subcommand("flow", "integrate the negative gradient flow");
    add_common(flow, true);
    flow->add_option("--t-end", t_end, "integration horizon");
    flow->get_option("--out")->required();

    auto* reduce = app.add_subcommand("reduce", "normal-form residual table");
    add_common(reduce, true);
    reduce->add_option("--grid", grid, "grid points per coordinate (default from config)");

    auto* exponent = app.add_subcommand("exponent", "sampling exponent estimate");
    add_common(exponent, true);
    exponent->add_option("--theta", theta, "verify the inequality at this exponent");
    exponent->add_option("--constant", constant, "constant for the verification");

    CLI11_PARSE(app, argc, argv);

    try {
        const Config cfg = make_config(config_path, sets);
        if (analyze->parsed())
            return cmd_analyze(poly_text, at, cfg, with_flow || cfg.analyze_flow, out_path);
        if (monomial->parsed()) return cmd_monomial(monomial_index, format, out_path);
        if (flow->parsed()) return cmd_flow(poly_text, at, t_end, out_path, cfg);
        if (reduce->parsed())
            return cmd_reduce(poly_text, at, grid > 0 ? grid : cfg.reduce_grid, cfg, out_path);
        if (exponent->parsed()) return cmd_exponent(poly_text, at, theta, constant, cfg, out_path);
    } catch (const input_error& e) {
        return emit_error("input_error", e.what(), 2);
    } catch (const numeric_error& e) {
        return emit_error("numeric_error", e.what(), 3);
    } catch (const std::exception& e) {
        return emit_error("internal_error", e.what(), 1);
    }
    return 0;
}
