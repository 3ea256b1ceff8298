#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loja/config.hpp"
#include "loja/errors.hpp"
#include "loja/lojasiewicz.hpp"
#include "loja/poly.hpp"

namespace loja {

enum class FlowTermination { time_limit, gradient_floor, step_failure };

inline const char* to_string(FlowTermination t) {
    switch (t) {
        case FlowTermination::time_limit: return "time_limit";
        case FlowTermination::gradient_floor: return "gradient_floor";
        case FlowTermination::step_failure: return "step_failure";
    }
    return "?";
}

/// Accepted steps of a negative-gradient-flow integration. Energy values are
/// nonincreasing up to integrator tolerance; times strictly increase.
struct FlowTrajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<double> f_values;
    std::vector<double> grad_norms;
    std::vector<double> f_scales; // sum of absolute term values: cancellation scale
    FlowTermination terminated_by = FlowTermination::time_limit;

    std::size_t size() const { return times.size(); }
};

struct FlowOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double grad_floor = 1e-10;
    double fixed_step = 0.0; // > 0: disable adaptivity (used by order checks)
    long max_steps = 50'000'000;

    static FlowOptions from(const Config& cfg) {
        FlowOptions o;
        o.rtol = cfg.flow_rtol;
        o.atol = cfg.flow_atol;
        o.grad_floor = cfg.flow_grad_floor;
        return o;
    }
};

/// Integrate dx/dt = -grad f(x) with the Dormand-Prince 5(4) embedded pair.
/// Stops at t_end, at the gradient floor, or on step-size underflow (only
/// reachable when f is unbounded below along the orbit).
inline FlowTrajectory integrate(const Poly& f, const Vec& x0, double t_end,
                                const FlowOptions& opts = {}) {
    if (static_cast<int>(x0.size()) != f.dim())
        throw dimension_mismatch("integrate: point dimension mismatch");
    if (!(t_end > 0)) throw input_error("integrate: t_end must be positive");

    const std::vector<Poly> grads = f.gradient();
    const int d = f.dim();
    const auto rhs = [&](const Vec& x) {
        Vec g(d);
        for (int i = 0; i < d; ++i) g[i] = -grads[i](x);
        return g;
    };

    // Dormand-Prince coefficients; the system is autonomous, so the stage
    // times never enter.
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    FlowTrajectory traj;
    Vec x = x0;
    double t = 0.0;
    Vec k1 = rhs(x);

    const auto record = [&](double time, const Vec& state, double gradnorm) {
        traj.times.push_back(time);
        traj.states.push_back(state);
        traj.f_values.push_back(f(state));
        traj.grad_norms.push_back(gradnorm);
        traj.f_scales.push_back(f.eval_abs(state));
    };
    record(0.0, x, k1.norm());

    const double f0 = traj.f_values.front();
    if (k1.norm() < opts.grad_floor) {
        traj.terminated_by = FlowTermination::gradient_floor;
        return traj;
    }

    double h = opts.fixed_step > 0 ? opts.fixed_step
                                   : std::min(t_end, 0.01 * (1.0 + x.norm()) / (1.0 + k1.norm()));
    bool done = false;
    for (long step = 0; step < opts.max_steps && !done; ++step) {
        h = std::min(h, t_end - t);
        if (h < 1e-14 * std::max(1.0, std::abs(t))) {
            traj.terminated_by = FlowTermination::step_failure;
            return traj;
        }

        const Vec k2 = rhs(x + h * (a21 * k1));
        const Vec k3 = rhs(x + h * (a31 * k1 + a32 * k2));
        const Vec k4 = rhs(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec k5 = rhs(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec k6 = rhs(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Vec x5 = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vec k7 = rhs(x5); // first stage of the next step (FSAL)
        const Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double en = 0.0;
        for (int i = 0; i < d; ++i) {
            const double sc = opts.atol + opts.rtol * std::max(std::abs(x[i]), std::abs(x5[i]));
            en += (err[i] / sc) * (err[i] / sc);
        }
        en = std::sqrt(en / d);

        const bool accept = opts.fixed_step > 0 || en <= 1.0;
        if (accept) {
            t += h;
            x = x5;
            k1 = k7;
            const double gn = k1.norm();
            record(t, x, gn);
            if (traj.f_values.back() >
                traj.f_values[traj.f_values.size() - 2] + 1e-9 * (1.0 + std::abs(f0)))
                throw numeric_error("integrate: energy increased beyond tolerance");
            if (gn < opts.grad_floor) {
                traj.terminated_by = FlowTermination::gradient_floor;
                return traj;
            }
            if (t >= t_end * (1.0 - 1e-15)) done = true;
        }
        if (opts.fixed_step <= 0) {
            const double factor =
                en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
            h *= factor;
        }
    }
    if (!done) throw numeric_error("integrate: step budget exhausted");
    traj.terminated_by = FlowTermination::time_limit;
    return traj;
}

struct DecayFit {
    enum class Kind { exponential, power };
    Kind kind = Kind::exponential;
    double rate = 0.0; // exponential: f ~ exp(-rate * t)
    double beta = 0.0; // power: f ~ t^(-beta)
    double residual = 0.0;
    double window_begin = 0.0, window_end = 0.0;
    int n_samples = 0;
};

inline const char* to_string(DecayFit::Kind k) {
    return k == DecayFit::Kind::exponential ? "exponential" : "power";
}

namespace detail {

struct LineFit {
    double slope = 0.0, intercept = 0.0, rms = 0.0;
    bool ok = false;
};

inline LineFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
    LineFit fit;
    const std::size_t n = xs.size();
    if (n < 2) return fit;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ys[i] - (fit.slope * xs[i] + fit.intercept);
        rss += r * r;
    }
    fit.rms = std::sqrt(rss / n);
    fit.ok = true;
    return fit;
}

} // namespace detail

/// Model selection between the two decay regimes: fit log f against t
/// (exponential) and against log t (power) on the window after f has dropped
/// by the configured factor; the smaller residual wins.
inline DecayFit fit_decay(const FlowTrajectory& traj, const Config& cfg = {}) {
    if (traj.size() < 2) throw insufficient_decay("fit_decay: trajectory too short");
    const double f0 = traj.f_values.front();
    std::size_t begin = traj.size();
    for (std::size_t i = 0; i < traj.size(); ++i)
        if (traj.f_values[i] <= f0 / cfg.flow_fit_drop) {
            begin = i;
            break;
        }
    if (begin == traj.size())
        throw insufficient_decay("fit_decay: f did not drop by " +
                                 std::to_string(cfg.flow_fit_drop) + "x; no regime identifiable");

    std::vector<double> ts, log_ts, log_fs;
    for (std::size_t i = begin; i < traj.size(); ++i) {
        if (traj.f_values[i] <= cfg.sampling_floor || traj.times[i] <= 0) continue;
        // Once f is cancellation noise, the decay signal is gone.
        if (i < traj.f_scales.size() &&
            traj.f_values[i] <= detail::kCancelFloor * traj.f_scales[i])
            continue;
        ts.push_back(traj.times[i]);
        log_ts.push_back(std::log(traj.times[i]));
        log_fs.push_back(std::log(traj.f_values[i]));
    }
    if (static_cast<int>(ts.size()) < cfg.flow_min_fit_samples)
        throw insufficient_decay("fit_decay: only " + std::to_string(ts.size()) +
                                 " usable samples in the fitting window");

    const auto exp_fit = detail::least_squares(ts, log_fs);
    const auto pow_fit = detail::least_squares(log_ts, log_fs);

    DecayFit out;
    out.window_begin = ts.front();
    out.window_end = ts.back();
    out.n_samples = static_cast<int>(ts.size());
    const bool exp_ok = exp_fit.ok && exp_fit.slope < 0;
    const bool pow_ok = pow_fit.ok && pow_fit.slope < 0;
    if (!exp_ok && !pow_ok)
        throw insufficient_decay("fit_decay: neither regime fits a decaying f");
    if (exp_ok && (!pow_ok || exp_fit.rms <= pow_fit.rms)) {
        out.kind = DecayFit::Kind::exponential;
        out.rate = -exp_fit.slope;
        out.residual = exp_fit.rms;
    } else {
        out.kind = DecayFit::Kind::power;
        out.beta = -pow_fit.slope;
        out.residual = pow_fit.rms;
    }
    return out;
}

/// Map a decay regime to the Lojasiewicz exponent it implies along the flow:
/// df/dt = -||grad f||^2 <= -C^2 f^(2 theta) gives exponential decay exactly
/// when theta = 1/2 and f ~ t^(-1/(2 theta - 1)) otherwise.
inline ExponentEstimate exponent_from_flow(const DecayFit& fit) {
    ExponentEstimate e;
    e.method = ExponentEstimate::Method::flow;
    e.fit_residual = fit.residual;
    e.n_samples = fit.n_samples;
    if (fit.kind == DecayFit::Kind::exponential) {
        e.theta_hat = 0.5;
        e.constant_hat = std::sqrt(fit.rate);
        return e;
    }
    if (fit.beta <= 0) throw input_error("exponent_from_flow: power fit with beta <= 0");
    const double theta = (fit.beta + 1.0) / (2.0 * fit.beta);
    if (theta >= 1.0) {
        e.theta_hat = 0.999;
        e.flags.push_back("invalid: beta <= 1 maps to theta >= 1, outside [1/2, 1)");
    } else {
        e.theta_hat = theta;
    }
    return e;
}

/// The explicit convergence-rate envelope: a decaying exponential at
/// theta = 1/2 and a power law for theta in (1/2, 1). The branch is selected
/// by |theta - 1/2| < 1e-12, never by continuity.
inline double psi_bound(double t, double c, double theta, double gamma, double a) {
    if (!(c > 0)) throw input_error("psi_bound: c must be positive");
    if (!(gamma > a)) throw input_error("psi_bound: gamma must exceed a");
    if (!(t >= 0)) throw input_error("psi_bound: t must be nonnegative");
    if (theta < 0.5 - 1e-12 || theta >= 1.0)
        throw input_error("psi_bound: theta must lie in [1/2, 1)");
    if (std::abs(theta - 0.5) < 1e-12)
        return (2.0 / c) * std::sqrt(gamma - a) * std::exp(-c * c * t / 2.0);
    const double base = c * c * (2.0 * theta - 1.0) * t + std::pow(gamma - a, 1.0 - 2.0 * theta);
    return std::pow(base, -(1.0 - theta) / (2.0 * theta - 1.0)) / (c * (1.0 - theta));
}

struct BoundReport {
    double c = 0.0, theta = 0.0, gamma = 0.0, a = 0.0;
    std::string branch;            // "exponential" or "power"
    double max_violation = 0.0;    // max over steps of ||u(t) - u_inf|| - Psi(t)
    double t_worst = 0.0;
    bool pass = false;
    std::string constants_note;    // provenance of c, gamma, a
    double interior_c1 = 1.0;      // a priori interior estimate: identically 1 on R^d
};

/// Check ||u(t) - u_inf|| <= Psi(t) at every accepted step, with u_inf the
/// floor-terminated final state.
inline BoundReport check_bound(const FlowTrajectory& traj, double c, double theta, double gamma,
                               double a, const Config& cfg = {}) {
    if (traj.terminated_by != FlowTermination::gradient_floor)
        throw not_converged("check_bound: trajectory did not reach the gradient floor");
    BoundReport rep;
    rep.c = c;
    rep.theta = theta;
    rep.gamma = gamma;
    rep.a = a;
    rep.branch = std::abs(theta - 0.5) < 1e-12 ? "exponential" : "power";
    rep.max_violation = -std::numeric_limits<double>::infinity();
    const Vec& u_inf = traj.states.back();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double v = (traj.states[i] - u_inf).norm() - psi_bound(traj.times[i], c, theta, gamma, a);
        if (v > rep.max_violation) {
            rep.max_violation = v;
            rep.t_worst = traj.times[i];
        }
    }
    rep.pass = rep.max_violation <= cfg.bound_pass_tol * (1.0 + traj.states.front().norm());
    return rep;
}

} // namespace loja
