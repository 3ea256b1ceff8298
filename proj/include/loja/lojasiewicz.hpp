#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "loja/config.hpp"
#include "loja/detail/sampling.hpp"
#include "loja/errors.hpp"
#include "loja/poly.hpp"

namespace loja {

struct ExponentEstimate {
    enum class Method { sampling, flow, exact_monomial };

    double theta_hat = 0.0;
    Method method = Method::sampling;
    double fit_residual = 0.0;
    int n_samples = 0;
    std::array<double, 2> radii_range{0.0, 0.0};
    std::optional<double> constant_hat;
    std::vector<std::string> flags;
};

inline const char* to_string(ExponentEstimate::Method m) {
    switch (m) {
        case ExponentEstimate::Method::sampling: return "sampling";
        case ExponentEstimate::Method::flow: return "flow";
        case ExponentEstimate::Method::exact_monomial: return "exact_monomial";
    }
    return "?";
}

/// Exact exponent of the monomial y^n: theta = 1 - 1/N with N the total
/// degree (N >= 2 so that the origin is critical).
inline std::pair<double, int> monomial_exponent(const MultiIndex& n) {
    int N = 0;
    for (int e : n) {
        if (e < 0) throw input_error("monomial_exponent: negative exponent");
        N += e;
    }
    if (N < 2)
        throw input_error("monomial_exponent: total degree must be >= 2 for a critical origin");
    return {1.0 - 1.0 / N, N};
}

/// Guaranteed inequality constant for the quadratic form <x, A x>/2:
/// C = lambda * sqrt(2 / Lambda) with lambda the smallest nonzero and Lambda
/// the largest singular value (Euclidean pairing, embedding constant 1).
inline double quadratic_constant(const Mat& A, double kernel_tol = 1e-8) {
    if (A.size() == 0) throw input_error("quadratic_constant: empty matrix");
    const Eigen::SelfAdjointEigenSolver<Mat> es(A);
    const Vec mags = es.eigenvalues().cwiseAbs();
    const double big = mags.maxCoeff();
    if (big == 0.0) throw input_error("quadratic_constant: zero matrix");
    double small = big;
    for (int i = 0; i < mags.size(); ++i)
        if (mags[i] > kernel_tol * big) small = std::min(small, mags[i]);
    return small * std::sqrt(2.0 / big);
}

namespace detail {

struct SampleSet {
    std::vector<double> log_f, log_g; // kept samples
    std::vector<Vec> points;
    double inner_max_f = 0.0; // max |f| over the innermost shell
    double outer_min_f = std::numeric_limits<double>::infinity(); // min |f| over the outermost
    double refined_max_f = 0.0; // largest |f| reached by a refined frontier point
};

/// Relative floor below which a compensated evaluation is cancellation noise
/// rather than signal.
inline constexpr double kCancelFloor = 1e-12;

/// First and second derivatives of one polynomial, shared by the sampler's
/// refinement passes.
struct Differentials {
    explicit Differentials(const Poly& p) : p(&p), grads(p.gradient()) {
        const int d = p.dim();
        hess.resize(d);
        for (int i = 0; i < d; ++i) {
            hess[i].resize(d);
            for (int j = i; j < d; ++j) hess[i][j] = grads[i].derivative(j);
        }
    }

    Vec grad_at(const Vec& x) const {
        Vec g(p->dim());
        for (int i = 0; i < p->dim(); ++i) g[i] = grads[i](x);
        return g;
    }

    Mat hess_at(const Vec& x) const {
        const int d = p->dim();
        Mat h(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                const double v = hess[i][j](x);
                h(i, j) = v;
                h(j, i) = v;
            }
        return h;
    }

    /// ||grad f|| scale from absolute term values (cancellation reference).
    double grad_abs_at(const Vec& x) const {
        double g2 = 0.0;
        for (const auto& gp : grads) {
            const double a = gp.eval_abs(x);
            g2 += a * a;
        }
        return std::sqrt(g2);
    }

    const Poly* p;
    std::vector<Poly> grads;
    std::vector<std::vector<Poly>> hess;
};

/// Minimize ||grad f|| along the level set of f through x0: project the
/// descent direction onto the level's tangent space and correct back to the
/// level by Newton steps along grad f. The sharp envelope at a level is this
/// constrained minimum, which shell sweeps cannot represent when the worst
/// set curves away from rays.
inline Vec level_polish(const Differentials& D, Vec x, double radius_cap, int steps) {
    const double c = (*D.p)(x);
    double g2 = D.grad_at(x).squaredNorm();
    double step = 0.25 * x.norm();
    for (int it = 0; it < steps; ++it) {
        const Vec g = D.grad_at(x);
        const double gn2 = g.squaredNorm();
        if (gn2 < 1e-300) break;
        Vec dir = -(D.hess_at(x) * g);
        dir -= (dir.dot(g) / gn2) * g;
        const double dn = dir.norm();
        if (dn < 1e-300) break;

        bool moved = false;
        for (int bt = 0; bt < 12 && !moved; ++bt) {
            Vec cand = x + (step / dn) * dir;
            // Two Newton corrections back onto the level.
            for (int nc = 0; nc < 2; ++nc) {
                const Vec gc = D.grad_at(cand);
                const double gcn2 = gc.squaredNorm();
                if (gcn2 < 1e-300) break;
                cand -= (((*D.p)(cand) - c) / gcn2) * gc;
            }
            const double cg2 = D.grad_at(cand).squaredNorm();
            if (cg2 < g2 && cand.norm() <= radius_cap &&
                std::abs((*D.p)(cand) - c) <= 1e-6 * std::abs(c) + 1e-300) {
                const bool tiny = g2 - cg2 <= 1e-12 * g2;
                x = cand;
                g2 = cg2;
                step *= 1.5;
                moved = true;
                if (tiny) return x;
            } else {
                step *= 0.5;
            }
        }
        if (!moved) break;
    }
    return x;
}

inline SampleSet collect_shell_samples(const Poly& p, const Config& cfg) {
    const int d = p.dim();
    const auto dirs = sphere_directions(d, cfg.sampling_dirs);
    const Differentials D(p);

    SampleSet s;
    // Points on or next to the critical set evaluate by cancellation; what
    // survives is term rounding, which would fake samples far below the true
    // envelope. Demand that both values carry signal. Returns |f| when kept.
    const auto keep = [&](const Vec& x) -> double {
        const double fv = std::abs(p(x));
        const double gv = D.grad_at(x).norm();
        if (fv <= cfg.sampling_floor || gv <= cfg.sampling_floor) return -1.0;
        if (fv <= kCancelFloor * p.eval_abs(x)) return -1.0;
        if (gv <= kCancelFloor * D.grad_abs_at(x)) return -1.0;
        s.log_f.push_back(std::log(fv));
        s.log_g.push_back(std::log(gv));
        s.points.push_back(x);
        return fv;
    };

    const int S = cfg.sampling_shells;
    for (int k = 0; k < S; ++k) {
        const double frac = S == 1 ? 0.0 : static_cast<double>(k) / (S - 1);
        const double r = cfg.sampling_r_min *
                         std::pow(cfg.sampling_r_max / cfg.sampling_r_min, frac);
        for (const auto& u : dirs) {
            const Vec x = r * u;
            const double fv = std::abs(p(x));
            if (k == 0) s.inner_max_f = std::max(s.inner_max_f, fv);
            if (k == S - 1 && fv > cfg.sampling_floor)
                s.outer_min_f = std::min(s.outer_min_f, fv);
            keep(x);
        }
    }

    // Worst-case directions can hug the critical set at angular scales the
    // direction sweep cannot resolve (a stiff quadratic block needs angular
    // resolution ~ r). Polish the best starts by projected descent of
    // ||grad f(r u)|| over the sphere, on a ladder dense enough that the
    // refined frontier lands in every bin.
    if (d > 1 && cfg.sampling_refine_starts > 0) {
        const int R = std::max(cfg.sampling_shells, 4 * cfg.sampling_bins);
        for (int k = 0; k < R; ++k) {
            const double frac = R == 1 ? 0.0 : static_cast<double>(k) / (R - 1);
            const double r = cfg.sampling_r_min *
                             std::pow(cfg.sampling_r_max / cfg.sampling_r_min, frac);

            // Candidate starts: the best sampled directions plus the
            // coordinate axes (worst directions are often axis-aligned and
            // the axes are exact there).
            std::vector<std::pair<double, int>> ranked;
            ranked.reserve(dirs.size());
            double shell_max_f = 0.0;
            for (int di = 0; di < static_cast<int>(dirs.size()); ++di) {
                ranked.emplace_back(D.grad_at(r * dirs[di]).norm(), di);
                shell_max_f = std::max(shell_max_f, std::abs(p(r * dirs[di])));
            }
            std::sort(ranked.begin(), ranked.end());

            std::vector<Vec> starts;
            const int nstarts =
                std::min<int>(cfg.sampling_refine_starts, static_cast<int>(ranked.size()));
            for (int si = 0; si < nstarts; ++si) starts.push_back(dirs[ranked[si].second]);
            for (int i = 0; i < d; ++i) {
                Vec axis = Vec::Zero(d);
                axis[i] = 1.0;
                starts.push_back(axis);
                starts.push_back(-axis);
            }

            // Only the shell's best settled refined point is an envelope
            // proxy: a descent that is still improving at the step budget is
            // sliding into the critical set (its gradient minimum on the
            // shell is zero), not converging to a frontier direction. Such
            // walkers are kept as ordinary samples but must not stretch the
            // window. A settled point is also disqualified when some walker
            // went well below it: the settled direction is then a stationary
            // stiff axis, not the shell's worst family.
            double best_phi = std::numeric_limits<double>::infinity();
            double best_fv = -1.0;
            double min_endpoint_phi = std::numeric_limits<double>::infinity();
            for (Vec u : starts) {
                double phi = D.grad_at(r * u).norm();
                double step = 0.3;
                bool settled = false;
                for (int it = 0; it < cfg.sampling_refine_steps && !settled; ++it) {
                    const Vec x = r * u;
                    Vec t = D.hess_at(x) * D.grad_at(x);
                    t -= u.dot(t) * u;
                    const double tn = t.norm();
                    if (tn < 1e-300) { // exactly stationary on the sphere
                        settled = true;
                        break;
                    }
                    bool moved = false;
                    for (int bt = 0; bt < 12; ++bt) {
                        const Vec cand = (u - (step / tn) * t).normalized();
                        const double cphi = D.grad_at(r * cand).norm();
                        if (cphi < phi) {
                            settled = phi - cphi <= 1e-12 * phi;
                            u = cand;
                            phi = cphi;
                            step *= 1.5;
                            moved = true;
                            break;
                        }
                        step *= 0.5;
                    }
                    // Out of improving steps this sweep: keep halving next
                    // sweep. Only zero tangents and vanishing improvements
                    // count as settling; a stalled walker never does.
                    (void)moved;
                }
                const double fv = keep(r * u);
                if (fv > 0) min_endpoint_phi = std::min(min_endpoint_phi, phi);
                if (settled && fv > kCancelFloor * shell_max_f && phi < best_phi) {
                    best_phi = phi;
                    best_fv = fv;
                }
            }
            if (best_phi > 2.0 * min_endpoint_phi) best_fv = -1.0;
            s.refined_max_f = std::max(s.refined_max_f, best_fv);
        }
    }
    return s;
}

inline Poly recenter(const Poly& f, const Vec& x0, const Config& cfg, const char* who) {
    if (static_cast<int>(x0.size()) != f.dim())
        throw dimension_mismatch(std::string(who) + ": point dimension mismatch");
    const int d = f.dim();
    Poly p = f.compose_affine(Mat::Identity(d, d), x0);
    p -= Poly::constant(d, p(Vec::Zero(d)));
    const double gn = p.gradient_at(Vec::Zero(d)).norm();
    if (gn > cfg.crit_tol * (1.0 + f.max_abs_coeff()))
        throw not_critical(std::string(who) + ": x0 is not a critical point (gradient norm " +
                           std::to_string(gn) + ")");
    return p;
}

} // namespace detail

/// Lower-envelope exponent estimate: sample shells around x0, bin by log|f|
/// over the window where the envelope is reachable inside the sampled
/// annulus, take the per-bin minimum of log||grad f||, and fit a line. The
/// slope is theta_hat, the intercept exponentiates to constant_hat.
inline ExponentEstimate estimate_sampling(const Poly& f, const Vec& x0, const Config& cfg = {}) {
    const Poly p = detail::recenter(f, x0, cfg, "estimate_sampling");
    auto s = detail::collect_shell_samples(p, cfg);
    if (s.log_f.empty())
        throw numeric_error("estimate_sampling: all samples vanish; f is flat on the sampled set");

    // Envelope window: a level set |f| = c is represented by worst-case
    // samples only for c between the innermost shell's max and the reach of
    // the refined frontier (without refinement: the outermost shell's min).
    // Outside that range the per-bin minimum is a shell artifact (the
    // worst-case direction is unreachable at sampled radii) and would bias
    // the slope. Degenerate windows fall back to the raw sample range.
    double lo = s.inner_max_f > cfg.sampling_floor ? std::log(s.inner_max_f)
                                                   : -std::numeric_limits<double>::infinity();
    double hi;
    if (s.refined_max_f > cfg.sampling_floor)
        hi = std::log(s.refined_max_f);
    else
        hi = std::isfinite(s.outer_min_f) ? std::log(s.outer_min_f)
                                          : std::numeric_limits<double>::infinity();
    if (!(hi > lo + std::log(10.0))) {
        // Degenerate upper end (critical set crossing the annulus, or a
        // refined walker landing below the inner cutoff): the lower cutoff is
        // still sound, so relax only the top.
        hi = *std::max_element(s.log_f.begin(), s.log_f.end());
        if (!std::isfinite(lo) || !(hi > lo))
            lo = *std::min_element(s.log_f.begin(), s.log_f.end());
        if (!(lo < hi))
            throw numeric_error("estimate_sampling: too few bins; |f| is constant over samples");
    }
    // The exponent is an asymptotic statement about |f| -> 0: wide windows
    // keep their lowest decades, where level sets reachable only through the
    // stiffest directions (a transient regime) no longer contribute.
    hi = std::min(hi, lo + cfg.window_decades * std::log(10.0));

    const int nbins = cfg.sampling_bins;
    std::vector<double> min_g(nbins, std::numeric_limits<double>::infinity());
    std::vector<double> at_f(nbins, 0.0);
    std::vector<int> argmin(nbins, -1);
    const auto bin_all = [&] {
        std::fill(min_g.begin(), min_g.end(), std::numeric_limits<double>::infinity());
        std::fill(argmin.begin(), argmin.end(), -1);
        for (std::size_t i = 0; i < s.log_f.size(); ++i) {
            if (s.log_f[i] < lo || s.log_f[i] > hi) continue;
            int bin = static_cast<int>((s.log_f[i] - lo) / (hi - lo) * nbins);
            bin = std::min(bin, nbins - 1);
            if (s.log_g[i] < min_g[bin]) {
                min_g[bin] = s.log_g[i];
                at_f[bin] = s.log_f[i];
                argmin[bin] = static_cast<int>(i);
            }
        }
    };
    bin_all();

    // The sharp envelope at a level is the constrained minimum of ||grad f||
    // on that level set, which a radial sweep cannot represent when the worst
    // set curves away from rays. Polish each bin minimizer along its level
    // and rebin with the improved samples; repeat passes so long descents
    // continue from where the previous pass stopped.
    if (p.dim() > 1 && cfg.sampling_refine_steps > 0) {
        const detail::Differentials D(p);
        const double cap = 2.0 * cfg.sampling_r_max;
        for (int pass = 0; pass < cfg.sampling_polish_passes; ++pass) {
            bool improved = false;
            for (int b = 0; b < nbins; ++b) {
                if (argmin[b] < 0) continue;
                const Vec polished =
                    detail::level_polish(D, s.points[argmin[b]], cap, cfg.sampling_refine_steps);
                const double fv = std::abs(p(polished));
                const double gv = D.grad_at(polished).norm();
                if (fv <= cfg.sampling_floor || gv <= cfg.sampling_floor) continue;
                if (fv <= detail::kCancelFloor * p.eval_abs(polished)) continue;
                if (gv <= detail::kCancelFloor * D.grad_abs_at(polished)) continue;
                if (std::log(gv) < min_g[b] - 1e-12) improved = true;
                s.log_f.push_back(std::log(fv));
                s.log_g.push_back(std::log(gv));
                s.points.push_back(polished);
            }
            bin_all();
            if (!improved) break;
        }
    }

    // The envelope is nondecreasing in |f|; a bin minimum above the running
    // minimum of the bins to its right never touched the worst-case direction.
    std::vector<double> xs, ys;
    double running = std::numeric_limits<double>::infinity();
    for (int b = nbins - 1; b >= 0; --b) {
        if (!std::isfinite(min_g[b])) continue;
        if (min_g[b] <= running) {
            running = min_g[b];
            xs.push_back(at_f[b]);
            ys.push_back(min_g[b]);
        }
    }
    std::reverse(xs.begin(), xs.end());
    std::reverse(ys.begin(), ys.end());
    if (static_cast<int>(xs.size()) < cfg.sampling_min_bins)
        throw numeric_error("estimate_sampling: too few bins (" + std::to_string(xs.size()) +
                            ") for a slope fit");

    // Ordinary least squares on the binned minima.
    const std::size_t n = xs.size();
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
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ys[i] - (slope * xs[i] + intercept);
        rss += r * r;
    }

    ExponentEstimate e;
    e.method = ExponentEstimate::Method::sampling;
    e.theta_hat = std::clamp(slope, 0.0, cfg.theta_clamp);
    if (slope > cfg.theta_clamp) e.flags.push_back("theta clamped below 1");
    if (e.theta_hat < cfg.low_theta_flag)
        e.flags.push_back("theta below 0.45 at a critical point: sampling radii are likely "
                          "too far from the critical set");
    e.fit_residual = std::sqrt(rss / n);
    if (e.fit_residual > 0.15)
        e.flags.push_back("high fit residual: the binned minima do not follow a single "
                          "power law and the estimate is unreliable");
    e.n_samples = static_cast<int>(s.log_f.size());
    e.radii_range = {cfg.sampling_r_min, cfg.sampling_r_max};
    e.constant_hat = std::exp(intercept);
    return e;
}

struct MarginReport {
    double theta = 0.0;
    double constant = 0.0;
    double min_margin = 0.0; // min over samples of ||grad f|| - C |f|^theta
    Vec worst_point;
    int n_samples = 0;
    bool pass = false;
};

/// Check ||grad f(x)|| >= C |f(x)|^theta over the sampled shells; a failing
/// check is a valid report, not an error.
inline MarginReport verify_inequality(const Poly& f, const Vec& x0, double theta, double C,
                                      const Config& cfg = {}) {
    const Poly p = detail::recenter(f, x0, cfg, "verify_inequality");
    const int d = p.dim();
    const auto dirs = detail::sphere_directions(d, cfg.sampling_dirs);
    const std::vector<Poly> grads = p.gradient();

    MarginReport rep;
    rep.theta = theta;
    rep.constant = C;
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cfg.sampling_shells; ++k) {
        const double frac =
            cfg.sampling_shells == 1 ? 0.0 : static_cast<double>(k) / (cfg.sampling_shells - 1);
        const double r = cfg.sampling_r_min *
                         std::pow(cfg.sampling_r_max / cfg.sampling_r_min, frac);
        for (const auto& u : dirs) {
            const Vec x = r * u;
            double g2 = 0.0;
            for (const auto& gp : grads) {
                const double gi = gp(x);
                g2 += gi * gi;
            }
            const double margin = std::sqrt(g2) - C * std::pow(std::abs(p(x)), theta);
            ++rep.n_samples;
            if (margin < rep.min_margin) {
                rep.min_margin = margin;
                rep.worst_point = x + x0;
            }
        }
    }
    rep.pass = rep.min_margin >= -1e-12 * (1.0 + C);
    return rep;
}

/// Largest constant verified on the sampled shells: the minimum over samples
/// of ||grad f|| / |f|^theta. The inequality with this constant holds on the
/// entire sample set by construction.
inline double verified_constant(const Poly& f, const Vec& x0, double theta,
                                const Config& cfg = {}) {
    const Poly p = detail::recenter(f, x0, cfg, "verified_constant");
    const auto s = detail::collect_shell_samples(p, cfg);
    if (s.log_f.empty()) throw numeric_error("verified_constant: no usable samples");
    double c = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.log_f.size(); ++i)
        c = std::min(c, std::exp(s.log_g[i] - theta * s.log_f[i]));
    return c;
}

/// Direct-sum extension f(x) + <y, A y>/2 on d + e variables; the exponent
/// of the sum matches the exponent of f whenever that is at least 1/2.
inline Poly direct_sum_extend(const Poly& f, const Mat& A) {
    const int e = static_cast<int>(A.rows());
    if (A.cols() != e) throw dimension_mismatch("direct_sum_extend: A must be square");
    if (e == 0 || A.norm() == 0.0) throw input_error("direct_sum_extend: zero quadratic block");
    if (!A.isApprox(A.transpose(), 1e-12))
        throw input_error("direct_sum_extend: A must be symmetric");

    const int d = f.dim();
    Poly out = f.widened(d + e);
    for (int i = 0; i < e; ++i)
        for (int j = i; j < e; ++j) {
            const double coeff = i == j ? 0.5 * A(i, i) : A(i, j);
            if (coeff == 0.0) continue;
            MultiIndex a(d + e, 0);
            a[d + i] += 1;
            a[d + j] += 1;
            out += Poly::monomial(d + e, a, coeff);
        }
    return out;
}

} // namespace loja
