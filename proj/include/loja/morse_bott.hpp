#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loja/config.hpp"
#include "loja/detail/sampling.hpp"
#include "loja/errors.hpp"
#include "loja/poly.hpp"
#include "loja/splitting.hpp"

namespace loja {

/// Eigendecomposition-based kernel split of a symmetric matrix: eigenvalues
/// with |lambda| <= tol * max|lambda| form the kernel. Eigenvector signs are
/// normalized (largest component positive) so identical inputs give identical
/// bases.
inline KernelSplit kernel_split(const Mat& H, double tol) {
    const int d = static_cast<int>(H.rows());
    if (H.cols() != d) throw dimension_mismatch("kernel_split: matrix must be square");
    if (!H.isApprox(H.transpose(), 1e-12))
        throw input_error("kernel_split: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    const Vec evals = es.eigenvalues();
    Mat evecs = es.eigenvectors();
    for (int j = 0; j < d; ++j) {
        int imax = 0;
        evecs.col(j).cwiseAbs().maxCoeff(&imax);
        if (evecs(imax, j) < 0) evecs.col(j) = -evecs.col(j);
    }

    const double lmax = evals.cwiseAbs().maxCoeff();
    std::vector<int> kernel_idx, compl_idx;
    for (int j = 0; j < d; ++j) {
        if (std::abs(evals[j]) <= tol * lmax)
            kernel_idx.push_back(j);
        else
            compl_idx.push_back(j);
    }

    KernelSplit s;
    s.dim = d;
    s.kernel_basis = Mat(d, kernel_idx.size());
    s.complement_basis = Mat(d, compl_idx.size());
    for (std::size_t k = 0; k < kernel_idx.size(); ++k)
        s.kernel_basis.col(k) = evecs.col(kernel_idx[k]);
    for (std::size_t k = 0; k < compl_idx.size(); ++k)
        s.complement_basis.col(k) = evecs.col(compl_idx[k]);

    const int nz = static_cast<int>(compl_idx.size());
    Mat a0 = s.complement_basis.transpose() * H * s.complement_basis;
    s.A0 = 0.5 * (a0 + a0.transpose());

    double kept = std::numeric_limits<double>::infinity(), dropped = 0.0;
    for (int j : compl_idx) kept = std::min(kept, std::abs(evals[j]));
    for (int j : kernel_idx) dropped = std::max(dropped, std::abs(evals[j]));
    s.rank_gap = (nz == 0 || dropped == 0.0) ? std::numeric_limits<double>::infinity()
                                             : kept / dropped;
    return s;
}

struct LowestOrderResult {
    int order = 0;
    Vec direction; // unit vector maximizing |g_m| over the sphere
};

/// Lowest nonvanishing homogeneous order m of g (with g, g', g'' vanishing at
/// 0) and the direction maximizing |g_m| on the unit sphere, found by a
/// deterministic low-discrepancy sweep refined by projected gradient ascent.
/// Empty for g identically zero.
inline std::optional<LowestOrderResult> lowest_order(const Poly& g,
                                                     int samples_per_dim = 512,
                                                     int ascent_steps = 20) {
    if (g.is_zero()) return std::nullopt;
    const int m = g.lowest_degree();
    if (m < 3)
        throw input_error("lowest_order: reduced function must vanish to second order at 0");
    const int c = g.dim();
    const Poly gm = g.homogeneous_part(m);

    const auto dirs = detail::sphere_directions(c, samples_per_dim * c);
    Vec best = dirs.front();
    double best_val = std::abs(gm(best));
    for (const auto& v : dirs) {
        const double val = std::abs(gm(v));
        if (val > best_val) {
            best_val = val;
            best = v;
        }
    }

    double step = 0.5;
    for (int it = 0; it < ascent_steps; ++it) {
        const double sign = gm(best) >= 0 ? 1.0 : -1.0;
        Vec grad = sign * gm.gradient_at(best);
        grad -= best.dot(grad) * best; // tangential component
        if (grad.norm() == 0.0) break;
        const Vec cand = (best + step * grad).normalized();
        if (std::abs(gm(cand)) > best_val) {
            best = cand;
            best_val = std::abs(gm(best));
            step *= 1.2;
        } else {
            step *= 0.5;
        }
    }
    return LowestOrderResult{m, best};
}

enum class VerdictKind { Morse, MorseBott, NotMorseBott, Constant, Inconclusive };

inline const char* to_string(VerdictKind k) {
    switch (k) {
        case VerdictKind::Morse: return "Morse";
        case VerdictKind::MorseBott: return "MorseBott";
        case VerdictKind::NotMorseBott: return "NotMorseBott";
        case VerdictKind::Constant: return "Constant";
        case VerdictKind::Inconclusive: return "Inconclusive";
    }
    return "?";
}

struct MorseBottVerdict {
    VerdictKind kind = VerdictKind::Inconclusive;
    int kernel_dim = 0;
    int critical_dim = 0;                  // MorseBott: dimension of the critical manifold
    int order = 0;                         // NotMorseBott: lowest nonvanishing order m >= 3
    Vec direction;                         // NotMorseBott: witness direction in kernel coordinates
    double exponent_bound = 0.0;           // NotMorseBott: (m-1)/m
    int max_order_checked = 0;             // Inconclusive
    std::optional<Poly> reduced;           // reduced polynomial on kernel coordinates

    struct Diagnostics {
        double gradient_norm = 0.0;        // ||grad f(x0)||
        double rank_gap = std::numeric_limits<double>::infinity();
        bool ill_conditioned_split = false;
        bool exact_elimination = false;    // reduced polynomial computed without truncation
        double kernel_tol = 0.0;
        double vanish_tol = 0.0;
        double trust_radius = 0.0;
        std::vector<std::string> notes;
    } diagnostics;
};

namespace detail {

/// Reduced polynomial g on the kernel coordinates. Exact elimination when the
/// complement gradient is linear in z with constant coefficients (f quadratic
/// in z); otherwise a truncated power-series solve of D_z q(psi(xi), xi) = 0.
inline Poly reduced_polynomial(const Poly& q, int nz, int c, const Mat& A0, int max_order,
                               bool& exact) {
    if (nz == 0) {
        exact = true;
        return q; // no complement block: the reduced function is q itself
    }

    // Split q by degree in the z variables.
    bool quadratic_in_z = true;
    for (const auto& [a, coeff] : q.terms()) {
        int zdeg = 0, xideg = 0;
        for (int i = 0; i < nz; ++i) zdeg += a[i];
        for (int i = nz; i < nz + c; ++i) xideg += a[i];
        if (zdeg > 2 || (zdeg == 2 && xideg > 0)) {
            quadratic_in_z = false;
            break;
        }
    }

    std::vector<Poly> xi_vars;
    for (int j = 0; j < c; ++j) xi_vars.push_back(Poly::variable(c, j));

    if (quadratic_in_z) {
        // q = <z, M z>/2 + <z, b(xi)> + h(xi) with constant M; eliminate
        // exactly: g = h - <b, M^{-1} b>/2.
        Mat M = Mat::Zero(nz, nz);
        std::vector<Poly> b(nz, Poly::zero(c));
        Poly h(c);
        for (const auto& [a, coeff] : q.terms()) {
            int zdeg = 0;
            for (int i = 0; i < nz; ++i) zdeg += a[i];
            MultiIndex xi_part(a.begin() + nz, a.end());
            if (zdeg == 0) {
                h += Poly::monomial(c, xi_part, coeff);
            } else if (zdeg == 1) {
                for (int i = 0; i < nz; ++i)
                    if (a[i] == 1) b[static_cast<std::size_t>(i)] += Poly::monomial(c, xi_part, coeff);
            } else {
                for (int i = 0; i < nz; ++i) {
                    if (a[i] == 2) M(i, i) += 2.0 * coeff;
                    else if (a[i] == 1)
                        for (int j = i + 1; j < nz; ++j)
                            if (a[j] == 1) {
                                M(i, j) += coeff;
                                M(j, i) += coeff;
                            }
                }
            }
        }
        const Mat Minv = M.inverse();
        Poly g = h;
        for (int i = 0; i < nz; ++i)
            for (int j = 0; j < nz; ++j)
                if (Minv(i, j) != 0.0) g -= 0.5 * Minv(i, j) * (b[i] * b[j]);
        exact = true;
        return g;
    }

    // Power-series branch: psi = -A0^{-1} N(psi, xi) truncated at max_order,
    // where N = D_z q - A0 z collects everything beyond the leading block.
    // Each sweep extends the correct order by at least one.
    exact = false;
    const Mat A0inv = A0.inverse();
    std::vector<Poly> dq;
    for (int i = 0; i < nz; ++i) dq.push_back(q.derivative(i));

    std::vector<Poly> psi(nz, Poly::zero(c));
    for (int sweep = 0; sweep < max_order; ++sweep) {
        std::vector<Poly> subs = psi;
        subs.insert(subs.end(), xi_vars.begin(), xi_vars.end());
        std::vector<Poly> n_eval(nz, Poly::zero(c));
        for (int i = 0; i < nz; ++i) {
            n_eval[i] = dq[i].compose(subs, max_order);
            for (int j = 0; j < nz; ++j)
                if (A0(i, j) != 0.0) n_eval[i] -= A0(i, j) * psi[j];
        }
        std::vector<Poly> next(nz, Poly::zero(c));
        for (int i = 0; i < nz; ++i)
            for (int j = 0; j < nz; ++j)
                if (A0inv(i, j) != 0.0) next[i] -= A0inv(i, j) * n_eval[j];
        bool stable = true;
        for (int i = 0; i < nz; ++i)
            if (next[i] != psi[i]) stable = false;
        psi = std::move(next);
        if (stable) break;
    }

    std::vector<Poly> subs = psi;
    subs.insert(subs.end(), xi_vars.begin(), xi_vars.end());
    return q.compose(subs, max_order);
}

} // namespace detail

/// Classify the critical point x0 of f: Morse, Morse-Bott with its critical
/// dimension, or not Morse-Bott with the order certificate (m, v) forcing a
/// Lojasiewicz exponent of at least (m-1)/m.
inline MorseBottVerdict classify(const Poly& f, const Vec& x0, int max_order = 8,
                                 const Config& cfg = {}) {
    if (static_cast<int>(x0.size()) != f.dim())
        throw dimension_mismatch("classify: point dimension mismatch");
    const int d = f.dim();

    Poly p = f.compose_affine(Mat::Identity(d, d), x0);
    p -= Poly::constant(d, p(Vec::Zero(d)));

    MorseBottVerdict v;
    const double scale = 1.0 + f.max_abs_coeff();
    v.diagnostics.gradient_norm = p.gradient_at(Vec::Zero(d)).norm();
    v.diagnostics.kernel_tol = cfg.kernel_tol;
    if (v.diagnostics.gradient_norm > cfg.crit_tol * scale)
        throw not_critical("classify: gradient norm " +
                           std::to_string(v.diagnostics.gradient_norm) + " at x0 exceeds " +
                           std::to_string(cfg.crit_tol * scale));

    p = p.pruned(cfg.poly_prune_eps * scale);
    if (p.is_zero()) {
        v.kind = VerdictKind::Constant;
        return v;
    }

    const Mat H = p.hessian_at(Vec::Zero(d));
    const KernelSplit split = kernel_split(H, cfg.kernel_tol);
    v.kernel_dim = split.kernel_dim();
    v.diagnostics.rank_gap = split.rank_gap;
    v.diagnostics.ill_conditioned_split = split.rank_gap < cfg.rank_gap_warn;
    if (v.diagnostics.ill_conditioned_split)
        v.diagnostics.notes.push_back("rank gap below threshold; kernel split may be unstable");

    if (v.kernel_dim == 0) {
        v.kind = VerdictKind::Morse;
        return v;
    }

    const int nz = split.complement_dim();
    Mat T(d, d);
    if (nz > 0) T.leftCols(nz) = split.complement_basis;
    T.rightCols(v.kernel_dim) = split.kernel_basis;
    const Poly q = p.compose_affine(T, Vec::Zero(d));

    Poly g;
    try {
        g = detail::reduced_polynomial(q, nz, v.kernel_dim, split.A0, max_order,
                                       v.diagnostics.exact_elimination);
    } catch (const numeric_error& e) {
        v.kind = VerdictKind::Inconclusive;
        v.max_order_checked = max_order;
        v.diagnostics.notes.push_back(std::string("branch elimination failed: ") + e.what());
        return v;
    }
    if (!v.diagnostics.exact_elimination) {
        // Indicate how much weight sits at the truncation boundary: the
        // dropped remainder starts one order above it.
        const double top_mass = g.homogeneous_part(max_order).max_abs_coeff();
        v.diagnostics.notes.push_back("reduced polynomial truncated at order " +
                                      std::to_string(max_order) +
                                      "; top-order coefficient mass " +
                                      std::to_string(top_mass));
    }

    v.diagnostics.vanish_tol = cfg.vanish_tol * std::max(1.0, q.max_abs_coeff());
    g = g.pruned(v.diagnostics.vanish_tol);

    // The reduced function vanishes to second order by construction; what the
    // kernel tolerance let through at low order is split slop, not signal.
    if (!g.is_zero() && g.lowest_degree() < 3) {
        double worst = 0.0;
        Poly cleaned(g.dim());
        for (const auto& [a, coeff] : g.terms()) {
            if (total_degree(a) < 3)
                worst = std::max(worst, std::abs(coeff));
            else
                cleaned += Poly::monomial(g.dim(), a, coeff);
        }
        if (worst > 10.0 * v.diagnostics.vanish_tol)
            v.diagnostics.notes.push_back(
                "reduced function carried low-order terms of size " + std::to_string(worst) +
                "; kernel tolerance may be too loose for this Hessian");
        g = cleaned;
    }

    v.reduced = g;
    if (g.is_zero()) {
        v.kind = VerdictKind::MorseBott;
        v.critical_dim = v.kernel_dim;
        return v;
    }

    const auto low = lowest_order(g, cfg.sphere_samples_per_dim, cfg.ascent_steps);
    if (low && low->order <= max_order) {
        v.kind = VerdictKind::NotMorseBott;
        v.order = low->order;
        v.direction = low->direction;
        v.exponent_bound = static_cast<double>(low->order - 1) / low->order;
        return v;
    }
    v.kind = VerdictKind::Inconclusive;
    v.max_order_checked = max_order;
    return v;
}

/// Identity residuals for the polar blowup maps of a Morse-Bott normal form
/// with signature (p, n, c): f(su, xi) = s^2, f(tv, xi) = -t^2, mixed
/// f(su, tv, xi) = s^2 - t^2, and the sheared map that exhibits s^2 - t^2 as
/// t1 t2. Returns the maximum residual over deterministic samples.
inline double blowup_check(int p, int n, int c, const Poly& f, int samples = 1000) {
    if (p < 0 || n < 0 || c < 0 || p + n < 1)
        throw input_error("blowup_check: signature must have p + n >= 1");
    const int d = p + n + c;
    if (f.dim() != d)
        throw dimension_mismatch("blowup_check: polynomial dimension does not match signature");

    Poly expect(d);
    for (int i = 0; i < p; ++i) {
        MultiIndex a(d, 0);
        a[i] = 2;
        expect += Poly::monomial(d, a, 1.0);
    }
    for (int i = p; i < p + n; ++i) {
        MultiIndex a(d, 0);
        a[i] = 2;
        expect += Poly::monomial(d, a, -1.0);
    }
    if (f != expect)
        throw input_error("blowup_check: polynomial is not the normal form for signature (" +
                          std::to_string(p) + ", " + std::to_string(n) + ", " +
                          std::to_string(c) + ")");

    const auto us = p > 0 ? detail::sphere_directions(p, samples) : std::vector<Vec>{};
    const auto vs = n > 0 ? detail::sphere_directions(n, samples) : std::vector<Vec>{};
    const auto radii = detail::cube_points(2, samples, 0.0, 1.0);
    const auto xis = c > 0 ? detail::cube_points(c, samples, -0.5, 0.5) : std::vector<Vec>{};

    double max_res = 0.0;
    Vec x(d);
    for (int k = 0; k < samples; ++k) {
        const double s = radii[k][0];
        const double t = radii[k][1];
        x.setZero();
        if (p > 0) x.head(p) = s * us[k];
        if (n > 0) x.segment(p, n) = t * vs[k];
        if (c > 0) x.tail(c) = xis[k];

        double target;
        if (n == 0) target = s * s;
        else if (p == 0) target = -t * t;
        else target = s * s - t * t;
        max_res = std::max(max_res, std::abs(f(x) - target));

        if (p > 0 && n > 0) {
            // Sheared coordinates: t1 = s + t, t2 = s - t turn s^2 - t^2 into t1 t2.
            const double t1 = s + t, t2 = s - t;
            max_res = std::max(max_res, std::abs(f(x) - t1 * t2));
        }
    }
    return max_res;
}

} // namespace loja
