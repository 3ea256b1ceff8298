#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loja/config.hpp"
#include "loja/detail/quadrature.hpp"
#include "loja/errors.hpp"
#include "loja/poly.hpp"

namespace loja {

/// Orthogonal decomposition R^d = X0 (+) K with K the numerical kernel of a
/// symmetric matrix. Bases are orthonormal columns; A0 is the (invertible)
/// restriction of the matrix to X0.
struct KernelSplit {
    int dim = 0;
    Mat kernel_basis;     // dim x c
    Mat complement_basis; // dim x (dim - c)
    Mat A0;               // (dim - c) x (dim - c), exactly symmetric
    double rank_gap = std::numeric_limits<double>::infinity();

    int kernel_dim() const { return static_cast<int>(kernel_basis.cols()); }
    int complement_dim() const { return static_cast<int>(complement_basis.cols()); }

    /// Assemble the ambient point for complement coordinates z and kernel
    /// coordinates xi.
    Vec ambient(const Vec& z, const Vec& xi) const {
        Vec x = Vec::Zero(dim);
        if (z.size() > 0) x += complement_basis * z;
        if (xi.size() > 0) x += kernel_basis * xi;
        return x;
    }
};

struct BranchSolution {
    Vec xi;  // kernel coordinates of the query
    Vec psi; // complement coordinates solving D_z f(psi, xi) = 0
    int newton_iters = 0;
    double residual_norm = 0.0;
};

struct SplitOptions {
    double newton_tol = 1e-12;
    int max_iter = 50;
    double trust_factor = 0.5;
    double trust_radius = 0.0; // > 0 overrides the contraction heuristic
    double neighborhood = 0.5; // max ||B - A|| / ||A|| accepted by factor_quadratic
    int quadrature_nodes = 16;

    static SplitOptions from(const Config& cfg) {
        SplitOptions o;
        o.newton_tol = cfg.newton_tol;
        o.max_iter = cfg.newton_max_iter;
        o.trust_factor = cfg.trust_factor;
        o.trust_radius = cfg.trust_radius;
        o.neighborhood = cfg.factor_neighborhood;
        o.quadrature_nodes = cfg.quadrature_nodes;
        return o;
    }
};

inline double spectral_norm(const Mat& m) {
    if (m.size() == 0) return 0.0;
    return m.jacobiSvd().singularValues()[0];
}

/// Solve R^T A R = B for R in the commutant subspace {R : R^T A = A R},
/// starting at the identity. Each step solves the identity linearization
/// Q^T A + A Q = C, whose solution within the subspace is Q = A^{-1} C / 2;
/// iterates therefore satisfy the commutation constraint by construction.
inline Mat factor_quadratic(const Mat& A, const Mat& B, const SplitOptions& opts = {}) {
    const int n = static_cast<int>(A.rows());
    if (B.rows() != n || B.cols() != n || A.cols() != n)
        throw dimension_mismatch("factor_quadratic: A and B must be square of equal size");

    const Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double normA = svd.singularValues()[0];
    if (normA == 0.0 || svd.singularValues()[n - 1] <= 1e-13 * normA)
        throw singular_matrix("factor_quadratic: A is singular");
    if (spectral_norm(B - A) > opts.neighborhood * normA)
        throw outside_neighborhood("factor_quadratic: B outside the neighborhood of A");

    const Eigen::PartialPivLU<Mat> luA(A);
    Mat R = Mat::Identity(n, n);
    Mat C = B - R.transpose() * A * R;
    double res = C.norm();
    const double tol = opts.newton_tol * normA;
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        if (res <= tol) return R;
        const Mat Q = 0.5 * luA.solve(C);
        double lambda = 1.0;
        for (int k = 0; k < 40; ++k) {
            const Mat Rc = R + lambda * Q;
            const Mat Cc = B - Rc.transpose() * A * Rc;
            if (Cc.norm() < res) {
                R = Rc;
                C = Cc;
                res = Cc.norm();
                break;
            }
            lambda *= 0.5;
            if (k == 39)
                throw outside_neighborhood("factor_quadratic: no descent step found");
        }
    }
    if (res <= tol) return R;
    throw outside_neighborhood("factor_quadratic: did not converge in " +
                               std::to_string(opts.max_iter) + " iterations");
}

/// The local normal-form machinery for one function around one critical
/// point: critical-branch solve, Taylor-remainder quadratic form, and the
/// change of variables that exhibits f as g(xi) + <z, A0 z>/2.
///
/// The function is taken in ambient coordinates with its critical point at
/// the origin; all queries are in split coordinates (z complement, xi kernel).
class SplittingProblem {
public:
    SplittingProblem(const Poly& f, KernelSplit split, SplitOptions opts = {})
        : split_(std::move(split)), opts_(opts) {
        if (f.dim() != split_.dim)
            throw dimension_mismatch("splitting: function and split dimensions differ");
        const int d = split_.dim;
        const int nz = split_.complement_dim();

        Mat T(d, d);
        if (nz > 0) T.leftCols(nz) = split_.complement_basis;
        if (split_.kernel_dim() > 0) T.rightCols(split_.kernel_dim()) = split_.kernel_basis;
        q_ = f.compose_affine(T, Vec::Zero(d));

        dz_.reserve(nz);
        for (int i = 0; i < nz; ++i) dz_.push_back(q_.derivative(i));
        hzz_.resize(nz);
        for (int i = 0; i < nz; ++i) {
            hzz_[i].resize(nz);
            for (int j = i; j < nz; ++j) hzz_[i][j] = dz_[i].derivative(j);
        }
        rule_ = detail::gauss_legendre_01(opts_.quadrature_nodes);

        grad_scale_ = 1.0;
        for (const auto& g : dz_) grad_scale_ = std::max(grad_scale_, g.max_abs_coeff());
        trust_ = opts_.trust_radius > 0 ? opts_.trust_radius : heuristic_trust_radius();
    }

    const KernelSplit& split() const { return split_; }
    const Poly& split_coordinates_poly() const { return q_; }
    double trust_radius() const { return trust_; }

    /// Newton solve of D_z q(z, xi) = 0 from z = 0. Requires at least one
    /// kernel coordinate; the Morse case has no branch to parametrize.
    BranchSolution solve_branch(const Vec& xi) const {
        if (split_.kernel_dim() == 0)
            throw input_error("solve_branch: empty kernel; the branch degenerates to the "
                              "critical point itself");
        return branch(xi);
    }

    /// The reduced value g(xi) = q(psi(xi), xi).
    double reduced_value(const Vec& xi) const {
        const BranchSolution b = branch(xi);
        return eval_q(b.psi, xi);
    }

    /// Taylor-remainder form B(w, xi) = 2 int_0^1 (1-t) Hzz(psi + t w, xi) dt
    /// by Gauss-Legendre quadrature, exact for the polynomial integrand.
    Mat remainder_form(const Vec& w, const Vec& xi, int nodes = 0) const {
        const BranchSolution b = branch(xi);
        return remainder_form_at(b.psi, w, xi, nodes > 0 ? nodes : opts_.quadrature_nodes);
    }

    /// | q(Phi(z, xi)) - g(xi) - <z, A0 z>/2 | where Phi composes the branch
    /// shift with the factorization change of variables.
    double normal_form_residual(const Vec& z, const Vec& xi) const {
        check_radius(z, "z");
        const BranchSolution b = branch(xi);
        const double g = eval_q(b.psi, xi);

        const auto map = [&](const Vec& w) -> Vec { // w -> R(w, xi) w
            const Mat B = remainder_form_at(b.psi, w, xi, opts_.quadrature_nodes);
            return factor_quadratic(split_.A0, B, opts_) * w;
        };

        // Invert w -> R(w, xi) w by fixed point; the derivative at the origin
        // is the identity, so the map contracts near 0.
        Vec w = z;
        bool converged = z.size() == 0;
        for (int iter = 0; iter < opts_.max_iter && !converged; ++iter) {
            const Mat B = remainder_form_at(b.psi, w, xi, opts_.quadrature_nodes);
            const Mat R = factor_quadratic(split_.A0, B, opts_);
            const Vec w_next = Eigen::PartialPivLU<Mat>(R).solve(z);
            const double dw = (w_next - w).norm();
            w = w_next;
            if (dw <= 1e-14 * (1.0 + z.norm())) converged = true;
            if (w.norm() > 4.0 * trust_)
                throw left_trust_region("normal_form_residual: inversion left the trust region");
        }
        if (!converged) w = newton_invert(map, z, w);

        const double quad = z.size() > 0 ? 0.5 * z.dot(split_.A0 * z) : 0.0;
        return std::abs(eval_q(b.psi + w, xi) - g - quad);
    }

private:
    Vec split_point(const Vec& z, const Vec& xi) const {
        Vec p(split_.dim);
        if (z.size() > 0) p.head(z.size()) = z;
        if (xi.size() > 0) p.tail(xi.size()) = xi;
        return p;
    }

    double eval_q(const Vec& z, const Vec& xi) const { return q_(split_point(z, xi)); }

    BranchSolution branch(const Vec& xi) const {
        if (static_cast<int>(xi.size()) != split_.kernel_dim())
            throw dimension_mismatch("branch: kernel coordinate dimension mismatch");
        check_radius(xi, "xi");

        const int nz = split_.complement_dim();
        BranchSolution sol;
        sol.xi = xi;
        sol.psi = Vec::Zero(nz);
        if (nz == 0) return sol;

        const double tol = opts_.newton_tol * grad_scale_;
        Vec z = Vec::Zero(nz);
        Vec r = grad_z(z, xi);
        double rn = r.norm();
        int iter = 0;
        for (; iter < opts_.max_iter && rn > tol; ++iter) {
            const Mat H = hess_z(z, xi);
            const Vec step = -Eigen::PartialPivLU<Mat>(H).solve(r);
            double lambda = 1.0;
            bool moved = false;
            for (int k = 0; k < 40; ++k) {
                const Vec zc = z + lambda * step;
                const Vec rc = grad_z(zc, xi);
                if (rc.norm() < rn) {
                    z = zc;
                    r = rc;
                    rn = rc.norm();
                    moved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if (!moved)
                throw no_convergence("solve_branch: backtracking stalled at residual " +
                                     std::to_string(rn));
            if (z.norm() > trust_)
                throw left_trust_region("solve_branch: iterate escaped the trust region");
        }
        if (rn > tol)
            throw no_convergence("solve_branch: max iterations exceeded");
        sol.psi = z;
        sol.newton_iters = iter;
        sol.residual_norm = rn;
        return sol;
    }

    Vec grad_z(const Vec& z, const Vec& xi) const {
        const int nz = split_.complement_dim();
        const Vec p = split_point(z, xi);
        Vec g(nz);
        for (int i = 0; i < nz; ++i) g[i] = dz_[i](p);
        return g;
    }

    Mat hess_z(const Vec& z, const Vec& xi) const {
        const int nz = split_.complement_dim();
        const Vec p = split_point(z, xi);
        Mat h(nz, nz);
        for (int i = 0; i < nz; ++i)
            for (int j = i; j < nz; ++j) {
                const double v = hzz_[i][j](p);
                h(i, j) = v;
                h(j, i) = v;
            }
        return h;
    }

    Mat remainder_form_at(const Vec& psi, const Vec& w, const Vec& xi, int nodes) const {
        const int nz = split_.complement_dim();
        if (static_cast<int>(w.size()) != nz)
            throw dimension_mismatch("remainder_form: w must have complement dimension");
        check_radius(w, "w");
        const auto rule = nodes == opts_.quadrature_nodes ? rule_ : detail::gauss_legendre_01(nodes);
        Mat B = Mat::Zero(nz, nz);
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            const double t = rule.nodes[k];
            B += (2.0 * rule.weights[k] * (1.0 - t)) * hess_z(psi + t * w, xi);
        }
        // hess_z mirrors its upper triangle, so B is symmetric entry for entry.
        return B;
    }

    /// Kantorovich-style contraction radius: Newton on the complement
    /// gradient contracts while ||A0^{-1}|| * M3 * r < 1, with M3 a bound on
    /// the variation of the complement Hessian (Frobenius norm of the cubic
    /// part at 0 plus a degree-weighted tail at unit radius). Only terms of
    /// z-degree >= 2 move that Hessian, so pure kernel terms do not shrink
    /// the region.
    double heuristic_trust_radius() const {
        const int nz = split_.complement_dim();
        if (nz == 0) return 1.0;
        double frob3 = 0.0, tail = 0.0;
        for (const auto& [a, c] : q_.terms()) {
            int zdeg = 0;
            for (int i = 0; i < nz; ++i) zdeg += a[i];
            if (zdeg < 2) continue;
            const int deg = total_degree(a);
            if (deg == 3) {
                double fact = 1.0;
                int multiset = 6; // 3!
                for (int e : a)
                    for (int k = 2; k <= e; ++k) {
                        fact *= k;
                        multiset /= k;
                    }
                frob3 += c * c * fact * fact * multiset;
            } else if (deg >= 4) {
                tail += std::abs(c) * deg * (deg - 1) * (deg - 2);
            }
        }
        const double m3 = std::sqrt(frob3) + tail;
        if (m3 == 0.0) return 1.0; // quadratic in z: the branch solve is one linear step
        const double inv_a0 = 1.0 / split_.A0.jacobiSvd().singularValues().tail(1)[0];
        return std::min(1.0, opts_.trust_factor / (inv_a0 * m3));
    }

    /// Damped Newton fallback for G(w) = map(w) - z with a finite-difference
    /// Jacobian, used when the fixed point stalls near the region edge.
    template <class Map>
    Vec newton_invert(const Map& map, const Vec& z, Vec w) const {
        const int n = static_cast<int>(z.size());
        Vec G = map(w) - z;
        double gn = G.norm();
        const double tol = 1e-13 * (1.0 + z.norm());
        for (int iter = 0; iter < opts_.max_iter && gn > tol; ++iter) {
            Mat J(n, n);
            const double h = 1e-7 * (1.0 + w.norm());
            for (int j = 0; j < n; ++j) {
                Vec wp = w;
                wp[j] += h;
                J.col(j) = (map(wp) - z - G) / h;
            }
            const Vec step = -Eigen::PartialPivLU<Mat>(J).solve(G);
            double lambda = 1.0;
            bool moved = false;
            for (int k = 0; k < 30; ++k) {
                const Vec wc = w + lambda * step;
                const Vec Gc = map(wc) - z;
                if (Gc.norm() < gn) {
                    w = wc;
                    G = Gc;
                    gn = Gc.norm();
                    moved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if (!moved)
                throw no_convergence("normal_form_residual: inversion stalled at residual " +
                                     std::to_string(gn));
        }
        if (gn > tol)
            throw no_convergence("normal_form_residual: inversion did not converge");
        return w;
    }

    void check_radius(const Vec& v, const char* name) const {
        if (v.size() > 0 && v.norm() > trust_ * (1.0 + 1e-12))
            throw left_trust_region(std::string("coordinate ") + name + " of norm " +
                                    std::to_string(v.norm()) + " exceeds trust radius " +
                                    std::to_string(trust_));
    }

    KernelSplit split_;
    SplitOptions opts_;
    Poly q_;
    std::vector<Poly> dz_;
    std::vector<std::vector<Poly>> hzz_;
    detail::QuadratureRule rule_;
    double grad_scale_ = 1.0;
    double trust_ = 0.0;
};

inline BranchSolution solve_branch(const Poly& f, const KernelSplit& split, const Vec& xi,
                                   const SplitOptions& opts = {}) {
    return SplittingProblem(f, split, opts).solve_branch(xi);
}

inline double reduced_value(const Poly& f, const KernelSplit& split, const Vec& xi,
                            const SplitOptions& opts = {}) {
    return SplittingProblem(f, split, opts).reduced_value(xi);
}

inline Mat remainder_form(const Poly& f, const KernelSplit& split, const Vec& w, const Vec& xi,
                          int nodes = 16, const SplitOptions& opts = {}) {
    return SplittingProblem(f, split, opts).remainder_form(w, xi, nodes);
}

inline double normal_form_residual(const Poly& f, const KernelSplit& split, const Vec& z,
                                   const Vec& xi, const SplitOptions& opts = {}) {
    return SplittingProblem(f, split, opts).normal_form_residual(z, xi);
}

} // namespace loja
