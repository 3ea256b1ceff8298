#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loja/errors.hpp"

namespace loja {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Exponent multi-index of a monomial; entry i is the power of x_{i+1}.
using MultiIndex = std::vector<int>;

inline int total_degree(const MultiIndex& a) {
    return std::accumulate(a.begin(), a.end(), 0);
}

/// Graded lexicographic order: compare total degree first, then entries.
struct GrlexLess {
    bool operator()(const MultiIndex& a, const MultiIndex& b) const {
        const int da = total_degree(a), db = total_degree(b);
        if (da != db) return da < db;
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    }
};

/// Coefficients with magnitude below this are dropped after arithmetic, so
/// cancellation dust cannot inflate term counts. Multi-index bookkeeping is
/// exact; only coefficient rounding enters any operation.
inline constexpr double kCoeffPrune = 1e-14;

/// x^n by binary exponentiation (n >= 0).
inline double pow_int(double x, int n) {
    double r = 1.0, b = x;
    for (int e = n; e > 0; e >>= 1) {
        if (e & 1) r *= b;
        b *= b;
    }
    return r;
}

namespace detail {

/// Neumaier compensated accumulator.
struct KahanSum {
    double sum = 0.0, comp = 0.0;
    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

} // namespace detail

/// Sparse multivariate polynomial with real coefficients, canonically ordered
/// (graded lex) and free of zero coefficients. Values are immutable in spirit:
/// every operation returns a new polynomial.
class Poly {
public:
    using TermMap = std::map<MultiIndex, double, GrlexLess>;

    Poly() : dim_(0) {}
    explicit Poly(int dim) : dim_(dim) {
        if (dim < 0) throw input_error("polynomial dimension must be >= 0");
    }

    static Poly zero(int dim) { return Poly(dim); }

    static Poly constant(int dim, double c) {
        Poly p(dim);
        if (c != 0.0) p.terms_.emplace(MultiIndex(dim, 0), c);
        return p;
    }

    /// The monomial c * x^alpha.
    static Poly monomial(int dim, MultiIndex alpha, double c) {
        Poly p(dim);
        p.check_index(alpha);
        if (c != 0.0) p.terms_.emplace(std::move(alpha), c);
        return p;
    }

    /// The coordinate function x_{i+1} (0-based i).
    static Poly variable(int dim, int i) {
        if (i < 0 || i >= dim) throw input_error("variable index out of range");
        MultiIndex a(dim, 0);
        a[i] = 1;
        return monomial(dim, std::move(a), 1.0);
    }

    int dim() const { return dim_; }
    bool is_zero() const { return terms_.empty(); }
    std::size_t term_count() const { return terms_.size(); }
    const TermMap& terms() const { return terms_; }

    /// Max total degree over terms; -1 for the zero polynomial.
    int degree() const {
        return terms_.empty() ? -1 : total_degree(terms_.rbegin()->first);
    }

    /// Smallest total degree among stored terms; -1 for the zero polynomial.
    int lowest_degree() const {
        return terms_.empty() ? -1 : total_degree(terms_.begin()->first);
    }

    double max_abs_coeff() const {
        double m = 0.0;
        for (const auto& [a, c] : terms_) m = std::max(m, std::abs(c));
        return m;
    }

    /// Coefficient of x^alpha, i.e. the Taylor datum d^alpha p(0) / alpha!.
    double taylor_coeff(const MultiIndex& alpha) const {
        check_index(alpha);
        auto it = terms_.find(alpha);
        return it == terms_.end() ? 0.0 : it->second;
    }

    /// Exact value at x via per-term products and compensated summation.
    double operator()(const Vec& x) const {
        if (static_cast<int>(x.size()) != dim_)
            throw dimension_mismatch("eval: point dimension " + std::to_string(x.size()) +
                                     " != polynomial dimension " + std::to_string(dim_));
        detail::KahanSum acc;
        for (const auto& [a, c] : terms_) {
            double term = c;
            for (int i = 0; i < dim_; ++i)
                if (a[i] > 0) term *= pow_int(x[i], a[i]);
            acc.add(term);
        }
        return acc.value();
    }

    /// Sum of absolute term values at x: the scale against which cancellation
    /// in operator() must be judged.
    double eval_abs(const Vec& x) const {
        if (static_cast<int>(x.size()) != dim_)
            throw dimension_mismatch("eval_abs: point dimension mismatch");
        double sum = 0.0;
        for (const auto& [a, c] : terms_) {
            double term = std::abs(c);
            for (int i = 0; i < dim_; ++i)
                if (a[i] > 0) term *= pow_int(std::abs(x[i]), a[i]);
            sum += term;
        }
        return sum;
    }

    Poly operator-() const {
        Poly r(dim_);
        for (const auto& [a, c] : terms_) r.terms_.emplace(a, -c);
        return r;
    }

    Poly& operator+=(const Poly& o) {
        require_same_dim(o);
        for (const auto& [a, c] : o.terms_) add_term(a, c);
        return *this;
    }
    Poly& operator-=(const Poly& o) {
        require_same_dim(o);
        for (const auto& [a, c] : o.terms_) add_term(a, -c);
        return *this;
    }
    Poly& operator*=(double s) {
        if (s == 0.0) {
            terms_.clear();
        } else {
            for (auto& [a, c] : terms_) c *= s;
            prune_in_place(kCoeffPrune);
        }
        return *this;
    }

    friend Poly operator+(Poly a, const Poly& b) { return a += b; }
    friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
    friend Poly operator*(Poly a, double s) { return a *= s; }
    friend Poly operator*(double s, Poly a) { return a *= s; }

    friend Poly operator*(const Poly& a, const Poly& b) { return mul(a, b, -1); }

    /// Product with terms above max_degree dropped (max_degree < 0: keep all).
    static Poly mul(const Poly& a, const Poly& b, int max_degree) {
        a.require_same_dim(b);
        Poly r(a.dim_);
        MultiIndex idx(a.dim_);
        for (const auto& [ea, ca] : a.terms_) {
            const int da = total_degree(ea);
            if (max_degree >= 0 && da > max_degree) continue;
            for (const auto& [eb, cb] : b.terms_) {
                if (max_degree >= 0 && da + total_degree(eb) > max_degree) continue;
                for (int i = 0; i < a.dim_; ++i) idx[i] = ea[i] + eb[i];
                r.add_term(idx, ca * cb);
            }
        }
        return r;
    }

    Poly pow(int n, int max_degree = -1) const {
        if (n < 0) throw input_error("negative polynomial power");
        Poly r = constant(dim_, 1.0);
        Poly base = *this;
        for (int e = n; e > 0; e >>= 1) {
            if (e & 1) r = mul(r, base, max_degree);
            if (e > 1) base = mul(base, base, max_degree);
        }
        return r;
    }

    /// Partial derivative with respect to x_{i+1}.
    Poly derivative(int i) const {
        if (i < 0 || i >= dim_) throw input_error("derivative index out of range");
        Poly r(dim_);
        for (const auto& [a, c] : terms_) {
            if (a[i] == 0) continue;
            MultiIndex b = a;
            b[i] -= 1;
            r.terms_.emplace(std::move(b), c * a[i]);
        }
        return r;
    }

    std::vector<Poly> gradient() const {
        std::vector<Poly> g;
        g.reserve(dim_);
        for (int i = 0; i < dim_; ++i) g.push_back(derivative(i));
        return g;
    }

    Vec gradient_at(const Vec& x) const {
        Vec g(dim_);
        for (int i = 0; i < dim_; ++i) g[i] = derivative(i)(x);
        return g;
    }

    /// Hessian matrix at x. Each pair of mixed partials is computed once and
    /// mirrored, so the result is symmetric entry for entry.
    Mat hessian_at(const Vec& x) const {
        if (static_cast<int>(x.size()) != dim_)
            throw dimension_mismatch("hessian: point dimension mismatch");
        Mat h(dim_, dim_);
        for (int i = 0; i < dim_; ++i) {
            const Poly di = derivative(i);
            for (int j = i; j < dim_; ++j) {
                const double v = di.derivative(j)(x);
                h(i, j) = v;
                h(j, i) = v;
            }
        }
        return h;
    }

    /// Exact univariate restriction t -> p(t v). Requires v != 0.
    Poly restrict_direction(const Vec& v) const {
        if (static_cast<int>(v.size()) != dim_)
            throw dimension_mismatch("restrict_direction: direction dimension mismatch");
        if (v.norm() == 0.0) throw input_error("restrict_direction: zero direction");
        Poly r(1);
        for (const auto& [a, c] : terms_) {
            double coeff = c;
            for (int i = 0; i < dim_; ++i)
                if (a[i] > 0) coeff *= pow_int(v[i], a[i]);
            r.add_term(MultiIndex{total_degree(a)}, coeff);
        }
        r.prune_in_place(kCoeffPrune);
        return r;
    }

    /// Exact polynomial substitution x_i -> subs[i]; all subs share one
    /// dimension. Terms above max_degree are dropped during accumulation when
    /// max_degree >= 0.
    Poly compose(const std::vector<Poly>& subs, int max_degree = -1) const {
        if (static_cast<int>(subs.size()) != dim_)
            throw dimension_mismatch("compose: need one substitution per variable");
        const int m = dim_ == 0 ? 0 : subs[0].dim();
        for (const auto& s : subs)
            if (s.dim() != m) throw dimension_mismatch("compose: substitutions disagree on dimension");

        // Memoized powers of each substitution.
        std::vector<std::vector<Poly>> powers(dim_);
        for (int i = 0; i < dim_; ++i) powers[i].push_back(constant(m, 1.0));

        Poly r(m);
        for (const auto& [a, c] : terms_) {
            Poly t = constant(m, c);
            for (int i = 0; i < dim_ && !t.is_zero(); ++i) {
                if (a[i] == 0) continue;
                auto& pw = powers[i];
                while (static_cast<int>(pw.size()) <= a[i])
                    pw.push_back(mul(pw.back(), subs[i], max_degree));
                t = mul(t, pw[a[i]], max_degree);
            }
            r += t;
        }
        r.prune_in_place(kCoeffPrune);
        return r;
    }

    /// Exact composition p(L x + b); L maps the new variables (columns) to the
    /// old ones (rows), so the result has L.cols() variables.
    Poly compose_affine(const Mat& L, const Vec& b) const {
        if (L.rows() != dim_ || static_cast<int>(b.size()) != dim_)
            throw dimension_mismatch("compose_affine: matrix/offset rows must match polynomial dimension");
        const int m = static_cast<int>(L.cols());
        std::vector<Poly> subs;
        subs.reserve(dim_);
        for (int i = 0; i < dim_; ++i) {
            Poly s = constant(m, b[i]);
            for (int j = 0; j < m; ++j)
                if (L(i, j) != 0.0) s += monomial(m, unit_index(m, j), L(i, j));
            subs.push_back(std::move(s));
        }
        return compose(subs);
    }

    /// Copy with all terms of total degree > max_degree removed.
    Poly truncated(int max_degree) const {
        Poly r(dim_);
        for (const auto& [a, c] : terms_)
            if (total_degree(a) <= max_degree) r.terms_.emplace(a, c);
        return r;
    }

    /// Copy with coefficients |c| <= eps removed.
    Poly pruned(double eps) const {
        Poly r(dim_);
        for (const auto& [a, c] : terms_)
            if (std::abs(c) > eps) r.terms_.emplace(a, c);
        return r;
    }

    /// Terms of total degree exactly k.
    Poly homogeneous_part(int k) const {
        Poly r(dim_);
        for (const auto& [a, c] : terms_)
            if (total_degree(a) == k) r.terms_.emplace(a, c);
        return r;
    }

    /// Same polynomial viewed in new_dim >= dim variables (extra ones unused).
    Poly widened(int new_dim) const {
        if (new_dim < dim_) throw input_error("widened: cannot shrink dimension");
        Poly r(new_dim);
        for (const auto& [a, c] : terms_) {
            MultiIndex b(new_dim, 0);
            std::copy(a.begin(), a.end(), b.begin());
            r.terms_.emplace(std::move(b), c);
        }
        return r;
    }

    bool operator==(const Poly& o) const { return dim_ == o.dim_ && terms_ == o.terms_; }
    bool operator!=(const Poly& o) const { return !(*this == o); }

    static MultiIndex unit_index(int dim, int i) {
        MultiIndex a(dim, 0);
        a[i] = 1;
        return a;
    }

private:
    void check_index(const MultiIndex& a) const {
        if (static_cast<int>(a.size()) != dim_)
            throw dimension_mismatch("multi-index length must equal polynomial dimension");
        for (int e : a)
            if (e < 0) throw input_error("negative exponent in multi-index");
    }

    void require_same_dim(const Poly& o) const {
        if (dim_ != o.dim_)
            throw dimension_mismatch("polynomial dimensions differ: " + std::to_string(dim_) +
                                     " vs " + std::to_string(o.dim_));
    }

    void add_term(const MultiIndex& a, double c) {
        if (c == 0.0) return;
        auto [it, inserted] = terms_.emplace(a, c);
        if (!inserted) {
            it->second += c;
            if (std::abs(it->second) <= kCoeffPrune) terms_.erase(it);
        }
    }

    void prune_in_place(double eps) {
        for (auto it = terms_.begin(); it != terms_.end();)
            it = std::abs(it->second) <= eps ? terms_.erase(it) : std::next(it);
    }

    int dim_;
    TermMap terms_;
};

} // namespace loja
