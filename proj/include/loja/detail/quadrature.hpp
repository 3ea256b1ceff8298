#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace loja::detail {

struct QuadratureRule {
    std::vector<double> nodes;   // on [0, 1]
    std::vector<double> weights; // sum to 1
};

/// Gauss-Legendre rule on [0, 1] via Golub-Welsch: nodes are eigenvalues of
/// the Jacobi matrix, weights come from the first eigenvector components.
/// Exact for polynomial integrands of degree <= 2n - 1.
inline QuadratureRule gauss_legendre_01(int n) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = 0.5 * (es.eigenvalues()[i] + 1.0);            // [-1,1] -> [0,1]
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = v0 * v0;                                    // 2 v0^2, halved by the map
    }
    return rule;
}

} // namespace loja::detail
