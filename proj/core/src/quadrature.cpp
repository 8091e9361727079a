#include "procrisk/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "procrisk/rng.hpp"
#include "procrisk/special.hpp"

namespace procrisk {

// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
// polynomials (recurrence p_{k+1} = x p_k - k p_{k-1}): eigenvalues are the
// nodes, squared first eigenvector components the normalized weights.
std::pair<std::vector<double>, std::vector<double>> gauss_hermite_rule(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite_rule: need at least one node");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double off = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite_rule: eigendecomposition failed");

  std::vector<double> nodes(n), weights(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = solver.eigenvalues()(i);  // ascending
    double v0 = solver.eigenvectors()(0, i);
    weights[i] = v0 * v0;
  }
  // Enforce the exact symmetry of the rule; the eigensolver is only
  // symmetric to rounding.
  for (int i = 0, j = n - 1; i < j; ++i, --j) {
    double node = 0.5 * (nodes[j] - nodes[i]);
    nodes[i] = -node;
    nodes[j] = node;
    double w = 0.5 * (weights[i] + weights[j]);
    weights[i] = weights[j] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  return {std::move(nodes), std::move(weights)};
}

QuadratureGrid QuadratureGrid::gauss_hermite(int dims, int nodes_per_dim) {
  if (dims < 1) throw std::invalid_argument("gauss_hermite: dims must be >= 1");
  auto [nodes1, weights1] = gauss_hermite_rule(nodes_per_dim);
  std::size_t total = 1;
  for (int d = 0; d < dims; ++d) total *= static_cast<std::size_t>(nodes_per_dim);

  QuadratureGrid grid;
  grid.scheme = GridScheme::tensor_gauss_hermite;
  grid.nodes.resize(static_cast<Eigen::Index>(total), dims);
  grid.weights.resize(static_cast<Eigen::Index>(total));
  std::vector<int> index(dims, 0);
  for (std::size_t q = 0; q < total; ++q) {
    double w = 1.0;
    for (int d = 0; d < dims; ++d) {
      grid.nodes(static_cast<Eigen::Index>(q), d) = nodes1[index[d]];
      w *= weights1[index[d]];
    }
    grid.weights(static_cast<Eigen::Index>(q)) = w;
    for (int d = dims - 1; d >= 0; --d) {
      if (++index[d] < nodes_per_dim) break;
      index[d] = 0;
    }
  }
  grid.weights /= grid.weights.sum();
  return grid;
}

// Halton sequence with a seeded Cranley-Patterson shift, mapped through the
// inverse normal CDF. Deterministic for a given (dims, size, seed).
QuadratureGrid QuadratureGrid::quasi_monte_carlo(int dims, std::size_t size, std::uint64_t seed) {
  if (dims < 1) throw std::invalid_argument("quasi_monte_carlo: dims must be >= 1");
  if (size == 0) throw std::invalid_argument("quasi_monte_carlo: size must be positive");
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  if (dims > static_cast<int>(std::size(primes)))
    throw std::invalid_argument("quasi_monte_carlo: too many dimensions");

  std::vector<double> shift(dims);
  for (int d = 0; d < dims; ++d)
    shift[d] = static_cast<double>(splitmix64(seed + static_cast<std::uint64_t>(d)) >> 11) *
               0x1.0p-53;

  QuadratureGrid grid;
  grid.scheme = GridScheme::quasi_monte_carlo;
  grid.nodes.resize(static_cast<Eigen::Index>(size), dims);
  grid.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(size),
                                           1.0 / static_cast<double>(size));
  for (std::size_t i = 0; i < size; ++i) {
    for (int d = 0; d < dims; ++d) {
      double base = primes[d];
      double inv = 1.0 / base, f = inv;
      double u = 0.0;
      for (std::size_t k = i + 1; k > 0; k /= static_cast<std::size_t>(base)) {
        u += f * static_cast<double>(k % static_cast<std::size_t>(base));
        f *= inv;
      }
      u += shift[d];
      u -= std::floor(u);
      u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
      grid.nodes(static_cast<Eigen::Index>(i), d) = special::inv_norm_cdf(u);
    }
  }
  return grid;
}

QuadratureGrid QuadratureGrid::automatic(int dims, int nodes_per_dim, std::size_t qmc_size,
                                         std::uint64_t seed, int max_tensor_dims) {
  if (dims <= max_tensor_dims) return gauss_hermite(dims, nodes_per_dim);
  return quasi_monte_carlo(dims, qmc_size, seed);
}

}  // namespace procrisk
