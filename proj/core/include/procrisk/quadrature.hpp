#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace procrisk {

enum class GridScheme { tensor_gauss_hermite, quasi_monte_carlo };

/// Integration grid against the standard multivariate normal: rows of
/// `nodes` are the abscissae, `weights` are positive and sum to one.
struct QuadratureGrid {
  GridScheme scheme = GridScheme::tensor_gauss_hermite;
  Eigen::MatrixXd nodes;    // Q x D
  Eigen::VectorXd weights;  // Q

  std::size_t size() const { return static_cast<std::size_t>(nodes.rows()); }
  int dims() const { return static_cast<int>(nodes.cols()); }

  static QuadratureGrid gauss_hermite(int dims, int nodes_per_dim);
  static QuadratureGrid quasi_monte_carlo(int dims, std::size_t size, std::uint64_t seed);

  /// Tensor Gauss-Hermite up to max_tensor_dims, deterministic
  /// low-discrepancy grid above (tensor grids explode combinatorially).
  static QuadratureGrid automatic(int dims, int nodes_per_dim, std::size_t qmc_size,
                                  std::uint64_t seed, int max_tensor_dims = 3);
};

/// Univariate Gauss-Hermite rule for N(0,1) expectations: nodes ascending,
/// weights summing to one.
std::pair<std::vector<double>, std::vector<double>> gauss_hermite_rule(int n);

}  // namespace procrisk
