#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace procrisk {

/// Oblique rotation output. `loadings` is the rotated pattern with columns
/// ordered by descending SS loadings and signed so each column's largest
/// loading is positive; `factor_correlations` follows the same ordering.
/// Communalities come from the unrotated loadings and are rotation
/// invariant, so communality + uniqueness = 1 per item.
struct RotatedSolution {
  Eigen::MatrixXd loadings;             // J x D pattern
  Eigen::MatrixXd factor_correlations;  // D x D, unit diagonal
  Eigen::VectorXd communalities;        // J
  Eigen::VectorXd uniquenesses;         // J
  Eigen::VectorXd ss_loadings;          // D, descending
  Eigen::VectorXd explained_variance_prop;  // ss_loadings / J
  double criterion = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct RotationOptions {
  double gamma = 0.0;        // 0 = direct quartimin, the oblimin default
  double tolerance = 1e-5;   // projected-gradient norm
  int max_iterations = 50000;
  int random_starts = 8;     // beyond the identity start
  std::uint64_t seed = 0x5eed;
};

/// Direct oblimin value of a loading pattern.
double oblimin_criterion(const Eigen::MatrixXd& loadings, double gamma = 0.0);

/// Minimizes the direct oblimin criterion over oblique rotations by
/// gradient projection, keeping the best of several deterministic starts.
/// D = 1 returns the input with a unit factor correlation.
RotatedSolution oblimin_rotate(const Eigen::MatrixXd& loadings,
                               const RotationOptions& options = {});

}  // namespace procrisk
