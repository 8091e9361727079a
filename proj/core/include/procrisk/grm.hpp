#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "procrisk/discretize.hpp"
#include "procrisk/quadrature.hpp"
#include "procrisk/rotation.hpp"

namespace procrisk {

struct GrmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Graded response model parameters: J x D slopes and J x (C-1) intercepts,
/// strictly decreasing within each item so every category keeps positive
/// probability.
struct GrmParams {
  Eigen::MatrixXd slopes;
  Eigen::MatrixXd intercepts;

  int items() const { return static_cast<int>(slopes.rows()); }
  int dims() const { return static_cast<int>(slopes.cols()); }
  int categories() const { return static_cast<int>(intercepts.cols()) + 1; }
  bool intercepts_ordered() const;
};

/// P(Y >= y | theta) = logistic(a'theta + b_y). y = 0 is 1 by convention,
/// which this overload does not cover.
double cumulative_prob(const Eigen::VectorXd& theta, const Eigen::VectorXd& slopes_j,
                       double intercept_jy);

/// Category probabilities as differences of consecutive cumulative
/// probabilities; nonnegative, sum to one. Throws on non-ordered intercepts.
Eigen::VectorXd category_probs(const Eigen::VectorXd& theta, const Eigen::VectorXd& slopes_j,
                               const Eigen::VectorXd& intercepts_j);

/// Free parameters of the exploratory model: J(C-1) intercepts plus JD
/// slopes minus the D(D-1)/2 echelon identification zeros.
int free_parameter_count(int items, int categories, int dims);

/// Quadrature approximation of the marginal log-likelihood; absent cells
/// are skipped, rows without any observed cell contribute nothing.
double marginal_loglik(const GrmParams& params, const CategoricalMatrix& data,
                       const QuadratureGrid& grid);

/// Gradient of the quadrature-approximated marginal log-likelihood with
/// respect to all slopes and intercepts, laid out item-major
/// (D slopes then C-1 intercepts per item).
Eigen::VectorXd marginal_loglik_gradient(const GrmParams& params, const CategoricalMatrix& data,
                                         const QuadratureGrid& grid);

struct FitConfig {
  int categories = 4;
  int gh_nodes_per_dim = 15;
  std::size_t qmc_size = 5000;
  int max_tensor_dims = 3;    // tensor Gauss-Hermite up to here, QMC above
  std::uint64_t seed = 0;
  int max_em_cycles = 2000;
  double loglik_rel_tol = 1e-6;
  double param_abs_tol = 1e-5;
  RotationOptions rotation;
};

/// Item summaries across dimensions: overall discrimination (slope norm)
/// and overall difficulties (-intercept / discrimination), increasing in y.
struct IrtSummary {
  std::vector<std::string> items;
  Eigen::VectorXd discrimination;   // J
  Eigen::MatrixXd difficulties;     // J x (C-1), NaN rows for null items
};

struct FitResult {
  GrmParams params;
  double loglik = 0.0;
  int free_parameters = 0;
  std::size_t rows_used = 0;
  std::size_t rows_skipped = 0;  // no observed cells
  int em_cycles = 0;
  bool converged = false;
  std::vector<double> loglik_trace;  // one entry per EM cycle, nondecreasing
  RotatedSolution rotation;
  IrtSummary irt;
  double aic = 0.0, sabic = 0.0, hqc = 0.0, bic = 0.0;
  FitConfig config;
};

/// Marginal maximum likelihood via EM (posterior weights on the quadrature
/// grid, per-item quasi-Newton M-steps). Identification: echelon slope
/// pattern (slope jd fixed to 0 for d > j on the leading items) with a
/// standard-normal latent. Deterministic for fixed config. Throws GrmError
/// on non-convergence or an item with fewer than two observed categories.
FitResult fit(const CategoricalMatrix& data, int dims, const FitConfig& config = {});

/// l_jd = a_jd / sqrt(1 + sum_d a_jd^2), rowwise.
Eigen::MatrixXd slopes_to_loadings(const Eigen::MatrixXd& slopes);

/// Inverse of slopes_to_loadings; requires each row's squared norm < 1.
Eigen::MatrixXd loadings_to_slopes(const Eigen::MatrixXd& loadings);

/// alpha_j: Euclidean norm of the item's slope vector.
double overall_discrimination(const Eigen::VectorXd& slopes_j);

/// beta_jy = -b_jy / alpha_j; throws when alpha_j = 0.
Eigen::VectorXd overall_difficulty(const Eigen::VectorXd& slopes_j,
                                   const Eigen::VectorXd& intercepts_j);

IrtSummary irt_summary(const GrmParams& params, const std::vector<std::string>& item_names);

/// Draws a complete n x J categorical matrix from the model, latent traits
/// standard normal. Deterministic for a given seed.
CategoricalMatrix simulate(const GrmParams& params, std::size_t n, std::uint64_t seed);

}  // namespace procrisk
