#include "procrisk/rotation.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "procrisk/rng.hpp"

namespace procrisk {

namespace {

// Criterion value and its gradient with respect to the pattern.
std::pair<double, Eigen::MatrixXd> oblimin_value_grad(const Eigen::MatrixXd& L, double gamma) {
  const Eigen::Index J = L.rows(), D = L.cols();
  Eigen::MatrixXd L2 = L.cwiseProduct(L);
  Eigen::MatrixXd N = Eigen::MatrixXd::Ones(D, D) - Eigen::MatrixXd::Identity(D, D);
  Eigen::MatrixXd X = L2 * N;
  if (gamma != 0.0) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(J, J) -
                        Eigen::MatrixXd::Constant(J, J, gamma / static_cast<double>(J));
    X = C * X;
  }
  double f = 0.25 * (L2.cwiseProduct(X)).sum();
  Eigen::MatrixXd Gq = L.cwiseProduct(X);
  return {f, Gq};
}

struct GpaResult {
  Eigen::MatrixXd T;
  Eigen::MatrixXd L;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Gradient projection on the oblique manifold (columns of T of unit
// length), after Jennrich's GPFoblq.
GpaResult gpa_oblique(const Eigen::MatrixXd& A, Eigen::MatrixXd T, const RotationOptions& opt) {
  auto pattern = [&](const Eigen::MatrixXd& Tm) -> Eigen::MatrixXd {
    return A * Tm.inverse().transpose();
  };

  GpaResult res;
  Eigen::MatrixXd L = pattern(T);
  auto [f, Gq] = oblimin_value_grad(L, opt.gamma);
  Eigen::MatrixXd G = -(T.inverse().transpose()) * Gq.transpose() * L;

  double al = 1.0;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    res.iterations = iter;
    // remove the component changing column lengths
    Eigen::MatrixXd Gp = G - T * (T.cwiseProduct(G)).colwise().sum().asDiagonal().toDenseMatrix();
    double s = Gp.norm();
    if (s < opt.tolerance) {
      res.converged = true;
      break;
    }
    al *= 2.0;
    bool improved = false;
    Eigen::MatrixXd Tt, Lt, Gqt;
    double ft = f;
    for (int half = 0; half <= 20; ++half) {
      Eigen::MatrixXd X = T - al * Gp;
      Eigen::VectorXd norms = X.colwise().norm();
      if (norms.minCoeff() <= 0.0) {
        al /= 2.0;
        continue;
      }
      Tt = X * norms.cwiseInverse().asDiagonal();
      if (std::fabs(Tt.determinant()) < 1e-12) {
        al /= 2.0;
        continue;
      }
      Lt = pattern(Tt);
      auto [f_new, Gq_new] = oblimin_value_grad(Lt, opt.gamma);
      if (f - f_new > 0.5 * s * s * al) {
        ft = f_new;
        Gqt = Gq_new;
        improved = true;
        break;
      }
      al /= 2.0;
    }
    if (!improved) {
      res.converged = true;  // no descent step left at this scale
      break;
    }
    if (ft < 1e-12) {
      // criterion at its floor: exact simple structure (square patterns
      // can approach it only asymptotically, with an exploding rotation)
      T = Tt;
      L = Lt;
      f = ft;
      res.converged = true;
      break;
    }
    if (f - ft < 1e-14 * std::max(1.0, std::fabs(f))) {
      T = Tt;
      L = Lt;
      f = ft;
      res.converged = true;  // criterion stalled at machine precision
      break;
    }
    T = Tt;
    L = Lt;
    f = ft;
    G = -(T.inverse().transpose()) * Gqt.transpose() * L;
  }
  res.T = T;
  res.L = L;
  res.f = f;
  return res;
}

void canonicalize(Eigen::MatrixXd& L, Eigen::MatrixXd& Phi) {
  const Eigen::Index D = L.cols();
  // sign: largest-magnitude loading of each column positive
  for (Eigen::Index d = 0; d < D; ++d) {
    Eigen::Index at = 0;
    L.col(d).cwiseAbs().maxCoeff(&at);
    if (L(at, d) < 0.0) {
      L.col(d) *= -1.0;
      Phi.row(d) *= -1.0;
      Phi.col(d) *= -1.0;
    }
  }
  // order: descending column sum of squares
  Eigen::VectorXd ss = L.colwise().squaredNorm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(D));
  for (Eigen::Index d = 0; d < D; ++d) order[static_cast<std::size_t>(d)] = d;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return ss(a) > ss(b); });
  Eigen::MatrixXd L2(L.rows(), D), Phi2(D, D);
  for (Eigen::Index d = 0; d < D; ++d) L2.col(d) = L.col(order[static_cast<std::size_t>(d)]);
  for (Eigen::Index a = 0; a < D; ++a)
    for (Eigen::Index b = 0; b < D; ++b)
      Phi2(a, b) = Phi(order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]);
  L = std::move(L2);
  Phi = std::move(Phi2);
}

RotatedSolution finish(const Eigen::MatrixXd& unrotated, Eigen::MatrixXd L, Eigen::MatrixXd Phi,
                       double criterion, int iterations, bool converged) {
  RotatedSolution out;
  canonicalize(L, Phi);
  out.loadings = std::move(L);
  out.factor_correlations = std::move(Phi);
  out.communalities = unrotated.rowwise().squaredNorm();
  out.uniquenesses = Eigen::VectorXd::Ones(unrotated.rows()) - out.communalities;
  out.ss_loadings = out.loadings.colwise().squaredNorm();
  out.explained_variance_prop = out.ss_loadings / static_cast<double>(unrotated.rows());
  out.criterion = criterion;
  out.iterations = iterations;
  out.converged = converged;
  return out;
}

}  // namespace

double oblimin_criterion(const Eigen::MatrixXd& loadings, double gamma) {
  return oblimin_value_grad(loadings, gamma).first;
}

RotatedSolution oblimin_rotate(const Eigen::MatrixXd& loadings, const RotationOptions& options) {
  const Eigen::Index D = loadings.cols();
  if (D < 1) throw std::invalid_argument("oblimin_rotate: empty loading matrix");
  if (D == 1)
    return finish(loadings, loadings, Eigen::MatrixXd::Identity(1, 1),
                  oblimin_criterion(loadings, options.gamma), 0, true);
  if (loadings.rows() <= D)
    throw std::invalid_argument(
        "oblimin_rotate: need more items than factors (a square pattern can "
        "be rotated into exact simple structure only in the singular limit)");

  // Identity start plus deterministic random restarts; rotation criteria
  // have local minima.
  GpaResult best = gpa_oblique(loadings, Eigen::MatrixXd::Identity(D, D), options);
  Rng rng(options.seed);
  for (int r = 0; r < options.random_starts; ++r) {
    Eigen::MatrixXd T(D, D);
    do {
      for (Eigen::Index i = 0; i < D; ++i)
        for (Eigen::Index j = 0; j < D; ++j) T(i, j) = rng.normal();
    } while (std::fabs(T.determinant()) < 1e-6);
    for (Eigen::Index j = 0; j < D; ++j) T.col(j) /= T.col(j).norm();
    GpaResult cand = gpa_oblique(loadings, T, options);
    if (cand.f < best.f) best = cand;
  }
  if (!best.converged)
    throw std::runtime_error("oblimin_rotate: gradient projection did not converge within " +
                             std::to_string(options.max_iterations) + " iterations");
  Eigen::MatrixXd Phi = best.T.transpose() * best.T;
  return finish(loadings, best.L, Phi, best.f, best.iterations, best.converged);
}

}  // namespace procrisk
