#include "procrisk/grm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "procrisk/rng.hpp"
#include "procrisk/selection.hpp"
#include "procrisk/special.hpp"

namespace procrisk {

namespace {

constexpr double kTinyProb = 1e-300;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double logistic_deriv(double p) { return p * (1.0 - p); }

// Observed cells in compressed row storage.
struct Encoded {
  int items = 0;
  int categories = 0;
  std::vector<std::size_t> row_offset;  // rows_used + 1
  std::vector<int> item;
  std::vector<int> category;
  std::size_t rows_used = 0;
  std::size_t rows_skipped = 0;
};

Encoded encode(const CategoricalMatrix& data, int categories) {
  Encoded e;
  e.items = static_cast<int>(data.flags.size());
  e.categories = categories;
  e.row_offset.push_back(0);
  for (std::size_t i = 0; i < data.authorities.size(); ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < data.flags.size(); ++j) {
      const auto& cell = data.at(i, j);
      if (!cell) continue;
      if (*cell < 0 || *cell >= categories)
        throw GrmError("category " + std::to_string(*cell) + " outside 0.." +
                       std::to_string(categories - 1) + " (item " + data.flags[j] + ")");
      e.item.push_back(static_cast<int>(j));
      e.category.push_back(*cell);
      ++count;
    }
    if (count == 0) {
      ++e.rows_skipped;
      continue;
    }
    ++e.rows_used;
    e.row_offset.push_back(e.item.size());
  }
  return e;
}

// log P(Y_j = y | theta_q), laid out [(q * J + j) * C + y].
std::vector<double> log_prob_table(const GrmParams& p, const QuadratureGrid& grid) {
  const Eigen::Index Q = grid.nodes.rows();
  const int J = p.items(), C = p.categories();
  Eigen::MatrixXd zbase = grid.nodes * p.slopes.transpose();  // Q x J
  std::vector<double> table(static_cast<std::size_t>(Q) * J * C);
  for (Eigen::Index q = 0; q < Q; ++q) {
    for (int j = 0; j < J; ++j) {
      double cum_prev = 1.0;
      double* out = table.data() + (static_cast<std::size_t>(q) * J + j) * C;
      for (int y = 1; y < C; ++y) {
        double cum = special::logistic(zbase(q, j) + p.intercepts(j, y - 1));
        out[y - 1] = std::log(std::max(cum_prev - cum, kTinyProb));
        cum_prev = cum;
      }
      out[C - 1] = std::log(std::max(cum_prev, kTinyProb));
    }
  }
  return table;
}

// Forward pass: marginal log-likelihood, optionally accumulating expected
// counts r. Summation is fixed-order so reruns are bit-identical.
double e_step(const Encoded& e, const std::vector<double>& table, const QuadratureGrid& grid,
              std::vector<double>* r) {
  const Eigen::Index Q = grid.nodes.rows();
  const int J = e.items, C = e.categories;
  std::vector<double> log_w(static_cast<std::size_t>(Q));
  for (Eigen::Index q = 0; q < Q; ++q) log_w[static_cast<std::size_t>(q)] = std::log(grid.weights(q));
  if (r) r->assign(table.size(), 0.0);

  double loglik = 0.0;
  std::vector<double> row_log(static_cast<std::size_t>(Q));
  for (std::size_t i = 0; i < e.rows_used; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index q = 0; q < Q; ++q) {
      double s = log_w[static_cast<std::size_t>(q)];
      const std::size_t base = static_cast<std::size_t>(q) * J;
      for (std::size_t o = e.row_offset[i]; o < e.row_offset[i + 1]; ++o)
        s += table[(base + static_cast<std::size_t>(e.item[o])) * C + e.category[o]];
      row_log[static_cast<std::size_t>(q)] = s;
      best = std::max(best, s);
    }
    double sum = 0.0;
    for (Eigen::Index q = 0; q < Q; ++q)
      sum += std::exp(row_log[static_cast<std::size_t>(q)] - best);
    loglik += best + std::log(sum);
    if (!r) continue;
    for (Eigen::Index q = 0; q < Q; ++q) {
      double post = std::exp(row_log[static_cast<std::size_t>(q)] - best) / sum;
      if (post == 0.0) continue;
      const std::size_t base = static_cast<std::size_t>(q) * J;
      for (std::size_t o = e.row_offset[i]; o < e.row_offset[i + 1]; ++o)
        (*r)[(base + static_cast<std::size_t>(e.item[o])) * C + e.category[o]] += post;
    }
  }
  return loglik;
}

// Expected complete-data objective for one item and its gradient with
// respect to the slopes (free entries only) and raw intercepts.
struct ItemWorkspace {
  const QuadratureGrid* grid = nullptr;
  const std::vector<double>* r = nullptr;  // expected counts, full table layout
  int j = 0, J = 0, C = 0;
  std::vector<int> free_dims;

  // x = [free slopes..., t...] with b1 = t1, b_y = b_{y-1} - exp(t_y).
  int size() const { return static_cast<int>(free_dims.size()) + C - 1; }

  Eigen::VectorXd slopes_from(const Eigen::VectorXd& x, int dims) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(dims);
    for (std::size_t k = 0; k < free_dims.size(); ++k) a(free_dims[k]) = x(static_cast<int>(k));
    return a;
  }

  Eigen::VectorXd intercepts_from(const Eigen::VectorXd& x) const {
    const int F = static_cast<int>(free_dims.size());
    Eigen::VectorXd b(C - 1);
    b(0) = x(F);
    for (int y = 1; y < C - 1; ++y) b(y) = b(y - 1) - std::exp(x(F + y));
    return b;
  }

  // Returns the objective (to maximize); gradient written into g.
  double value_grad(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    const int F = static_cast<int>(free_dims.size());
    const int D = grid->dims();
    Eigen::VectorXd a = slopes_from(x, D);
    Eigen::VectorXd b = intercepts_from(x);
    if (!b.allFinite()) return -std::numeric_limits<double>::infinity();

    const Eigen::Index Q = grid->nodes.rows();
    double value = 0.0;
    Eigen::VectorXd ga = Eigen::VectorXd::Zero(D);
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(C - 1);
    std::vector<double> cum(static_cast<std::size_t>(C) + 1), prob(static_cast<std::size_t>(C)),
        w(static_cast<std::size_t>(C));
    for (Eigen::Index q = 0; q < Q; ++q) {
      const double* rq =
          r->data() + (static_cast<std::size_t>(q) * J + static_cast<std::size_t>(j)) * C;
      double z0 = grid->nodes.row(q).dot(a);
      cum[0] = 1.0;
      cum[static_cast<std::size_t>(C)] = 0.0;
      for (int y = 1; y < C; ++y) cum[static_cast<std::size_t>(y)] = special::logistic(z0 + b(y - 1));
      for (int y = 0; y < C; ++y) {
        prob[static_cast<std::size_t>(y)] =
            std::max(cum[static_cast<std::size_t>(y)] - cum[static_cast<std::size_t>(y) + 1], kTinyProb);
        w[static_cast<std::size_t>(y)] = rq[y] / prob[static_cast<std::size_t>(y)];
        if (rq[y] != 0.0) value += rq[y] * std::log(prob[static_cast<std::size_t>(y)]);
      }
      double coef_sum = 0.0;
      for (int m = 1; m < C; ++m) {
        double coef = logistic_deriv(cum[static_cast<std::size_t>(m)]) *
                      (w[static_cast<std::size_t>(m)] - w[static_cast<std::size_t>(m) - 1]);
        gb(m - 1) += coef;
        coef_sum += coef;
      }
      if (coef_sum != 0.0) ga += coef_sum * grid->nodes.row(q).transpose();
    }
    g.resize(size());
    for (int k = 0; k < F; ++k) g(k) = ga(free_dims[static_cast<std::size_t>(k)]);
    // chain rule through the ordered reparameterization
    double tail = 0.0;
    for (int y = C - 2; y >= 1; --y) {
      tail += gb(y);
      g(F + y) = -std::exp(x(F + y)) * tail;
    }
    g(F) = gb.sum();
    return value;
  }
};

// Small dense BFGS with Armijo backtracking; never returns a point worse
// than the start, which keeps every EM cycle an ascent step.
double bfgs_maximize(const ItemWorkspace& obj, Eigen::VectorXd& x, int max_iter) {
  const int n = obj.size();
  Eigen::VectorXd g(n), g_new(n);
  double f = obj.value_grad(x, g);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  for (int iter = 0; iter < max_iter; ++iter) {
    double scale = std::max(1.0, std::fabs(f));
    if (g.lpNorm<Eigen::Infinity>() <= 1e-8 * scale) break;
    Eigen::VectorXd p = H * g;  // ascent direction
    double slope = g.dot(p);
    if (!(slope > 0.0)) {
      H.setIdentity();
      p = g;
      slope = g.dot(p);
      if (!(slope > 0.0)) break;
    }
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = f;
    for (int half = 0; half < 40; ++half) {
      x_new = x + step * p;
      f_new = obj.value_grad(x_new, g_new);
      if (std::isfinite(f_new) && f_new >= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd yv = g_new - g;  // gradient of -f increases: yv = -(dg)
    double sy = -s.dot(yv);          // curvature along the step
    x = x_new;
    f = f_new;
    g = g_new;
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      // inverse-Hessian update for the minimization of -f
      Eigen::VectorXd ym = -yv;
      double rho = 1.0 / s.dot(ym);
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * ym.transpose()) * H * (I - rho * ym * s.transpose()) +
          rho * s * s.transpose();
    }
  }
  return f;
}

std::vector<int> echelon_free_dims(int item, int dims) {
  std::vector<int> free;
  for (int d = 0; d < dims; ++d)
    if (d <= item) free.push_back(d);
  return free;
}

GrmParams starting_values(const Encoded& e, const CategoricalMatrix& data, int dims) {
  const int J = e.items, C = e.categories;
  GrmParams p;
  p.slopes = Eigen::MatrixXd::Zero(J, dims);
  for (int j = 0; j < J; ++j)
    for (int d : echelon_free_dims(j, dims)) p.slopes(j, d) = 1.0;

  // intercepts from inverse-logistic cumulative category frequencies
  p.intercepts.resize(J, C - 1);
  for (int j = 0; j < J; ++j) {
    std::vector<double> counts(static_cast<std::size_t>(C), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < data.authorities.size(); ++i) {
      const auto& cell = data.at(i, static_cast<std::size_t>(j));
      if (!cell) continue;
      counts[static_cast<std::size_t>(*cell)] += 1.0;
      total += 1.0;
    }
    double tail = total;
    double prev = std::numeric_limits<double>::infinity();
    for (int y = 1; y < C; ++y) {
      tail -= counts[static_cast<std::size_t>(y) - 1];
      double prop = std::clamp(tail / total, 1e-3, 1.0 - 1e-3);
      double b = std::log(prop / (1.0 - prop));
      if (b >= prev - 1e-2) b = prev - 1e-2;  // keep the ordering strict
      p.intercepts(j, y - 1) = b;
      prev = b;
    }
  }
  return p;
}

}  // namespace

bool GrmParams::intercepts_ordered() const {
  for (Eigen::Index j = 0; j < intercepts.rows(); ++j)
    for (Eigen::Index y = 1; y < intercepts.cols(); ++y)
      if (!(intercepts(j, y) < intercepts(j, y - 1))) return false;
  return true;
}

double cumulative_prob(const Eigen::VectorXd& theta, const Eigen::VectorXd& slopes_j,
                       double intercept_jy) {
  return special::logistic(slopes_j.dot(theta) + intercept_jy);
}

Eigen::VectorXd category_probs(const Eigen::VectorXd& theta, const Eigen::VectorXd& slopes_j,
                               const Eigen::VectorXd& intercepts_j) {
  const int C = static_cast<int>(intercepts_j.size()) + 1;
  for (int y = 1; y < C - 1; ++y)
    if (!(intercepts_j(y) < intercepts_j(y - 1)))
      throw GrmError("category_probs: intercepts must be strictly decreasing");
  Eigen::VectorXd probs(C);
  double prev = 1.0;
  for (int y = 1; y < C; ++y) {
    double cum = cumulative_prob(theta, slopes_j, intercepts_j(y - 1));
    probs(y - 1) = prev - cum;
    prev = cum;
  }
  probs(C - 1) = prev;
  return probs;
}

int free_parameter_count(int items, int categories, int dims) {
  return items * (categories - 1) + items * dims - dims * (dims - 1) / 2;
}

double marginal_loglik(const GrmParams& params, const CategoricalMatrix& data,
                       const QuadratureGrid& grid) {
  if (!params.intercepts_ordered()) throw GrmError("marginal_loglik: non-ordered intercepts");
  if (grid.dims() != params.dims())
    throw GrmError("marginal_loglik: grid dimension does not match the model");
  Encoded e = encode(data, params.categories());
  auto table = log_prob_table(params, grid);
  return e_step(e, table, grid, nullptr);
}

Eigen::VectorXd marginal_loglik_gradient(const GrmParams& params, const CategoricalMatrix& data,
                                         const QuadratureGrid& grid) {
  if (!params.intercepts_ordered())
    throw GrmError("marginal_loglik_gradient: non-ordered intercepts");
  Encoded e = encode(data, params.categories());
  auto table = log_prob_table(params, grid);
  std::vector<double> r;
  e_step(e, table, grid, &r);

  // Expected complete-data gradient at the current parameters equals the
  // marginal gradient (Fisher's identity); exact at grid resolution.
  const int J = params.items(), D = params.dims(), C = params.categories();
  const Eigen::Index Q = grid.nodes.rows();
  Eigen::VectorXd out(J * (D + C - 1));
  for (int j = 0; j < J; ++j) {
    Eigen::VectorXd ga = Eigen::VectorXd::Zero(D);
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(C - 1);
    for (Eigen::Index q = 0; q < Q; ++q) {
      const double* rq =
          r.data() + (static_cast<std::size_t>(q) * J + static_cast<std::size_t>(j)) * C;
      double z0 = grid.nodes.row(q).dot(params.slopes.row(j));
      std::vector<double> cum(static_cast<std::size_t>(C) + 1);
      cum[0] = 1.0;
      cum[static_cast<std::size_t>(C)] = 0.0;
      for (int y = 1; y < C; ++y)
        cum[static_cast<std::size_t>(y)] = special::logistic(z0 + params.intercepts(j, y - 1));
      std::vector<double> w(static_cast<std::size_t>(C));
      for (int y = 0; y < C; ++y) {
        double prob = std::max(cum[static_cast<std::size_t>(y)] - cum[static_cast<std::size_t>(y) + 1],
                               kTinyProb);
        w[static_cast<std::size_t>(y)] = rq[y] / prob;
      }
      double coef_sum = 0.0;
      for (int m = 1; m < C; ++m) {
        double coef = logistic_deriv(cum[static_cast<std::size_t>(m)]) *
                      (w[static_cast<std::size_t>(m)] - w[static_cast<std::size_t>(m) - 1]);
        gb(m - 1) += coef;
        coef_sum += coef;
      }
      if (coef_sum != 0.0) ga += coef_sum * grid.nodes.row(q).transpose();
    }
    out.segment(j * (D + C - 1), D) = ga;
    out.segment(j * (D + C - 1) + D, C - 1) = gb;
  }
  return out;
}

FitResult fit(const CategoricalMatrix& data, int dims, const FitConfig& config) {
  if (dims < 1) throw GrmError("fit: dims must be >= 1");
  const int J = static_cast<int>(data.flags.size());
  const int C = config.categories;
  if (J == 0) throw GrmError("fit: no items");
  if (dims > J) throw GrmError("fit: dims cannot exceed the number of items");

  Encoded e = encode(data, C);
  for (int j = 0; j < J; ++j) {
    std::vector<bool> seen(static_cast<std::size_t>(C), false);
    for (std::size_t i = 0; i < data.authorities.size(); ++i)
      if (data.at(i, static_cast<std::size_t>(j)))
        seen[static_cast<std::size_t>(*data.at(i, static_cast<std::size_t>(j)))] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2)
      throw GrmError("fit: item '" + data.flags[static_cast<std::size_t>(j)] +
                     "' shows fewer than two observed categories");
  }

  QuadratureGrid grid = QuadratureGrid::automatic(dims, config.gh_nodes_per_dim, config.qmc_size,
                                                  config.seed, config.max_tensor_dims);
  GrmParams params = starting_values(e, data, dims);

  FitResult res;
  res.config = config;
  res.rows_used = e.rows_used;
  res.rows_skipped = e.rows_skipped;
  res.free_parameters = free_parameter_count(J, C, dims);

  std::vector<double> r;
  double prev_ll = -std::numeric_limits<double>::infinity();
  bool param_converged = false;
  for (int cycle = 0; cycle <= config.max_em_cycles; ++cycle) {
    auto table = log_prob_table(params, grid);
    double ll = e_step(e, table, grid, &r);
    res.loglik_trace.push_back(ll);
    res.loglik = ll;
    res.em_cycles = cycle;
    double rel = std::fabs(ll - prev_ll) / (1.0 + std::fabs(ll));
    if (param_converged || rel < config.loglik_rel_tol) {
      res.converged = true;
      break;
    }
    prev_ll = ll;
    if (cycle == config.max_em_cycles) break;

    double max_change = 0.0;
    for (int j = 0; j < J; ++j) {
      ItemWorkspace ws;
      ws.grid = &grid;
      ws.r = &r;
      ws.j = j;
      ws.J = J;
      ws.C = C;
      ws.free_dims = echelon_free_dims(j, dims);
      const int F = static_cast<int>(ws.free_dims.size());
      Eigen::VectorXd x(ws.size());
      for (int k = 0; k < F; ++k) x(k) = params.slopes(j, ws.free_dims[static_cast<std::size_t>(k)]);
      x(F) = params.intercepts(j, 0);
      for (int y = 1; y < C - 1; ++y)
        x(F + y) = std::log(std::max(params.intercepts(j, y - 1) - params.intercepts(j, y), 1e-10));
      bfgs_maximize(ws, x, 100);
      Eigen::VectorXd a = ws.slopes_from(x, dims);
      Eigen::VectorXd b = ws.intercepts_from(x);
      max_change = std::max(max_change, (a - params.slopes.row(j).transpose()).lpNorm<Eigen::Infinity>());
      max_change = std::max(max_change, (b - params.intercepts.row(j).transpose()).lpNorm<Eigen::Infinity>());
      params.slopes.row(j) = a.transpose();
      params.intercepts.row(j) = b.transpose();
    }
    if (max_change < config.param_abs_tol) param_converged = true;
  }

  if (!res.converged)
    throw GrmError("fit: EM did not converge within " + std::to_string(config.max_em_cycles) +
                   " cycles (last log-likelihood " + std::to_string(res.loglik) + ")");

  // latent dimensions are sign-invariant; anchor the echelon diagonal
  for (int d = 0; d < std::min(dims, J); ++d)
    if (params.slopes(d, d) < 0.0) params.slopes.col(d) *= -1.0;

  res.params = params;
  RotationOptions rot = config.rotation;
  res.rotation = oblimin_rotate(slopes_to_loadings(params.slopes), rot);
  res.irt = irt_summary(params, data.flags);
  InfoCriteria c = info_criteria(res.loglik, res.free_parameters, static_cast<int>(res.rows_used));
  res.aic = c.aic;
  res.sabic = c.sabic;
  res.hqc = c.hqc;
  res.bic = c.bic;
  return res;
}

Eigen::MatrixXd slopes_to_loadings(const Eigen::MatrixXd& slopes) {
  Eigen::MatrixXd out = slopes;
  for (Eigen::Index j = 0; j < slopes.rows(); ++j)
    out.row(j) /= std::sqrt(1.0 + slopes.row(j).squaredNorm());
  return out;
}

Eigen::MatrixXd loadings_to_slopes(const Eigen::MatrixXd& loadings) {
  Eigen::MatrixXd out = loadings;
  for (Eigen::Index j = 0; j < loadings.rows(); ++j) {
    double h2 = loadings.row(j).squaredNorm();
    if (!(h2 < 1.0))
      throw GrmError("loadings_to_slopes: row communality must be below one");
    out.row(j) /= std::sqrt(1.0 - h2);
  }
  return out;
}

double overall_discrimination(const Eigen::VectorXd& slopes_j) { return slopes_j.norm(); }

Eigen::VectorXd overall_difficulty(const Eigen::VectorXd& slopes_j,
                                   const Eigen::VectorXd& intercepts_j) {
  double alpha = overall_discrimination(slopes_j);
  if (alpha == 0.0) throw GrmError("overall_difficulty: undefined for a zero slope vector");
  return -intercepts_j / alpha;
}

IrtSummary irt_summary(const GrmParams& params, const std::vector<std::string>& item_names) {
  IrtSummary s;
  s.items = item_names;
  const int J = params.items(), Cm1 = params.categories() - 1;
  s.discrimination.resize(J);
  s.difficulties.resize(J, Cm1);
  for (int j = 0; j < J; ++j) {
    double alpha = overall_discrimination(params.slopes.row(j));
    s.discrimination(j) = alpha;
    if (alpha == 0.0)
      s.difficulties.row(j).setConstant(kNaN);
    else
      s.difficulties.row(j) = overall_difficulty(params.slopes.row(j).transpose(),
                                                 params.intercepts.row(j).transpose());
  }
  return s;
}

CategoricalMatrix simulate(const GrmParams& params, std::size_t n, std::uint64_t seed) {
  const int J = params.items(), D = params.dims(), C = params.categories();
  if (!params.intercepts_ordered()) throw GrmError("simulate: non-ordered intercepts");
  CategoricalMatrix out;
  out.categories = C;
  for (int j = 0; j < J; ++j) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "item_%02d", j + 1);
    out.flags.push_back(buf);
  }
  Rng rng(seed);
  Eigen::VectorXd theta(D);
  out.cells.reserve(n * static_cast<std::size_t>(J));
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sim_%06zu", i + 1);
    out.authorities.push_back(buf);
    for (int d = 0; d < D; ++d) theta(d) = rng.normal();
    for (int j = 0; j < J; ++j) {
      double u = rng.uniform();
      int y = 0;
      for (int level = 1; level < C; ++level)
        if (u < cumulative_prob(theta, params.slopes.row(j).transpose(),
                                params.intercepts(j, level - 1)))
          y = level;
      out.cells.emplace_back(y);
    }
  }
  return out;
}

}  // namespace procrisk
