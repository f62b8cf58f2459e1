#pragma once

// Poisson deconvolution factorization of a nonnegative hollow symmetric graph:
//   W ~ U A U^T + U H^T + H U^T
// under a generalized-KL loss on the upper triangle, an L1 penalty on the
// residual H, and a column-decorrelation penalty on U. Fitting alternates
// responsibility-weighted multiplicative updates for (A, U) with a scaled-form
// ADMM block for H; every sub-step is accepted only if the full objective does
// not increase, so the recorded objective trace is nonincreasing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pdtopics/common.hpp"
#include "pdtopics/graph.hpp"

namespace pdtopics {

struct SolverConfig {
  int k = 10;
  double lambda_h = -1.0;  // < 0: resolved to 0.1 * mean nonzero edge weight at fit time
  double gamma = 0.1;
  double rho = 1.0;
  double eps = 1e-10;
  int max_outer = 300;
  int max_admm = 30;
  double tol = 1e-6;
  double decorrelation_step = 1e-3;
  std::uint64_t seed = 0;
  int restarts = 1;
  bool update_h = true;   // false: H stays at its initialization
  bool warm_admm = true;  // false: reset (Z, Gamma) every outer iteration
  int max_h_inner = 50;
  double h_grad_tol = 1e-6;
  double admm_tol = 1e-8;

  void validate(int vocab_size) const {
    if (k < 1) throw ConfigError("solver: k must be >= 1");
    if (k > vocab_size) {
      throw ConfigError("solver: k (" + std::to_string(k) + ") exceeds vocabulary size (" +
                        std::to_string(vocab_size) + ")");
    }
    if (rho <= 0 || eps <= 0 || tol <= 0 || decorrelation_step <= 0) {
      throw ConfigError("solver: rho, eps, tol and decorrelation_step must be positive");
    }
    if (gamma < 0 || max_outer < 1 || max_admm < 1 || restarts < 1) {
      throw ConfigError("solver: gamma must be >= 0 and iteration counts >= 1");
    }
  }

  SolverConfig resolved(const CooccurrenceGraph& graph) const {
    SolverConfig out = *this;
    if (out.lambda_h < 0) out.lambda_h = 0.1 * graph.mean_edge_weight();
    return out;
  }
};

struct FactorModel {
  Eigen::MatrixXd U;  // V x K, columns L1-normalized
  Eigen::VectorXd A;  // K, diagonal topic importances
  Eigen::MatrixXd H;  // V x K, Frobenius norm 1 (or all-zero with h_is_zero)
  bool h_is_zero = false;

  int vocab_size() const { return static_cast<int>(U.rows()); }
  int topic_count() const { return static_cast<int>(U.cols()); }

  // Model intensity for an off-diagonal entry (i, j).
  double theta(int i, int j) const {
    double t = 0.0;
    for (int k = 0; k < topic_count(); ++k) {
      t += A[k] * U(i, k) * U(j, k) + U(i, k) * H(j, k) + H(i, k) * U(j, k);
    }
    return t;
  }
};

struct FitTraceEntry {
  int iteration = 0;
  double objective = 0.0;
  double kl = 0.0;
  double l1_h = 0.0;
  double rdec = 0.0;
  double admm_residual = 0.0;
};

struct FitTrace {
  std::vector<FitTraceEntry> entries;  // entry 0 records the initialization
  std::vector<std::string> warnings;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-major snapshot of the factors so per-edge loops run over contiguous
// K-vectors. Arithmetic order matches FactorModel::theta exactly.
struct EdgeKernel {
  RowMat u, h;
  Eigen::VectorXd a;
  explicit EdgeKernel(const FactorModel& model) : u(model.U), h(model.H), a(model.A) {}

  double theta(int i, int j) const {
    const double* ui = u.data() + static_cast<std::ptrdiff_t>(i) * u.cols();
    const double* uj = u.data() + static_cast<std::ptrdiff_t>(j) * u.cols();
    const double* hi = h.data() + static_cast<std::ptrdiff_t>(i) * h.cols();
    const double* hj = h.data() + static_cast<std::ptrdiff_t>(j) * h.cols();
    double t = 0.0;
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
      t += a[k] * ui[k] * uj[k] + ui[k] * hj[k] + hi[k] * uj[k];
    }
    return t;
  }
};

}  // namespace detail

inline Eigen::VectorXd edge_theta(const CooccurrenceGraph& graph, const FactorModel& model) {
  const detail::EdgeKernel kernel(model);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(graph.edges.size()));
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    theta[static_cast<Eigen::Index>(e)] = kernel.theta(graph.edges[e].i, graph.edges[e].j);
  }
  return theta;
}

// Sum of Theta over the full upper triangle, in closed form from column sums:
// sum_k a_k (sigma_k^2 - q_k)/2 + sum_k (sigma_k tau_k - u_k.h_k), so zero
// entries of W never require pairwise iteration.
inline double linear_theta_sum(const FactorModel& model) {
  double total = 0.0;
  for (int k = 0; k < model.topic_count(); ++k) {
    const double sigma = model.U.col(k).sum();
    const double q = model.U.col(k).squaredNorm();
    const double tau = model.H.col(k).sum();
    const double dot = model.U.col(k).dot(model.H.col(k));
    total += model.A[k] * (sigma * sigma - q) / 2.0 + sigma * tau - dot;
  }
  return total;
}

// Generalized KL data term: linear part over all i<j, log part over nonzeros.
inline double kl_term(const CooccurrenceGraph& graph, const FactorModel& model, double eps) {
  const detail::EdgeKernel kernel(model);
  double log_part = 0.0;
  for (const auto& e : graph.edges) log_part += e.w * std::log(kernel.theta(e.i, e.j) + eps);
  return linear_theta_sum(model) - log_part;
}

// Off-diagonal Frobenius penalty on U^T U.
inline double decorrelation_penalty(const Eigen::MatrixXd& u) {
  Eigen::MatrixXd gram = u.transpose() * u;
  gram.diagonal().setZero();
  return gram.squaredNorm();
}

inline double objective_value(const CooccurrenceGraph& graph, const FactorModel& model, const SolverConfig& cfg) {
  return kl_term(graph, model, cfg.eps) + cfg.lambda_h * model.H.lpNorm<1>() +
         0.5 * cfg.gamma * decorrelation_penalty(model.U);
}

// Per-edge responsibility shares of the three model terms; rows align with
// graph.edges. eps_share is the slack claimed by the stability constant, so
// each row of (ps+pl+pr) sums to theta/(theta+eps) = 1 - eps_share.
struct Responsibilities {
  Eigen::MatrixXd ps, pl, pr;  // E x K
  Eigen::VectorXd eps_share;   // E
};

inline Responsibilities compute_responsibilities(const CooccurrenceGraph& graph, const FactorModel& model,
                                                 double eps) {
  const detail::EdgeKernel kernel(model);
  const auto e_count = static_cast<Eigen::Index>(graph.edges.size());
  const int k_count = model.topic_count();
  Responsibilities resp;
  resp.ps.resize(e_count, k_count);
  resp.pl.resize(e_count, k_count);
  resp.pr.resize(e_count, k_count);
  resp.eps_share.resize(e_count);
  for (Eigen::Index e = 0; e < e_count; ++e) {
    const int i = graph.edges[static_cast<std::size_t>(e)].i;
    const int j = graph.edges[static_cast<std::size_t>(e)].j;
    const double denom = kernel.theta(i, j) + eps;
    for (int k = 0; k < k_count; ++k) {
      resp.ps(e, k) = model.A[k] * model.U(i, k) * model.U(j, k) / denom;
      resp.pl(e, k) = model.U(i, k) * model.H(j, k) / denom;
      resp.pr(e, k) = model.H(i, k) * model.U(j, k) / denom;
    }
    resp.eps_share[e] = eps / denom;
  }
  return resp;
}

// Jensen surrogate of the KL term with its entropy constants restored, so it
// touches the KL term exactly at the expansion point and upper-bounds it
// elsewhere. The stability constant enters as one extra mixture component.
inline double mm_surrogate(const CooccurrenceGraph& graph, const FactorModel& model, const Responsibilities& resp,
                           double eps) {
  const auto xlogy = [](double p, double y) -> double {
    if (p <= 0.0) return 0.0;
    if (y <= 0.0) return -std::numeric_limits<double>::infinity();
    return p * std::log(y);
  };
  double log_part = 0.0;
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto ei = static_cast<Eigen::Index>(e);
    const int i = graph.edges[e].i;
    const int j = graph.edges[e].j;
    double term = 0.0;
    for (int k = 0; k < model.topic_count(); ++k) {
      const double ps = resp.ps(ei, k), pl = resp.pl(ei, k), pr = resp.pr(ei, k);
      term += xlogy(ps, model.A[k] * model.U(i, k) * model.U(j, k)) - xlogy(ps, ps);
      term += xlogy(pl, model.U(i, k) * model.H(j, k)) - xlogy(pl, pl);
      term += xlogy(pr, model.H(i, k) * model.U(j, k)) - xlogy(pr, pr);
    }
    const double pe = resp.eps_share[ei];
    term += xlogy(pe, eps) - xlogy(pe, pe);
    log_part += graph.edges[e].w * term;
  }
  return linear_theta_sum(model) - log_part;
}

// Multiplicative rescale for the topic importances; the exact minimizer of the
// MM surrogate in each a_k. Zeros are preserved.
inline Eigen::VectorXd updated_importance(const CooccurrenceGraph& graph, const FactorModel& model, double eps) {
  const detail::EdgeKernel kernel(model);
  const int k_count = model.topic_count();
  Eigen::VectorXd num = Eigen::VectorXd::Zero(k_count);
  for (const auto& e : graph.edges) {
    const double coef = e.w / (kernel.theta(e.i, e.j) + eps);
    const double* ui = kernel.u.data() + static_cast<std::ptrdiff_t>(e.i) * k_count;
    const double* uj = kernel.u.data() + static_cast<std::ptrdiff_t>(e.j) * k_count;
    for (int k = 0; k < k_count; ++k) num[k] += coef * ui[k] * uj[k];
  }
  Eigen::VectorXd out(k_count);
  for (int k = 0; k < k_count; ++k) {
    const double sigma = model.U.col(k).sum();
    const double q = model.U.col(k).squaredNorm();
    const double den = (sigma * sigma - q) / 2.0 + eps;
    out[k] = model.A[k] * num[k] / den;
  }
  return out;
}

// Multiplicative rescale for the dictionary: each unordered pair is visited
// once and contributes to both endpoints. Returns the raw update, before
// column renormalization.
inline Eigen::MatrixXd updated_dictionary(const CooccurrenceGraph& graph, const FactorModel& model, double eps) {
  const detail::EdgeKernel kernel(model);
  const int k_count = model.topic_count();
  const int v = model.vocab_size();
  detail::RowMat num = detail::RowMat::Zero(v, k_count);
  for (const auto& e : graph.edges) {
    const double coef = e.w / (kernel.theta(e.i, e.j) + eps);
    const double* ui = kernel.u.data() + static_cast<std::ptrdiff_t>(e.i) * k_count;
    const double* uj = kernel.u.data() + static_cast<std::ptrdiff_t>(e.j) * k_count;
    const double* hi = kernel.h.data() + static_cast<std::ptrdiff_t>(e.i) * k_count;
    const double* hj = kernel.h.data() + static_cast<std::ptrdiff_t>(e.j) * k_count;
    double* ni = num.data() + static_cast<std::ptrdiff_t>(e.i) * k_count;
    double* nj = num.data() + static_cast<std::ptrdiff_t>(e.j) * k_count;
    for (int k = 0; k < k_count; ++k) {
      ni[k] += coef * (model.A[k] * uj[k] + hj[k]);
      nj[k] += coef * (model.A[k] * ui[k] + hi[k]);
    }
  }
  Eigen::MatrixXd out(v, k_count);
  for (int k = 0; k < k_count; ++k) {
    const double sigma = model.U.col(k).sum();
    const double tau = model.H.col(k).sum();
    for (int i = 0; i < v; ++i) {
      const double den = model.A[k] * (sigma - model.U(i, k)) + (tau - model.H(i, k)) + eps;
      out(i, k) = model.U(i, k) * num(i, k) / den;
    }
  }
  return out;
}

// Column L1 renormalization with compensation a_k <- s_k^2 a_k, leaving
// Lambda = U A U^T unchanged. Zero columns are left untouched (scale 0).
inline std::vector<double> renormalize_columns(Eigen::MatrixXd& u, Eigen::VectorXd& a) {
  std::vector<double> scales(static_cast<std::size_t>(u.cols()), 0.0);
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    const double s = u.col(k).lpNorm<1>();
    scales[static_cast<std::size_t>(k)] = s;
    if (s > 0.0) {
      u.col(k) /= s;
      a[k] *= s * s;
    }
  }
  return scales;
}

// One projected-gradient step on (gamma/2) R_dec(U) followed by column
// re-normalization. Columns that the step would zero out keep their old value.
inline Eigen::MatrixXd decorrelation_candidate(const Eigen::MatrixXd& u, double gamma, double eta) {
  Eigen::MatrixXd gram = u.transpose() * u;
  gram.diagonal().setZero();
  Eigen::MatrixXd cand = (u - eta * gamma * (u * gram)).cwiseMax(0.0);
  for (Eigen::Index k = 0; k < cand.cols(); ++k) {
    const double s = cand.col(k).lpNorm<1>();
    if (s > 0.0) {
      cand.col(k) /= s;
    } else {
      cand.col(k) = u.col(k);
    }
  }
  return cand;
}

inline double soft_threshold(double x, double t) { return x > t ? x - t : (x < -t ? x + t : 0.0); }

// --- ADMM block for the sparse residual ---

struct AdmmState {
  Eigen::MatrixXd H, Z, Gamma;
};

struct AdmmResult {
  Eigen::MatrixXd h_projected;  // [H]_+ scaled to unit Frobenius norm
  bool h_zero = false;
  double primal_residual = 0.0;
  int sweeps = 0;
  AdmmState state;  // raw state for warm starts
};

// Smooth convex H-step subproblem with U, A fixed: the KL data term as a
// function of H plus the scaled quadratic coupling to Z - Gamma. Operands are
// row-major so per-edge work runs over contiguous K-vectors.
struct HStepProblem {
  const CooccurrenceGraph* graph = nullptr;
  double rho = 1.0;
  double eps = 1e-10;
  detail::RowMat u;
  Eigen::VectorXd lambda_edge;  // U A U^T per edge, fixed during the block
  Eigen::VectorXd sigma;        // column sums of U
  double const_linear = 0.0;    // sum_k a_k (sigma_k^2 - q_k) / 2

  HStepProblem(const CooccurrenceGraph& g, const Eigen::MatrixXd& u_in, const Eigen::VectorXd& a, double rho_in,
               double eps_in)
      : graph(&g), rho(rho_in), eps(eps_in), u(u_in) {
    const int k_count = static_cast<int>(u_in.cols());
    lambda_edge.resize(static_cast<Eigen::Index>(g.edges.size()));
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      double lam = 0.0;
      for (int k = 0; k < k_count; ++k) lam += a[k] * u_in(g.edges[e].i, k) * u_in(g.edges[e].j, k);
      lambda_edge[static_cast<Eigen::Index>(e)] = lam;
    }
    sigma = u_in.colwise().sum();
    for (int k = 0; k < k_count; ++k) {
      const double q = u_in.col(k).squaredNorm();
      const_linear += a[k] * (sigma[k] * sigma[k] - q) / 2.0;
    }
  }

  const double* row(const detail::RowMat& m, int i) const {
    return m.data() + static_cast<std::ptrdiff_t>(i) * m.cols();
  }

  double cross_at(std::size_t e, const detail::RowMat& h) const {
    const double* ui = row(u, graph->edges[e].i);
    const double* uj = row(u, graph->edges[e].j);
    const double* hi = row(h, graph->edges[e].i);
    const double* hj = row(h, graph->edges[e].j);
    double c = 0.0;
    for (Eigen::Index k = 0; k < u.cols(); ++k) c += ui[k] * hj[k] + hi[k] * uj[k];
    return c;
  }

  double value(const detail::RowMat& h, const detail::RowMat& zref) const {
    double linear = const_linear;
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
      linear += sigma[k] * h.col(k).sum() - u.col(k).dot(h.col(k));
    }
    double log_part = 0.0;
    for (std::size_t e = 0; e < graph->edges.size(); ++e) {
      log_part += graph->edges[e].w * std::log(lambda_edge[static_cast<Eigen::Index>(e)] + cross_at(e, h) + eps);
    }
    return linear - log_part + 0.5 * rho * (h - zref).squaredNorm();
  }

  detail::RowMat gradient(const detail::RowMat& h, const detail::RowMat& zref) const {
    detail::RowMat grad = rho * (h - zref);
    for (Eigen::Index i = 0; i < grad.rows(); ++i) {
      double* gi = grad.data() + static_cast<std::ptrdiff_t>(i) * grad.cols();
      const double* ui = row(u, static_cast<int>(i));
      for (Eigen::Index k = 0; k < grad.cols(); ++k) gi[k] += sigma[k] - ui[k];
    }
    for (std::size_t e = 0; e < graph->edges.size(); ++e) {
      const double coef = graph->edges[e].w / (lambda_edge[static_cast<Eigen::Index>(e)] + cross_at(e, h) + eps);
      const double* ui = row(u, graph->edges[e].i);
      const double* uj = row(u, graph->edges[e].j);
      double* gi = grad.data() + static_cast<std::ptrdiff_t>(graph->edges[e].i) * grad.cols();
      double* gj = grad.data() + static_cast<std::ptrdiff_t>(graph->edges[e].j) * grad.cols();
      for (Eigen::Index k = 0; k < grad.cols(); ++k) {
        gi[k] -= coef * uj[k];
        gj[k] -= coef * ui[k];
      }
    }
    return grad;
  }
};

// Projected gradient with backtracking on the nonnegative orthant, stopping at
// projected-gradient norm <= grad_tol or max_inner steps.
inline detail::RowMat solve_h_step(const HStepProblem& problem, const detail::RowMat& h0,
                                   const detail::RowMat& zref, int max_inner, double grad_tol) {
  detail::RowMat h = h0.cwiseMax(0.0);
  double f = problem.value(h, zref);
  double step = 1.0;
  for (int it = 0; it < max_inner; ++it) {
    const detail::RowMat grad = problem.gradient(h, zref);
    if ((h - (h - grad).cwiseMax(0.0)).norm() <= grad_tol) break;
    bool moved = false;
    double t = step;
    const double f_prev = f;
    for (int bt = 0; bt < 60; ++bt) {
      detail::RowMat h_new = (h - t * grad).cwiseMax(0.0);
      const detail::RowMat diff = h_new - h;
      const double f_new = problem.value(h_new, zref);
      if (f_new <= f + grad.cwiseProduct(diff).sum() + diff.squaredNorm() / (2.0 * t)) {
        h = std::move(h_new);
        f = f_new;
        step = t * 2.0;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    if (f_prev - f <= 1e-12 * (1.0 + std::abs(f))) break;  // stalled
  }
  return h;
}

// Scaled-form ADMM sweeps for the residual block with U, A fixed: H-step by
// projected gradient, exact soft-threshold Z-step, dual ascent, then the
// nonnegative unit-Frobenius projection of H.
inline AdmmResult update_residual_admm(const CooccurrenceGraph& graph, const Eigen::MatrixXd& u,
                                       const Eigen::VectorXd& a, AdmmState state, const SolverConfig& cfg) {
  const HStepProblem problem(graph, u, a, cfg.rho, cfg.eps);
  const double shrink = cfg.lambda_h / cfg.rho;
  AdmmResult result;
  detail::RowMat h = state.H, z = state.Z, gamma = state.Gamma;
  double residual = (h - z).norm();
  for (int s = 0; s < cfg.max_admm; ++s) {
    const detail::RowMat zref = z - gamma;
    h = solve_h_step(problem, h, zref, cfg.max_h_inner, cfg.h_grad_tol);
    z = (h + gamma).unaryExpr([shrink](double x) { return soft_threshold(x, shrink); });
    gamma += h - z;
    residual = (h - z).norm();
    result.sweeps = s + 1;
    if (!h.allFinite() || !z.allFinite() || !gamma.allFinite()) {
      throw NumericalError("ADMM: non-finite values at sweep " + std::to_string(s + 1) + " (|H|=" +
                           std::to_string(h.norm()) + ", |Z|=" + std::to_string(z.norm()) + ", |Gamma|=" +
                           std::to_string(gamma.norm()) + ", residual=" + std::to_string(residual) + ")");
    }
    if (residual <= cfg.admm_tol) break;
  }
  state.H = h;
  state.Z = z;
  state.Gamma = gamma;
  result.primal_residual = residual;
  result.h_projected = state.H.cwiseMax(0.0);
  const double norm = result.h_projected.norm();
  // An empty Z support means the shrinkage prox keeps nothing at this
  // lambda/rho; the consensus limit is H = 0, reached only asymptotically in
  // H itself, so the flag reads the sparse iterate.
  if (norm <= 1e-12 || state.Z.isZero(0.0)) {
    result.h_zero = true;
    result.h_projected.setZero();
  } else {
    result.h_projected /= norm;
  }
  result.state = std::move(state);
  return result;
}

// --- fit ---

namespace detail {

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.1, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

struct FitContext {
  const CooccurrenceGraph& graph;
  const SolverConfig& cfg;
  FactorModel model;
  AdmmState admm;
  double objective = 0.0;
  std::mt19937_64 rng;
  FitTrace trace;

  FitContext(const CooccurrenceGraph& g, const SolverConfig& c, std::uint64_t seed) : graph(g), cfg(c), rng(seed) {
    const int v = g.vertex_count();
    model.U = random_matrix(v, c.k, rng);
    model.A = Eigen::VectorXd::Ones(c.k);
    model.H = random_matrix(v, c.k, rng);
    for (int k = 0; k < c.k; ++k) model.U.col(k) /= model.U.col(k).lpNorm<1>();
    model.H /= model.H.norm();
    admm.H = model.H;
    admm.Z = model.H;
    admm.Gamma = Eigen::MatrixXd::Zero(v, c.k);
    objective = objective_value(g, model, c);
  }

  // Accepts the candidate if the objective does not increase; otherwise tries
  // damped convex mixes toward it, and finally leaves the model unchanged.
  template <typename Apply>
  void accept_damped(const Apply& apply_fraction) {
    for (double beta : {1.0, 0.5, 0.25, 0.125, 0.0625}) {
      FactorModel cand = model;
      apply_fraction(cand, beta);
      const double obj = objective_value(graph, cand, cfg);
      if (obj <= objective && std::isfinite(obj)) {
        model = std::move(cand);
        objective = obj;
        return;
      }
    }
  }
};

}  // namespace detail

// One seeded run of the outer loop. Exposed for the sweep which manages its
// own restarts; prefer fit().
inline std::pair<FactorModel, FitTrace> fit_single(const CooccurrenceGraph& graph, const SolverConfig& cfg,
                                                   std::uint64_t seed) {
  detail::FitContext ctx(graph, cfg, seed);
  double eta = cfg.decorrelation_step;
  ctx.trace.entries.push_back({0, ctx.objective, kl_term(graph, ctx.model, cfg.eps), ctx.model.H.lpNorm<1>(),
                               decorrelation_penalty(ctx.model.U), 0.0});

  for (int iter = 1; iter <= cfg.max_outer; ++iter) {
    const double obj_before = ctx.objective;

    // (1) importance rescale
    {
      const Eigen::VectorXd a_new = updated_importance(graph, ctx.model, cfg.eps);
      ctx.accept_damped([&](FactorModel& m, double beta) { m.A = (1.0 - beta) * m.A + beta * a_new; });
    }

    // (2) dictionary rescale + renormalization with compensation
    {
      Eigen::MatrixXd u_new = updated_dictionary(graph, ctx.model, cfg.eps);
      Eigen::VectorXd a_comp = ctx.model.A;
      const auto scales = renormalize_columns(u_new, a_comp);
      for (std::size_t k = 0; k < scales.size(); ++k) {
        if (scales[k] == 0.0) {
          ctx.trace.warnings.push_back("iteration " + std::to_string(iter) + ": topic " + std::to_string(k) +
                                       " column collapsed to zero; reinitialized");
          u_new.col(static_cast<Eigen::Index>(k)) =
              detail::random_matrix(graph.vertex_count(), 1, ctx.rng).col(0);
          u_new.col(static_cast<Eigen::Index>(k)) /= u_new.col(static_cast<Eigen::Index>(k)).lpNorm<1>();
        }
      }
      ctx.accept_damped([&](FactorModel& m, double beta) {
        m.U = (1.0 - beta) * m.U + beta * u_new;
        m.A = (1.0 - beta) * m.A + beta * a_comp;
      });
    }

    // (3) decorrelation step, with step-size backtracking on rejection
    if (cfg.gamma > 0.0) {
      for (int attempt = 0; attempt < 4; ++attempt) {
        FactorModel cand = ctx.model;
        cand.U = decorrelation_candidate(ctx.model.U, cfg.gamma, eta);
        const double obj = objective_value(graph, cand, cfg);
        if (obj <= ctx.objective && std::isfinite(obj)) {
          ctx.model = std::move(cand);
          ctx.objective = obj;
          break;
        }
        eta *= 0.5;
      }
    }

    // (4) sparse residual via ADMM; the unit-norm projection is accepted only
    // if it keeps the objective from rising, otherwise the previous H stands
    // and the raw ADMM state still warm-starts the next block.
    double admm_residual = 0.0;
    if (cfg.update_h) {
      if (!cfg.warm_admm) {
        ctx.admm.H = ctx.model.H;
        ctx.admm.Z = ctx.model.H;
        ctx.admm.Gamma.setZero();
      }
      AdmmResult res = update_residual_admm(graph, ctx.model.U, ctx.model.A, std::move(ctx.admm), cfg);
      admm_residual = res.primal_residual;
      FactorModel cand = ctx.model;
      cand.H = res.h_projected;
      cand.h_is_zero = res.h_zero;
      const double obj = objective_value(graph, cand, cfg);
      if (obj <= ctx.objective && std::isfinite(obj)) {
        ctx.model = std::move(cand);
        ctx.objective = obj;
      }
      ctx.admm = std::move(res.state);

      // Residual shutdown escape: the unit-norm constraint re-inflates any
      // shrinking H, which on low-mass graphs can trap all structure in the
      // cross terms. Offer the joint move (H = 0, importances refit by a few
      // MM steps on the current dictionary); the objective decides.
      {
        FactorModel zero = ctx.model;
        zero.H.setZero();
        zero.h_is_zero = true;
        for (int it = 0; it < 5; ++it) zero.A = updated_importance(graph, zero, cfg.eps);
        const double obj_zero = objective_value(graph, zero, cfg);
        if (obj_zero < ctx.objective && std::isfinite(obj_zero)) {
          ctx.model = std::move(zero);
          ctx.objective = obj_zero;
          ctx.admm.H.setZero();
          ctx.admm.Z.setZero();
          ctx.admm.Gamma.setZero();
        }
      }
    }

    ctx.trace.entries.push_back({iter, ctx.objective, kl_term(graph, ctx.model, cfg.eps), ctx.model.H.lpNorm<1>(),
                                 decorrelation_penalty(ctx.model.U), admm_residual});
    if (std::abs(obj_before - ctx.objective) < cfg.tol * std::max(1.0, std::abs(obj_before))) break;
  }
  return {std::move(ctx.model), std::move(ctx.trace)};
}

// Fits the factorization. Restarts run seeds seed, seed+1, ... and the run
// with the lowest final objective wins.
inline std::pair<FactorModel, FitTrace> fit(const CooccurrenceGraph& graph, const SolverConfig& config) {
  const SolverConfig cfg = config.resolved(graph);
  cfg.validate(graph.vertex_count());
  if (graph.edges.empty()) throw DataError("fit: graph has no edges (all-zero W)");
  std::pair<FactorModel, FitTrace> best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    auto run = fit_single(graph, cfg, cfg.seed + static_cast<std::uint64_t>(r));
    const double obj = run.second.entries.back().objective;
    if (obj < best_obj) {
      best_obj = obj;
      best = std::move(run);
    }
  }
  return best;
}

// --- model and trace artifacts ---

inline nlohmann::json solver_config_json(const SolverConfig& cfg) {
  return {{"k", cfg.k},
          {"lambda_h", cfg.lambda_h},
          {"gamma", cfg.gamma},
          {"rho", cfg.rho},
          {"eps", cfg.eps},
          {"max_outer", cfg.max_outer},
          {"max_admm", cfg.max_admm},
          {"tol", cfg.tol},
          {"decorrelation_step", cfg.decorrelation_step},
          {"seed", cfg.seed},
          {"restarts", cfg.restarts},
          {"update_h", cfg.update_h},
          {"warm_admm", cfg.warm_admm},
          {"max_h_inner", cfg.max_h_inner},
          {"h_grad_tol", cfg.h_grad_tol},
          {"admm_tol", cfg.admm_tol}};
}

inline SolverConfig solver_config_from_json(const nlohmann::json& j) {
  SolverConfig cfg;
  cfg.k = j.value("k", cfg.k);
  cfg.lambda_h = j.value("lambda_h", cfg.lambda_h);
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.rho = j.value("rho", cfg.rho);
  cfg.eps = j.value("eps", cfg.eps);
  cfg.max_outer = j.value("max_outer", cfg.max_outer);
  cfg.max_admm = j.value("max_admm", cfg.max_admm);
  cfg.tol = j.value("tol", cfg.tol);
  cfg.decorrelation_step = j.value("decorrelation_step", cfg.decorrelation_step);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.restarts = j.value("restarts", cfg.restarts);
  cfg.update_h = j.value("update_h", cfg.update_h);
  cfg.warm_admm = j.value("warm_admm", cfg.warm_admm);
  cfg.max_h_inner = j.value("max_h_inner", cfg.max_h_inner);
  cfg.h_grad_tol = j.value("h_grad_tol", cfg.h_grad_tol);
  cfg.admm_tol = j.value("admm_tol", cfg.admm_tol);
  return cfg;
}

inline nlohmann::json model_to_json(const FactorModel& model, const SolverConfig& cfg, double final_objective) {
  const auto matrix_rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index k = 0; k < model.A.size(); ++k) a.push_back(model.A[k]);
  return {{"schema", "pdtopics.model.v1"},
          {"V", model.vocab_size()},
          {"K", model.topic_count()},
          {"U", matrix_rows(model.U)},
          {"A", std::move(a)},
          {"H", matrix_rows(model.H)},
          {"h_is_zero", model.h_is_zero},
          {"config", solver_config_json(cfg)},
          {"final_objective", final_objective}};
}

inline FactorModel model_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "pdtopics.model.v1") throw DataError("model file: unknown or missing schema");
  const int v = j.at("V").get<int>();
  const int k = j.at("K").get<int>();
  FactorModel model;
  model.U.resize(v, k);
  model.H.resize(v, k);
  model.A.resize(k);
  const auto& uj = j.at("U");
  const auto& hj = j.at("H");
  if (static_cast<int>(uj.size()) != v || static_cast<int>(hj.size()) != v) {
    throw DataError("model file: U/H row count does not match V");
  }
  for (int i = 0; i < v; ++i) {
    for (int c = 0; c < k; ++c) {
      model.U(i, c) = uj.at(i).at(c).get<double>();
      model.H(i, c) = hj.at(i).at(c).get<double>();
    }
  }
  for (int c = 0; c < k; ++c) model.A[c] = j.at("A").at(c).get<double>();
  model.h_is_zero = j.value("h_is_zero", false);
  return model;
}

inline std::string trace_to_csv(const FitTrace& trace) {
  std::string out = "# pdtopics.trace.v1\niteration,objective,kl,l1_h,rdec,admm_residual\n";
  char buf[192];
  for (const auto& e : trace.entries) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", e.iteration, e.objective, e.kl, e.l1_h,
                  e.rdec, e.admm_residual);
    out += buf;
  }
  return out;
}

}  // namespace pdtopics
