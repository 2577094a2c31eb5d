#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adpanel/panel.hpp"

namespace adpanel {

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 100'000;
    /// Called after every full coordinate sweep with (sweep index, objective).
    std::function<void(int, double)> on_sweep;
};

struct SolverResult {
    Eigen::VectorXd coefficients;
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
    double kkt_residual = 0.0;
};

/// Weighted Lasso on a dense design:
///   (1/N) sum_r w_r (y_r - x_r' beta)^2 + penalty * |beta|_1
/// with weights rescaled to mean 1.
struct LassoProblem {
    Eigen::MatrixXd design;
    Eigen::VectorXd response;
    Eigen::VectorXd weights;  // empty = unit weights
    double penalty = 0.0;
};

/// -2 M' rho + rho' Q rho + penalty * |rho|_1
struct RieszProblem {
    Eigen::VectorXd m;
    Eigen::MatrixXd q;
    double penalty = 0.0;
};

/// Quadratic form of a weighted Lasso: the loss equals beta' gram beta - 2 cross' beta + yy.
struct GramProblem {
    Eigen::MatrixXd gram;
    Eigen::VectorXd cross;
    double yy = 0.0;
};

GramProblem make_gram_problem(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                              const Eigen::VectorXd& weights);

double soft_threshold(double z, double threshold);

/// Minimizes rho' Q rho - 2 M' rho + penalty * |rho|_1 by cyclic coordinate descent
/// with an active-set inner loop. Converged when a full sweep moves no coordinate by
/// more than tol and the KKT residual is below 10 * tol.
/// Throws SolverError when a coordinate with Q_jj = 0 makes the objective unbounded.
SolverResult solve_quadratic_l1(const Eigen::MatrixXd& q, const Eigen::VectorXd& m, double penalty,
                                const SolverOptions& opts = {},
                                const std::optional<Eigen::VectorXd>& warm_start = {});

double quadratic_l1_objective(const Eigen::MatrixXd& q, const Eigen::VectorXd& m, double penalty,
                              const Eigen::VectorXd& rho);
/// Largest violation of the subgradient optimality conditions.
double quadratic_l1_kkt_residual(const Eigen::MatrixXd& q, const Eigen::VectorXd& m, double penalty,
                                 const Eigen::VectorXd& rho);

SolverResult lasso_fit(const LassoProblem& problem, const SolverOptions& opts = {});
double lasso_objective(const LassoProblem& problem, const Eigen::VectorXd& beta);

SolverResult riesz_fit_exact(const RieszProblem& problem, const SolverOptions& opts = {});

/// Fixed-budget proximal gradient from rho = 0: gradient 2Q rho - 2M, step 1/(2 lambda_max(Q))
/// with lambda_max from power iteration, soft-threshold at step * penalty.
SolverResult riesz_fit_iterative(const RieszProblem& problem, int step_budget = 400);
double riesz_objective(const RieszProblem& problem, const Eigen::VectorXd& rho);

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_max_eigenvalue(const Eigen::MatrixXd& q, int iterations = 200);

struct OlsResult {
    Eigen::VectorXd coefficients;
    Eigen::Index rank = 0;
    std::vector<Eigen::Index> dropped;  // columns zeroed for rank deficiency
    std::vector<std::string> warnings;
};

/// Weighted least squares by column-pivoted QR; rank-deficient columns get 0.
OlsResult ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  const Eigen::VectorXd& weights = {});

/// M = weighted mean of standardized derivative rows, Q = weighted mean of delta_b outer
/// products, weights normalized to mean 1. `rows` restricts to a subset (empty = all rows).
RieszProblem assemble_riesz_problem(const DifferencedDesign& design, double penalty,
                                    const std::vector<Eigen::Index>& rows = {});

}  // namespace adpanel
