#include "adpanel/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adpanel/errors.hpp"

namespace adpanel {

namespace {

Eigen::VectorXd normalized_weights(const Eigen::VectorXd& w, Eigen::Index n) {
    if (w.size() == 0) return Eigen::VectorXd::Ones(n);
    if (w.size() != n) throw DataError("weight vector length does not match the number of rows");
    if ((w.array() <= 0).any() || !w.allFinite()) throw DataError("weights must be positive and finite");
    return w * (static_cast<double>(n) / w.sum());
}

double sign(double x) { return (x > 0) - (x < 0); }

}  // namespace

double soft_threshold(double z, double threshold) {
    if (z > threshold) return z - threshold;
    if (z < -threshold) return z + threshold;
    return 0.0;
}

GramProblem make_gram_problem(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                              const Eigen::VectorXd& weights) {
    const Eigen::Index n = design.rows();
    if (n == 0) throw DataError("empty design");
    if (response.size() != n) throw DataError("response length does not match the design");
    if (!design.allFinite() || !response.allFinite()) throw DataError("non-finite entries in the problem");
    const Eigen::VectorXd w = normalized_weights(weights, n);
    const double inv_n = 1.0 / static_cast<double>(n);
    GramProblem g;
    const Eigen::MatrixXd wx = w.asDiagonal() * design;
    g.gram.noalias() = design.transpose() * wx * inv_n;
    g.cross.noalias() = wx.transpose() * response * inv_n;
    g.yy = (w.array() * response.array().square()).sum() * inv_n;
    return g;
}

double quadratic_l1_objective(const Eigen::MatrixXd& q, const Eigen::VectorXd& m, double penalty,
                              const Eigen::VectorXd& rho) {
    return rho.dot(q * rho) - 2.0 * m.dot(rho) + penalty * rho.lpNorm<1>();
}

double quadratic_l1_kkt_residual(const Eigen::MatrixXd& q, const Eigen::VectorXd& m, double penalty,
                                 const Eigen::VectorXd& rho) {
    const Eigen::VectorXd grad = 2.0 * (q * rho - m);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < rho.size(); ++j) {
        const double v = rho[j] != 0.0 ? std::abs(grad[j] + penalty * sign(rho[j]))
                                       : std::max(0.0, std::abs(grad[j]) - penalty);
        worst = std::max(worst, v);
    }
    return worst;
}

SolverResult solve_quadratic_l1(const Eigen::MatrixXd& q, const Eigen::VectorXd& m, double penalty,
                                const SolverOptions& opts, const std::optional<Eigen::VectorXd>& warm_start) {
    const Eigen::Index p = m.size();
    if (q.rows() != p || q.cols() != p) throw ConfigError("quadratic term has the wrong shape");
    if (!(opts.tol > 0)) throw ConfigError("solver tolerance must be positive");
    if (penalty < 0 || !std::isfinite(penalty)) throw ConfigError("penalty must be finite and >= 0");
    const double half = 0.5 * penalty;

    SolverResult res;
    res.coefficients = warm_start && warm_start->size() == p ? *warm_start : Eigen::VectorXd::Zero(p);
    Eigen::VectorXd& rho = res.coefficients;

    std::vector<bool> flat(static_cast<std::size_t>(p), false);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (q(j, j) <= 0.0) {
            if (std::abs(m[j]) > half) {
                throw SolverError("objective unbounded along coordinate " + std::to_string(j) +
                                  " (zero curvature, |M_j| above penalty/2)");
            }
            flat[static_cast<std::size_t>(j)] = true;
            rho[j] = 0.0;
        }
    }

    Eigen::VectorXd q_rho = q * rho;
    auto update = [&](Eigen::Index j) {
        if (flat[static_cast<std::size_t>(j)]) return 0.0;
        const double qjj = q(j, j);
        const double z = m[j] - q_rho[j] + qjj * rho[j];
        const double next = soft_threshold(z, half) / qjj;
        const double delta = next - rho[j];
        if (delta != 0.0) {
            q_rho.noalias() += q.col(j) * delta;
            rho[j] = next;
        }
        return std::abs(delta);
    };
    auto report = [&] {
        if (opts.on_sweep) opts.on_sweep(res.iterations, quadratic_l1_objective(q, m, penalty, rho));
    };

    std::vector<Eigen::Index> active;
    while (res.iterations < opts.max_iter) {
        q_rho.noalias() = q * rho;  // refresh to avoid drift from incremental updates
        double change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) change = std::max(change, update(j));
        ++res.iterations;
        report();
        if (change < opts.tol) {
            res.kkt_residual = quadratic_l1_kkt_residual(q, m, penalty, rho);
            if (res.kkt_residual < 10.0 * opts.tol) {
                res.converged = true;
                break;
            }
        }
        active.clear();
        for (Eigen::Index j = 0; j < p; ++j) {
            if (rho[j] != 0.0) active.push_back(j);
        }
        while (!active.empty() && res.iterations < opts.max_iter) {
            double inner = 0.0;
            for (Eigen::Index j : active) inner = std::max(inner, update(j));
            ++res.iterations;
            report();
            if (inner < opts.tol) break;
        }
    }
    res.objective = quadratic_l1_objective(q, m, penalty, rho);
    res.kkt_residual = quadratic_l1_kkt_residual(q, m, penalty, rho);
    return res;
}

SolverResult lasso_fit(const LassoProblem& problem, const SolverOptions& opts) {
    const GramProblem g = make_gram_problem(problem.design, problem.response, problem.weights);
    SolverResult res = solve_quadratic_l1(g.gram, g.cross, problem.penalty, opts);
    res.objective += g.yy;
    return res;
}

double lasso_objective(const LassoProblem& problem, const Eigen::VectorXd& beta) {
    const Eigen::Index n = problem.design.rows();
    const Eigen::VectorXd w = normalized_weights(problem.weights, n);
    const Eigen::VectorXd r = problem.response - problem.design * beta;
    return (w.array() * r.array().square()).sum() / static_cast<double>(n) + problem.penalty * beta.lpNorm<1>();
}

SolverResult riesz_fit_exact(const RieszProblem& problem, const SolverOptions& opts) {
    return solve_quadratic_l1(problem.q, problem.m, problem.penalty, opts);
}

double riesz_objective(const RieszProblem& problem, const Eigen::VectorXd& rho) {
    return quadratic_l1_objective(problem.q, problem.m, problem.penalty, rho);
}

double power_iteration_max_eigenvalue(const Eigen::MatrixXd& q, int iterations) {
    const Eigen::Index p = q.rows();
    if (p == 0) return 0.0;
    Eigen::VectorXd v(p);
    for (Eigen::Index j = 0; j < p; ++j) v[j] = 1.0 + 0.01 * static_cast<double>(j % 7);
    v.normalize();
    double lambda = 0.0;
    for (int k = 0; k < iterations; ++k) {
        Eigen::VectorXd next = q * v;
        const double norm = next.norm();
        if (norm == 0.0) return 0.0;
        const double est = v.dot(next);
        v = next / norm;
        if (k > 0 && std::abs(est - lambda) <= 1e-12 * std::abs(est)) {
            lambda = est;
            break;
        }
        lambda = est;
    }
    return lambda;
}

SolverResult riesz_fit_iterative(const RieszProblem& problem, int step_budget) {
    if (step_budget < 1) throw ConfigError("iterative Riesz step budget must be >= 1");
    const Eigen::Index p = problem.m.size();
    SolverResult res;
    res.coefficients = Eigen::VectorXd::Zero(p);
    const double lambda_max = power_iteration_max_eigenvalue(problem.q);
    if (lambda_max > 0.0) {
        const double step = 1.0 / (2.0 * lambda_max);
        Eigen::VectorXd& rho = res.coefficients;
        Eigen::VectorXd grad(p);
        for (int k = 0; k < step_budget; ++k) {
            grad.noalias() = 2.0 * (problem.q * rho - problem.m);
            rho -= step * grad;
            for (Eigen::Index j = 0; j < p; ++j) rho[j] = soft_threshold(rho[j], step * problem.penalty);
        }
    }
    res.iterations = step_budget;
    res.converged = false;
    res.objective = riesz_objective(problem, res.coefficients);
    res.kkt_residual = quadratic_l1_kkt_residual(problem.q, problem.m, problem.penalty, res.coefficients);
    return res;
}

OlsResult ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response, const Eigen::VectorXd& weights) {
    const Eigen::Index n = design.rows();
    if (n == 0) throw DataError("least squares needs at least one row");
    if (response.size() != n) throw DataError("response length does not match the design");
    const Eigen::VectorXd sw = normalized_weights(weights, n).cwiseSqrt();
    const Eigen::MatrixXd xw = sw.asDiagonal() * design;
    const Eigen::VectorXd yw = sw.cwiseProduct(response);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
    qr.setThreshold(1e-10);
    qr.compute(xw);

    OlsResult out;
    out.rank = qr.rank();
    out.coefficients = Eigen::VectorXd::Zero(design.cols());
    if (out.rank > 0) {
        // Solve the leading rank x rank triangle; trailing pivoted columns stay at 0.
        const Eigen::Index r = out.rank;
        const Eigen::VectorXd qty = qr.householderQ().transpose() * yw;
        const Eigen::VectorXd z = qr.matrixQR().topLeftCorner(r, r).triangularView<Eigen::Upper>().solve(qty.head(r));
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = 0; k < r; ++k) out.coefficients[perm[k]] = z[k];
        for (Eigen::Index k = r; k < design.cols(); ++k) out.dropped.push_back(perm[k]);
    } else {
        for (Eigen::Index k = 0; k < design.cols(); ++k) out.dropped.push_back(k);
    }
    std::sort(out.dropped.begin(), out.dropped.end());
    if (!out.dropped.empty()) {
        out.warnings.push_back("rank-deficient design: " + std::to_string(out.dropped.size()) +
                               " column(s) set to 0");
    }
    return out;
}

RieszProblem assemble_riesz_problem(const DifferencedDesign& design, double penalty,
                                    const std::vector<Eigen::Index>& rows) {
    std::vector<Eigen::Index> idx = rows;
    if (idx.empty()) {
        idx.resize(design.rows());
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    }
    if (idx.empty()) throw DataError("cannot assemble a Riesz problem from an empty design");
    const auto n = static_cast<Eigen::Index>(idx.size());
    const Eigen::MatrixXd xb = design.delta_b(idx, Eigen::all);
    const Eigen::MatrixXd db = design.deriv(idx, Eigen::all);
    const Eigen::VectorXd w = normalized_weights(design.weight(idx), n);

    RieszProblem prob;
    prob.penalty = penalty;
    prob.m = db.transpose() * w / static_cast<double>(n);
    prob.q = xb.transpose() * (w.asDiagonal() * xb) / static_cast<double>(n);
    prob.q = 0.5 * (prob.q + prob.q.transpose()).eval();
    return prob;
}

}  // namespace adpanel
