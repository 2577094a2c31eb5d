#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "adpanel/dictionary.hpp"
#include "adpanel/estimator.hpp"
#include "adpanel/panel.hpp"

namespace adpanel {

/// Synthetic additive fixed-effect panel:
///   a_i ~ N(1, 1), X_j ~ N(a_i, 1), theta_j = 1/j^2,
///   D = 0.1 theta'X + Beta(1, 7),
///   Y = a_i + D + D^2 + D^3 + D X_1 + 0.1 theta'X + eps, eps ~ N(0, 1).
struct DGPConfig {
    std::size_t n_units = 1000;
    std::size_t n_periods = 2;
    int n_covariates = 20;
    std::uint64_t seed = 0;

    void validate() const;
};

PanelDataset generate_dataset(const DGPConfig& cfg);

/// Sample mean over all observations of dgamma/dD = 1 + 2D + 3D^2 + X_1.
double true_average_derivative(const PanelDataset& data);

/// Independent per-trial seed derived from a master seed and a trial counter.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter);

struct TrialRecord {
    std::size_t trial = 0;
    Method method = Method::DML;
    bool failed = false;
    std::string error;
    double tau_hat = 0.0;
    double se = 0.0;
    double true_tau = 0.0;
    bool covered = false;
    double mse_gamma_in = 0.0;
    double mse_gamma_out = 0.0;
    double r_lasso = 0.0;
    double r_riesz = 0.0;
};

struct MethodSummary {
    Method method = Method::DML;
    std::size_t trials = 0;      // successful trials
    std::size_t failures = 0;
    double true_value = 0.0;     // mean true tau
    double mean_estimate = 0.0;
    double bias = 0.0;           // mean(tau_hat - tau_0)
    double sd = 0.0;             // sample SD of (tau_hat - tau_0), 0 for one trial
    double mse_tau = 0.0;        // mean (tau_hat - tau_0)^2
    double coverage = 0.0;
    double mse_gamma_in = 0.0;
    double mse_gamma_out = 0.0;
};

struct SimulationSummary {
    std::size_t trials = 0;
    std::size_t dictionary_size = 0;
    std::vector<MethodSummary> methods;
    std::vector<TrialRecord> records;

    const MethodSummary& at(Method m) const;
};

struct MonteCarloOptions {
    std::size_t trials = 200;
    std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
    DictionarySpec dictionary{};
    EstimatorConfig estimator{};
    std::uint64_t seed = 0;
    int jobs = 1;
};

/// Fresh dataset per trial; every method sees the same dataset and folds.
SimulationSummary run_monte_carlo(const DGPConfig& cfg, const MonteCarloOptions& opts);

/// Aggregates trial records per method (order of `methods`).
std::vector<MethodSummary> summarize(const std::vector<TrialRecord>& records, const std::vector<Method>& methods);

std::string summary_markdown(const SimulationSummary& s);
nlohmann::ordered_json summary_json(const SimulationSummary& s);
void write_trial_csv(const std::vector<TrialRecord>& records, const std::filesystem::path& path);
std::vector<TrialRecord> read_trial_csv(const std::filesystem::path& path);

}  // namespace adpanel
