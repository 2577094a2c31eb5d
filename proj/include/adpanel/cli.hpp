#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adpanel/dictionary.hpp"
#include "adpanel/estimator.hpp"
#include "adpanel/panel.hpp"
#include "adpanel/simulation.hpp"

namespace adpanel::cli {

enum class Command { Simulate, Estimate, Tune, Rolling };

/// Settings for one command, merged from a JSON config file and flag overrides.
struct RunConfig {
    Command command = Command::Simulate;

    std::optional<std::uint64_t> seed;   // absent: drawn from entropy and echoed
    int jobs = 1;
    std::string out = "out";

    std::vector<std::string> methods;    // empty: all five
    int folds = 5;
    std::vector<double> lasso_grid = default_lasso_grid();
    std::vector<double> riesz_grid = default_riesz_grid();
    int degree = 3;
    std::string pairs = "treatment";     // none | treatment | all
    bool intercept = true;
    double level = 0.95;
    int riesz_budget = 400;
    std::string variance = "cluster";   // cluster | unit-mean
    double tol = 1e-8;
    int max_iter = 100'000;

    // simulate
    std::size_t trials = 200;
    std::size_t units = 1000;
    std::size_t periods = 2;
    int covariates = 20;

    // estimate / tune / rolling
    std::string data;
    std::string unit_col = "unit";
    std::string time_col = "time";
    std::string y_col = "y";
    std::string d_col = "d";
    std::vector<std::string> x_cols;
    std::optional<std::string> weight_col;

    // rolling
    int window = 2;

    /// Throws ConfigError on any invalid or inapplicable setting.
    void validate() const;

    std::vector<Method> method_list() const;
    DictionarySpec dictionary() const;
    EstimatorConfig estimator(std::uint64_t seed_value) const;
    CsvSchema schema() const;
};

std::string command_name(Command c);

/// Keys accepted in a config file for the command.
std::vector<std::string> allowed_keys(Command c);

/// Applies config-file values onto `cfg`; unknown or inapplicable keys throw ConfigError.
void apply_json(RunConfig& cfg, const nlohmann::json& j);

/// Entry point shared by the executable and the tests. Returns the process exit code:
/// 0 success, 1 runtime failure, 2 usage, configuration or data error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adpanel::cli
