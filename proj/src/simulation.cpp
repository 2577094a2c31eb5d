#include "adpanel/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "adpanel/errors.hpp"

namespace adpanel {

void DGPConfig::validate() const {
    if (n_units < 2) throw ConfigError("simulation needs N >= 2 units");
    if (n_periods < 2) throw ConfigError("simulation needs T >= 2 periods");
    if (n_covariates < 1) throw ConfigError("simulation needs h >= 1 covariates");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

std::string fmt_cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter) {
    return splitmix64(splitmix64(master ^ splitmix64(stream + 0x51ED270B27A4C3D1ULL)) + counter);
}

PanelDataset generate_dataset(const DGPConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::gamma_distribution<double> gamma_a(1.0, 1.0);
    std::gamma_distribution<double> gamma_b(7.0, 1.0);

    const auto h = static_cast<Eigen::Index>(cfg.n_covariates);
    Eigen::VectorXd theta(h);
    for (Eigen::Index j = 0; j < h; ++j) theta[j] = 1.0 / static_cast<double>((j + 1) * (j + 1));

    const auto n = static_cast<Eigen::Index>(cfg.n_units * cfg.n_periods);
    std::vector<std::string> units;
    std::vector<std::int64_t> times;
    units.reserve(static_cast<std::size_t>(n));
    times.reserve(static_cast<std::size_t>(n));
    Eigen::VectorXd y(n), d(n);
    Eigen::MatrixXd x(n, h);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < cfg.n_units; ++i) {
        const double a = 1.0 + std_normal(rng);
        for (std::size_t t = 0; t < cfg.n_periods; ++t, ++k) {
            for (Eigen::Index j = 0; j < h; ++j) x(k, j) = a + std_normal(rng);
            const double g1 = gamma_a(rng);
            const double g2 = gamma_b(rng);
            const double lin = 0.1 * theta.dot(x.row(k).transpose());
            const double dd = lin + g1 / (g1 + g2);
            const double eps = std_normal(rng);
            d[k] = dd;
            y[k] = a + dd + dd * dd + dd * dd * dd + dd * x(k, 0) + lin + eps;
            units.push_back(std::to_string(i + 1));
            times.push_back(static_cast<std::int64_t>(t + 1));
        }
    }
    return PanelDataset::from_columns(std::move(units), std::move(times), std::move(y), std::move(d), std::move(x));
}

double true_average_derivative(const PanelDataset& data) {
    if (data.n_covariates() < 1) throw DataError("true derivative needs at least one covariate");
    const Eigen::ArrayXd dd = data.d().array();
    return (1.0 + 2.0 * dd + 3.0 * dd.square() + data.x().col(0).array()).mean();
}

const MethodSummary& SimulationSummary::at(Method m) const {
    for (const auto& s : methods) {
        if (s.method == m) return s;
    }
    throw ConfigError("method '" + method_label(m) + "' not in summary");
}

std::vector<MethodSummary> summarize(const std::vector<TrialRecord>& records, const std::vector<Method>& methods) {
    std::vector<MethodSummary> out;
    for (Method m : methods) {
        MethodSummary s;
        s.method = m;
        std::vector<double> err;
        double cover = 0.0;
        for (const auto& r : records) {
            if (r.method != m) continue;
            if (r.failed) {
                ++s.failures;
                continue;
            }
            ++s.trials;
            s.true_value += r.true_tau;
            s.mean_estimate += r.tau_hat;
            s.mse_gamma_in += r.mse_gamma_in;
            s.mse_gamma_out += r.mse_gamma_out;
            cover += r.covered ? 1.0 : 0.0;
            err.push_back(r.tau_hat - r.true_tau);
        }
        if (s.trials > 0) {
            const auto n = static_cast<double>(s.trials);
            s.true_value /= n;
            s.mean_estimate /= n;
            s.mse_gamma_in /= n;
            s.mse_gamma_out /= n;
            s.coverage = cover / n;
            double sum = 0.0, sq = 0.0;
            for (double e : err) {
                sum += e;
                sq += e * e;
            }
            s.bias = sum / n;
            s.mse_tau = sq / n;
            double dev = 0.0;
            for (double e : err) dev += (e - s.bias) * (e - s.bias);
            s.sd = s.trials > 1 ? std::sqrt(dev / (n - 1.0)) : 0.0;
        }
        out.push_back(s);
    }
    return out;
}

SimulationSummary run_monte_carlo(const DGPConfig& cfg, const MonteCarloOptions& opts) {
    cfg.validate();
    opts.estimator.validate();
    if (opts.trials < 1) throw ConfigError("trials must be >= 1");
    if (opts.methods.empty()) throw ConfigError("no methods requested");

    const double z = normal_critical_value(opts.estimator.level);
    std::vector<std::vector<TrialRecord>> per_trial(opts.trials);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t t = next++; t < opts.trials; t = next++) {
            DGPConfig trial_cfg = cfg;
            trial_cfg.seed = derive_seed(opts.seed, 0, t);
            EstimatorConfig est = opts.estimator;
            est.seed = derive_seed(opts.seed, 1, t);
            std::vector<TrialRecord>& out = per_trial[t];
            double truth = 0.0;
            try {
                const PanelDataset data = generate_dataset(trial_cfg);
                truth = true_average_derivative(data);
                const auto reports = estimate_methods(data, opts.dictionary, est, opts.methods);
                for (const auto& rep : reports) {
                    TrialRecord r;
                    r.trial = t;
                    r.method = rep.method;
                    r.tau_hat = rep.tau_hat;
                    r.se = rep.se;
                    r.true_tau = truth;
                    r.covered = std::abs(rep.tau_hat - truth) <= z * rep.se;
                    r.mse_gamma_in = rep.mse_gamma_in_sample;
                    r.mse_gamma_out = rep.mse_gamma_cross_folds;
                    r.r_lasso = rep.r_lasso;
                    r.r_riesz = rep.r_riesz;
                    out.push_back(r);
                }
            } catch (const std::exception& e) {
                out.clear();
                for (Method m : opts.methods) {
                    TrialRecord r;
                    r.trial = t;
                    r.method = m;
                    r.failed = true;
                    r.error = e.what();
                    r.true_tau = truth;
                    out.push_back(r);
                }
            }
        }
    };
    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < jobs; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SimulationSummary s;
    s.trials = opts.trials;
    s.dictionary_size = dictionary_size(opts.dictionary, cfg.n_covariates);
    for (auto& v : per_trial) s.records.insert(s.records.end(), v.begin(), v.end());
    s.methods = summarize(s.records, opts.methods);
    return s;
}

std::string summary_markdown(const SimulationSummary& s) {
    std::ostringstream os;
    os << "| method |";
    for (const auto& m : s.methods) os << ' ' << method_label(m.method) << " |";
    os << "\n|---|";
    for (std::size_t k = 0; k < s.methods.size(); ++k) os << "---|";
    os << '\n';
    auto row = [&](const char* name, auto get) {
        os << "| " << name << " |";
        for (const auto& m : s.methods) os << ' ' << fmt_cell(get(m)) << " |";
        os << '\n';
    };
    row("True Value", [](const MethodSummary& m) { return m.true_value; });
    row("Average Derivative", [](const MethodSummary& m) { return m.mean_estimate; });
    row("Bias", [](const MethodSummary& m) { return m.bias; });
    row("Standard Deviation", [](const MethodSummary& m) { return m.sd; });
    row("MSE tau", [](const MethodSummary& m) { return m.mse_tau; });
    row("Coverage", [](const MethodSummary& m) { return m.coverage; });
    row("MSE gamma In Sample", [](const MethodSummary& m) { return m.mse_gamma_in; });
    row("MSE gamma Cross Folds", [](const MethodSummary& m) { return m.mse_gamma_out; });
    os << "\nTrials: " << s.trials << ", dictionary size p = " << s.dictionary_size << '\n';
    return os.str();
}

nlohmann::ordered_json summary_json(const SimulationSummary& s) {
    nlohmann::ordered_json j;
    j["schema_version"] = kReportSchemaVersion;
    j["trials"] = s.trials;
    j["dictionary_size"] = s.dictionary_size;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& m : s.methods) {
        arr.push_back({{"method", method_token(m.method)},
                       {"trials", m.trials},
                       {"failures", m.failures},
                       {"true_value", m.true_value},
                       {"average_derivative", m.mean_estimate},
                       {"bias", m.bias},
                       {"standard_deviation", m.sd},
                       {"mse_tau", m.mse_tau},
                       {"coverage", m.coverage},
                       {"mse_gamma_in_sample", m.mse_gamma_in},
                       {"mse_gamma_cross_folds", m.mse_gamma_out}});
    }
    j["methods"] = std::move(arr);
    return j;
}

void write_trial_csv(const std::vector<TrialRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << "trial,method,failed,tau_hat,se,true_tau,covered,mse_gamma_in,mse_gamma_out,r_lasso,r_riesz\n";
    for (const auto& r : records) {
        out << r.trial << ',' << method_token(r.method) << ',' << (r.failed ? 1 : 0) << ',' << fmt_double(r.tau_hat)
            << ',' << fmt_double(r.se) << ',' << fmt_double(r.true_tau) << ',' << (r.covered ? 1 : 0) << ','
            << fmt_double(r.mse_gamma_in) << ',' << fmt_double(r.mse_gamma_out) << ',' << fmt_double(r.r_lasso)
            << ',' << fmt_double(r.r_riesz) << '\n';
    }
}

std::vector<TrialRecord> read_trial_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    std::vector<TrialRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> c;
        std::istringstream is(line);
        for (std::string cell; std::getline(is, cell, ',');) c.push_back(cell);
        if (c.size() != 11) throw DataError("malformed trial record: " + line);
        TrialRecord r;
        r.trial = std::stoul(c[0]);
        r.method = parse_method(c[1]);
        r.failed = c[2] == "1";
        r.tau_hat = parse_double(c[3]);
        r.se = parse_double(c[4]);
        r.true_tau = parse_double(c[5]);
        r.covered = c[6] == "1";
        r.mse_gamma_in = parse_double(c[7]);
        r.mse_gamma_out = parse_double(c[8]);
        r.r_lasso = parse_double(c[9]);
        r.r_riesz = parse_double(c[10]);
        out.push_back(r);
    }
    return out;
}

}  // namespace adpanel
