#include "adpanel/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "adpanel/errors.hpp"
#include "adpanel/trend.hpp"

namespace adpanel::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string num(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

PairPolicy parse_pairs(const std::string& s) {
    if (s == "none") return PairPolicy::None;
    if (s == "treatment") return PairPolicy::TreatmentPairsOnly;
    if (s == "all") return PairPolicy::AllPairs;
    throw ConfigError("pairs must be one of none, treatment, all (got '" + s + "')");
}

const std::vector<std::string> kSharedKeys = {"seed",  "jobs",   "out",       "methods", "folds",
                                              "lasso_grid", "riesz_grid", "degree", "pairs", "intercept",
                                              "level", "riesz_budget", "variance", "tol", "max_iter"};
const std::vector<std::string> kSimulateKeys = {"trials", "units", "periods", "covariates"};
const std::vector<std::string> kDataKeys = {"data",  "unit_col", "time_col",  "y_col",
                                            "d_col", "x_cols",   "weight_col"};

template <class T>
T get_as(const nlohmann::json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::uint64_t resolve_seed(const RunConfig& cfg, std::ostream& out) {
    if (cfg.seed) return *cfg.seed;
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    out << "seed: " << s << " (entropy)\n";
    return s;
}

ojson config_json(const RunConfig& c, std::uint64_t seed) {
    ojson j;
    j["command"] = command_name(c.command);
    j["seed"] = seed;
    j["methods"] = ojson::array();
    for (Method m : c.method_list()) j["methods"].push_back(method_token(m));
    j["folds"] = c.folds;
    j["lasso_grid"] = c.lasso_grid;
    j["riesz_grid"] = c.riesz_grid;
    j["degree"] = c.degree;
    j["pairs"] = c.pairs;
    j["intercept"] = c.intercept;
    j["level"] = c.level;
    j["riesz_budget"] = c.riesz_budget;
    j["variance"] = c.variance;
    j["tol"] = c.tol;
    j["max_iter"] = c.max_iter;
    if (c.command == Command::Simulate) {
        j["trials"] = c.trials;
        j["units"] = c.units;
        j["periods"] = c.periods;
        j["covariates"] = c.covariates;
    } else {
        j["data"] = c.data;
        j["x_cols"] = c.x_cols;
        j["weight_col"] = c.weight_col ? ojson(*c.weight_col) : ojson(nullptr);
    }
    if (c.command == Command::Rolling) j["window"] = c.window;
    return j;
}

PanelDataset load_panel(const RunConfig& cfg) { return load_csv(cfg.data, cfg.schema()); }

std::string report_table(const std::vector<EstimateReport>& reports) {
    std::ostringstream os;
    os << "| method | tau_hat | se | ci_lower | ci_upper | r_L | r_alpha | MSE gamma cross folds |\n";
    os << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : reports) {
        os << "| " << method_label(r.method) << " | " << fixed(r.tau_hat) << " | " << fixed(r.se) << " | "
           << fixed(r.ci_lower) << " | " << fixed(r.ci_upper) << " | " << fixed(r.r_lasso) << " | "
           << fixed(r.r_riesz) << " | " << fixed(r.mse_gamma_cross_folds) << " |\n";
    }
    return os.str();
}

// --- commands ---------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const std::uint64_t seed = resolve_seed(cfg, out);
    DGPConfig dgp;
    dgp.n_units = cfg.units;
    dgp.n_periods = cfg.periods;
    dgp.n_covariates = cfg.covariates;
    dgp.validate();

    MonteCarloOptions opts;
    opts.trials = cfg.trials;
    opts.methods = cfg.method_list();
    opts.dictionary = cfg.dictionary();
    opts.estimator = cfg.estimator(seed);
    opts.seed = seed;
    opts.jobs = cfg.jobs;

    const SimulationSummary s = run_monte_carlo(dgp, opts);
    const fs::path dir(cfg.out);
    fs::create_directories(dir);
    const std::string md = summary_markdown(s);
    write_text(dir / "summary.md", md);
    ojson j = summary_json(s);
    j["config"] = config_json(cfg, seed);
    write_text(dir / "summary.json", j.dump(2) + "\n");
    write_trial_csv(s.records, dir / "trials.csv");
    out << md;
    for (const auto& m : s.methods) {
        if (m.failures > 0) out << method_label(m.method) << ": " << m.failures << " failed trial(s)\n";
    }
    return 0;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
    const std::uint64_t seed = resolve_seed(cfg, out);
    const PanelDataset data = load_panel(cfg);
    const auto reports = estimate_methods(data, cfg.dictionary(), cfg.estimator(seed), cfg.method_list());

    const fs::path dir(cfg.out);
    fs::create_directories(dir);
    ojson j;
    j["schema_version"] = kReportSchemaVersion;
    j["config"] = config_json(cfg, seed);
    j["reports"] = ojson::array();
    for (const auto& r : reports) j["reports"].push_back(report_to_json(r, true));
    std::vector<Comparison> comps;
    if (reports.size() >= 2) comps = compare(reports);
    j["comparisons"] = ojson::array();
    for (const auto& c : comps) j["comparisons"].push_back(comparison_to_json(c));
    write_text(dir / "reports.json", j.dump(2) + "\n");

    std::ostringstream csv;
    csv << "first,second,difference,se,z,p_value\n";
    for (const auto& c : comps) {
        csv << method_token(c.first) << ',' << method_token(c.second) << ',' << num(c.difference) << ','
            << num(c.se) << ',' << num(c.z) << ',' << num(c.p_value) << '\n';
    }
    write_text(dir / "comparison.csv", csv.str());

    out << "units: " << data.n_units() << ", differenced rows: " << data.n_differenced()
        << ", dictionary size: " << (reports.empty() ? 0 : reports.front().p) << "\n\n";
    out << report_table(reports);
    if (!comps.empty()) {
        out << "\n| first | second | difference | se | z | p_value |\n|---|---|---|---|---|---|\n";
        for (const auto& c : comps) {
            out << "| " << method_label(c.first) << " | " << method_label(c.second) << " | " << fixed(c.difference)
                << " | " << fixed(c.se) << " | " << fixed(c.z) << " | " << fixed(c.p_value) << " |\n";
        }
    }
    for (const auto& r : reports) {
        for (const auto& w : r.warnings) out << "warning (" << method_label(r.method) << "): " << w << "\n";
    }
    return 0;
}

int cmd_tune(const RunConfig& cfg, std::ostream& out) {
    const std::uint64_t seed = resolve_seed(cfg, out);
    const PanelDataset data = load_panel(cfg);
    const TuneResult t = tune(data, cfg.dictionary(), cfg.estimator(seed));

    std::ostringstream csv;
    csv << "parameter,penalty,loss,converged,selected\n";
    auto rows = [&](const char* name, const std::vector<GridPoint>& grid, double chosen) {
        for (const auto& g : grid) {
            csv << name << ',' << num(g.penalty) << ',' << (std::isnan(g.loss) ? "nan" : num(g.loss)) << ','
                << (g.converged ? 1 : 0) << ',' << (g.penalty == chosen ? 1 : 0) << '\n';
        }
    };
    // singleton grids are returned without evaluation; still list them
    std::vector<GridPoint> lg = t.lasso_grid, rg = t.riesz_grid;
    if (lg.empty()) lg.push_back({t.r_lasso, std::nan(""), true});
    if (rg.empty()) rg.push_back({t.r_riesz, std::nan(""), true});
    rows("r_lasso", lg, t.r_lasso);
    rows("r_riesz", rg, t.r_riesz);

    const fs::path dir(cfg.out);
    fs::create_directories(dir);
    write_text(dir / "tune_grid.csv", csv.str());
    ojson j;
    j["schema_version"] = kReportSchemaVersion;
    j["config"] = config_json(cfg, seed);
    j["r_lasso"] = t.r_lasso;
    j["r_riesz"] = t.r_riesz;
    write_text(dir / "tune.json", j.dump(2) + "\n");

    out << "r_lasso: " << num(t.r_lasso) << "\n";
    out << "r_riesz: " << num(t.r_riesz) << "\n";
    out << csv.str();
    return 0;
}

int cmd_rolling(const RunConfig& cfg, std::ostream& out) {
    const std::uint64_t seed = resolve_seed(cfg, out);
    const PanelDataset data = load_panel(cfg);
    const auto windows = rolling_windows(data, cfg.window);
    if (windows.empty()) {
        throw DataError("panel spans fewer distinct periods than the window width " + std::to_string(cfg.window));
    }
    const auto methods = cfg.method_list();
    const EstimatorConfig est = cfg.estimator(seed);

    std::ostringstream csv;
    csv << "method,window_start,window_end,n_units,tau_hat,se,ci_lower,ci_upper\n";
    std::map<Method, std::vector<TrendPoint>> points;
    for (const auto& w : windows) {
        const auto times = w.distinct_times();
        const auto reports = estimate_methods(w, cfg.dictionary(), est, methods);
        for (const auto& r : reports) {
            csv << method_token(r.method) << ',' << times.front() << ',' << times.back() << ',' << r.n_units << ','
                << num(r.tau_hat) << ',' << num(r.se) << ',' << num(r.ci_lower) << ',' << num(r.ci_upper) << '\n';
            points[r.method].push_back({static_cast<double>(times.front()), r.tau_hat, r.se});
        }
    }

    std::ostringstream trend;
    trend << "method,windows,intercept,slope,slope_se,t_stat,p_value,residual_variance,dof\n";
    for (Method m : methods) {
        const auto& pts = points[m];
        if (pts.size() < 2) {
            trend << method_token(m) << ',' << pts.size() << ",nan,nan,nan,nan,nan,nan,0\n";
            continue;
        }
        const TrendFit f = fit_trend(pts);
        trend << method_token(m) << ',' << pts.size() << ',' << num(f.intercept) << ',' << num(f.slope) << ','
              << num(f.slope_se) << ',' << num(f.t_stat) << ',' << num(f.p_value) << ','
              << num(f.residual_variance) << ',' << f.dof << '\n';
    }

    const fs::path dir(cfg.out);
    fs::create_directories(dir);
    write_text(dir / "rolling.csv", csv.str());
    write_text(dir / "trend.csv", trend.str());
    out << "windows: " << windows.size() << "\n" << csv.str() << "\n" << trend.str();
    return 0;
}

// --- flag plumbing ----------------------------------------------------------

/// Flag values parsed by CLI11; only flags actually given override the config file.
struct Overrides {
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;

    template <class T>
    void add(CLI::App* app, const std::string& name, T& storage, std::function<void(RunConfig&, const T&)> apply,
             const std::string& help) {
        CLI::Option* opt = app->add_option(name, storage, help);
        if constexpr (std::is_same_v<T, std::vector<std::string>> || std::is_same_v<T, std::vector<double>>) {
            opt->delimiter(',');
        }
        setters.emplace_back(opt, [&storage, apply](RunConfig& c) { apply(c, storage); });
    }

    void apply(RunConfig& c) const {
        for (const auto& [opt, fn] : setters) {
            if (opt->count() > 0) fn(c);
        }
    }
};

struct FlagStorage {
    std::string config;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string out;
    std::vector<std::string> methods;
    int folds = 0;
    std::vector<double> lasso_grid, riesz_grid;
    int degree = 0;
    std::string pairs;
    bool no_intercept = false;
    double level = 0;
    int riesz_budget = 0;
    std::string variance;
    double tol = 0;
    int max_iter = 0;
    std::size_t trials = 0, units = 0, periods = 0;
    int covariates = 0;
    std::string data, unit_col, time_col, y_col, d_col, weight_col;
    std::vector<std::string> x_cols;
    int window = 0;
};

void add_shared(CLI::App* sub, FlagStorage& f, Overrides& o) {
    sub->add_option("--config", f.config, "JSON config file (flags override its values)");
    o.add<std::uint64_t>(sub, "--seed", f.seed, [](RunConfig& c, const std::uint64_t& v) { c.seed = v; },
                         "Master seed (omit for an entropy seed, echoed on stdout)");
    o.add<int>(sub, "--jobs", f.jobs, [](RunConfig& c, const int& v) { c.jobs = v; }, "Worker threads");
    o.add<std::string>(sub, "--out", f.out, [](RunConfig& c, const std::string& v) { c.out = v; },
                       "Output directory");
    o.add<std::vector<std::string>>(sub, "--methods", f.methods,
                                    [](RunConfig& c, const std::vector<std::string>& v) { c.methods = v; },
                                    "Comma list of DML,DMLIterative,Lasso,OLSLinear,OLSPoly");
    o.add<int>(sub, "--folds", f.folds, [](RunConfig& c, const int& v) { c.folds = v; }, "Cross-fitting folds");
    o.add<std::vector<double>>(sub, "--lasso-grid", f.lasso_grid,
                               [](RunConfig& c, const std::vector<double>& v) { c.lasso_grid = v; },
                               "Comma list of Lasso penalties");
    o.add<std::vector<double>>(sub, "--riesz-grid", f.riesz_grid,
                               [](RunConfig& c, const std::vector<double>& v) { c.riesz_grid = v; },
                               "Comma list of Riesz penalties");
    o.add<int>(sub, "--degree", f.degree, [](RunConfig& c, const int& v) { c.degree = v; },
               "Maximum power per variable");
    o.add<std::string>(sub, "--pairs", f.pairs, [](RunConfig& c, const std::string& v) { c.pairs = v; },
                       "Interaction policy: none, treatment, all");
    auto* ni = sub->add_flag("--no-intercept", f.no_intercept, "Drop the constant basis term");
    o.setters.emplace_back(ni, [](RunConfig& c) { c.intercept = false; });
    o.add<double>(sub, "--level", f.level, [](RunConfig& c, const double& v) { c.level = v; },
                  "Confidence level");
    o.add<int>(sub, "--riesz-budget", f.riesz_budget, [](RunConfig& c, const int& v) { c.riesz_budget = v; },
               "Proximal-gradient steps for DMLIterative");
    o.add<std::string>(sub, "--variance", f.variance, [](RunConfig& c, const std::string& v) { c.variance = v; },
                       "Variance formula: cluster or unit-mean");
    o.add<double>(sub, "--tol", f.tol, [](RunConfig& c, const double& v) { c.tol = v; }, "Solver tolerance");
    o.add<int>(sub, "--max-iter", f.max_iter, [](RunConfig& c, const int& v) { c.max_iter = v; },
               "Solver iteration limit");
}

void add_data(CLI::App* sub, FlagStorage& f, Overrides& o) {
    using S = std::string;
    o.add<S>(sub, "--data", f.data, [](RunConfig& c, const S& v) { c.data = v; }, "Panel CSV file");
    o.add<S>(sub, "--unit-col", f.unit_col, [](RunConfig& c, const S& v) { c.unit_col = v; }, "Unit column");
    o.add<S>(sub, "--time-col", f.time_col, [](RunConfig& c, const S& v) { c.time_col = v; }, "Time column");
    o.add<S>(sub, "--y-col", f.y_col, [](RunConfig& c, const S& v) { c.y_col = v; }, "Outcome column");
    o.add<S>(sub, "--d-col", f.d_col, [](RunConfig& c, const S& v) { c.d_col = v; }, "Treatment column");
    o.add<std::vector<S>>(sub, "--x-cols", f.x_cols, [](RunConfig& c, const std::vector<S>& v) { c.x_cols = v; },
                          "Comma list of covariate columns (default x1, x2, ...)");
    o.add<S>(sub, "--weight-col", f.weight_col, [](RunConfig& c, const S& v) { c.weight_col = v; },
             "Observation weight column");
}

nlohmann::json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

}  // namespace

std::string command_name(Command c) {
    switch (c) {
        case Command::Simulate: return "simulate";
        case Command::Estimate: return "estimate";
        case Command::Tune: return "tune";
        case Command::Rolling: return "rolling";
    }
    return "?";
}

std::vector<std::string> allowed_keys(Command c) {
    std::vector<std::string> keys = kSharedKeys;
    if (c == Command::Simulate) {
        keys.insert(keys.end(), kSimulateKeys.begin(), kSimulateKeys.end());
    } else {
        keys.insert(keys.end(), kDataKeys.begin(), kDataKeys.end());
    }
    if (c == Command::Rolling) keys.push_back("window");
    return keys;
}

void apply_json(RunConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    const auto keys = allowed_keys(cfg.command);
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, v] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown config key '" + key + "' for command " + command_name(cfg.command));
        }
        if (key == "seed") {
            if (!v.is_number_unsigned()) {
                throw ConfigError("config key 'seed' must be a non-negative integer");
            }
            cfg.seed = v.get<std::uint64_t>();
        } else if (key == "jobs") cfg.jobs = get_as<int>(v, key);
        else if (key == "out") cfg.out = get_as<std::string>(v, key);
        else if (key == "methods") cfg.methods = get_as<std::vector<std::string>>(v, key);
        else if (key == "folds") cfg.folds = get_as<int>(v, key);
        else if (key == "lasso_grid") cfg.lasso_grid = get_as<std::vector<double>>(v, key);
        else if (key == "riesz_grid") cfg.riesz_grid = get_as<std::vector<double>>(v, key);
        else if (key == "degree") cfg.degree = get_as<int>(v, key);
        else if (key == "pairs") cfg.pairs = get_as<std::string>(v, key);
        else if (key == "intercept") cfg.intercept = get_as<bool>(v, key);
        else if (key == "level") cfg.level = get_as<double>(v, key);
        else if (key == "riesz_budget") cfg.riesz_budget = get_as<int>(v, key);
        else if (key == "variance") cfg.variance = get_as<std::string>(v, key);
        else if (key == "tol") cfg.tol = get_as<double>(v, key);
        else if (key == "max_iter") cfg.max_iter = get_as<int>(v, key);
        else if (key == "trials") cfg.trials = get_as<std::size_t>(v, key);
        else if (key == "units") cfg.units = get_as<std::size_t>(v, key);
        else if (key == "periods") cfg.periods = get_as<std::size_t>(v, key);
        else if (key == "covariates") cfg.covariates = get_as<int>(v, key);
        else if (key == "data") cfg.data = get_as<std::string>(v, key);
        else if (key == "unit_col") cfg.unit_col = get_as<std::string>(v, key);
        else if (key == "time_col") cfg.time_col = get_as<std::string>(v, key);
        else if (key == "y_col") cfg.y_col = get_as<std::string>(v, key);
        else if (key == "d_col") cfg.d_col = get_as<std::string>(v, key);
        else if (key == "x_cols") cfg.x_cols = get_as<std::vector<std::string>>(v, key);
        else if (key == "weight_col") {
            if (v.is_null()) cfg.weight_col.reset();
            else cfg.weight_col = get_as<std::string>(v, key);
        } else if (key == "window") cfg.window = get_as<int>(v, key);
    }
}

void RunConfig::validate() const {
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (out.empty()) throw ConfigError("output directory must be non-empty");
    (void)method_list();
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (degree < 1) throw ConfigError("degree must be >= 1");
    (void)parse_pairs(pairs);
    estimator(0).validate();
    if (command == Command::Simulate) {
        if (trials < 1) throw ConfigError("trials must be >= 1");
        if (units < 2) throw ConfigError("units must be >= 2");
        if (periods < 2) throw ConfigError("periods must be >= 2");
        if (covariates < 1) throw ConfigError("covariates must be >= 1");
        if (units < static_cast<std::size_t>(folds)) throw ConfigError("units must be >= folds");
    } else {
        if (data.empty()) throw ConfigError("--data is required for " + command_name(command));
    }
    if (command == Command::Rolling && window < 2) throw ConfigError("window must be >= 2");
}

std::vector<Method> RunConfig::method_list() const {
    if (methods.empty()) return {std::begin(kAllMethods), std::end(kAllMethods)};
    std::vector<Method> out;
    for (const auto& s : methods) {
        const Method m = parse_method(s);
        if (std::find(out.begin(), out.end(), m) != out.end()) throw ConfigError("method '" + s + "' listed twice");
        out.push_back(m);
    }
    return out;
}

DictionarySpec RunConfig::dictionary() const { return DictionarySpec{degree, parse_pairs(pairs), intercept}; }

EstimatorConfig RunConfig::estimator(std::uint64_t seed_value) const {
    EstimatorConfig e;
    e.method = method_list().front();
    e.n_folds = folds;
    e.lasso_grid = lasso_grid;
    e.riesz_grid = riesz_grid;
    e.seed = seed_value;
    e.use_weights = weight_col.has_value();
    e.level = level;
    e.riesz_budget = riesz_budget;
    e.variance = parse_variance_formula(variance);
    e.solver.tol = tol;
    e.solver.max_iter = max_iter;
    return e;
}

CsvSchema RunConfig::schema() const {
    CsvSchema s;
    s.unit_col = unit_col;
    s.time_col = time_col;
    s.y_col = y_col;
    s.d_col = d_col;
    s.x_cols = x_cols;
    s.weight_col = weight_col;
    return s;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Debiased average-derivative estimation for additive fixed-effect panels", "adpanel"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every command");

    FlagStorage flags;
    std::map<CLI::App*, std::pair<Command, Overrides>> subs;
    auto make = [&](const std::string& name, Command c, const std::string& desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        auto& [cmd, ov] = subs[sub];
        cmd = c;
        add_shared(sub, flags, ov);
        return sub;
    };
    CLI::App* sim = make("simulate", Command::Simulate, "Monte Carlo comparison on the synthetic panel design");
    {
        auto& ov = subs[sim].second;
        ov.add<std::size_t>(sim, "--trials", flags.trials, [](RunConfig& c, const std::size_t& v) { c.trials = v; },
                            "Monte Carlo trials");
        ov.add<std::size_t>(sim, "--units", flags.units, [](RunConfig& c, const std::size_t& v) { c.units = v; },
                            "Panel units N");
        ov.add<std::size_t>(sim, "--periods", flags.periods,
                            [](RunConfig& c, const std::size_t& v) { c.periods = v; }, "Periods T");
        ov.add<int>(sim, "--covariates", flags.covariates, [](RunConfig& c, const int& v) { c.covariates = v; },
                    "Covariates h");
    }
    CLI::App* est = make("estimate", Command::Estimate, "Estimate the average derivative from a panel CSV");
    add_data(est, flags, subs[est].second);
    CLI::App* tun = make("tune", Command::Tune, "Cross-fold penalty selection on a panel CSV");
    add_data(tun, flags, subs[tun].second);
    CLI::App* rol = make("rolling", Command::Rolling, "Rolling-window estimates and their linear trend");
    add_data(rol, flags, subs[rol].second);
    {
        auto& ov = subs[rol].second;
        ov.add<int>(rol, "--window", flags.window, [](RunConfig& c, const int& v) { c.window = v; },
                    "Periods per window");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    CLI::App* chosen = app.get_subcommands().front();
    const auto& [command, overrides] = subs.at(chosen);

    try {
        RunConfig cfg;
        cfg.command = command;
        if (!flags.config.empty()) apply_json(cfg, read_config_file(flags.config));
        overrides.apply(cfg);
        cfg.validate();
        switch (command) {
            case Command::Simulate: return cmd_simulate(cfg, out);
            case Command::Estimate: return cmd_estimate(cfg, out);
            case Command::Tune: return cmd_tune(cfg, out);
            case Command::Rolling: return cmd_rolling(cfg, out);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("adpanel");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace adpanel::cli
