#include "adpanel/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "adpanel/errors.hpp"

namespace adpanel {

namespace {

std::optional<long long> as_integer(const std::string& s) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

// Numeric ids compare numerically, everything else lexicographically after them.
bool unit_less(const std::string& a, const std::string& b) {
    const auto ia = as_integer(a);
    const auto ib = as_integer(b);
    if (ia && ib) return *ia < *ib;
    if (ia != ib && (ia || ib)) return ia.has_value();
    return a < b;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& cell, std::size_t line_no, const std::string& column) {
    double v = 0.0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw DataError("line " + std::to_string(line_no) + ": column '" + column +
                        "' has non-numeric value '" + cell + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

PanelDataset PanelDataset::from_columns(std::vector<std::string> unit_labels, std::vector<std::int64_t> times,
                                        Eigen::VectorXd y, Eigen::VectorXd d, Eigen::MatrixXd x,
                                        std::optional<Eigen::VectorXd> weights) {
    const std::size_t n = unit_labels.size();
    const auto ni = static_cast<Eigen::Index>(n);
    if (times.size() != n || y.size() != ni || d.size() != ni || x.rows() != ni ||
        (weights && weights->size() != ni)) {
        throw DataError("panel columns have inconsistent lengths");
    }
    if (!y.allFinite() || !d.allFinite() || !x.allFinite()) {
        throw DataError("panel contains non-finite values");
    }
    if (weights && ((weights->array() <= 0).any() || !weights->allFinite())) {
        throw DataError("weights must be positive and finite");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (unit_labels[a] != unit_labels[b]) return unit_less(unit_labels[a], unit_labels[b]);
        return times[a] < times[b];
    });

    PanelDataset p;
    p.times_.resize(n);
    p.unit_of_.resize(n);
    p.y_.resize(ni);
    p.d_.resize(ni);
    p.x_.resize(ni, x.cols());
    p.w_ = Eigen::VectorXd::Ones(ni);
    p.has_weights_ = weights.has_value();
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        const auto kk = static_cast<Eigen::Index>(k);
        const auto ss = static_cast<Eigen::Index>(src);
        if (k == 0 || unit_labels[src] != unit_labels[order[k - 1]]) {
            p.unit_ids_.push_back(unit_labels[src]);
            p.unit_offsets_.push_back(k);
        } else if (times[src] == times[order[k - 1]]) {
            throw DataError("duplicate (unit, time) = (" + unit_labels[src] + ", " +
                            std::to_string(times[src]) + ")");
        }
        p.unit_of_[k] = p.unit_ids_.size() - 1;
        p.times_[k] = times[src];
        p.y_[kk] = y[ss];
        p.d_[kk] = d[ss];
        p.x_.row(kk) = x.row(ss);
        if (weights) p.w_[kk] = (*weights)[ss];
    }
    p.unit_offsets_.push_back(n);
    for (std::size_t u = 0; u < p.n_units(); ++u) {
        if (p.unit_size(u) < 2) {
            throw DataError("unit '" + p.unit_ids_[u] + "' has a single observation");
        }
    }
    return p;
}

std::vector<double> PanelDataset::variables(std::size_t k) const {
    const auto kk = static_cast<Eigen::Index>(k);
    std::vector<double> v(static_cast<std::size_t>(x_.cols()) + 1);
    v[0] = d_[kk];
    for (Eigen::Index j = 0; j < x_.cols(); ++j) v[static_cast<std::size_t>(j) + 1] = x_(kk, j);
    return v;
}

std::vector<std::int64_t> PanelDataset::distinct_times() const {
    std::set<std::int64_t> s(times_.begin(), times_.end());
    return {s.begin(), s.end()};
}

PanelDataset PanelDataset::with_outcome(Eigen::VectorXd y) const {
    if (y.size() != y_.size()) throw DataError("outcome length mismatch");
    PanelDataset p = *this;
    p.y_ = std::move(y);
    return p;
}

PanelDataset PanelDataset::with_weights(Eigen::VectorXd w) const {
    if (w.size() != w_.size()) throw DataError("weight length mismatch");
    if ((w.array() <= 0).any() || !w.allFinite()) throw DataError("weights must be positive and finite");
    PanelDataset p = *this;
    p.w_ = std::move(w);
    p.has_weights_ = true;
    return p;
}

PanelDataset PanelDataset::subset(const std::vector<std::size_t>& obs) const {
    std::vector<std::string> units;
    std::vector<std::int64_t> times;
    const auto m = static_cast<Eigen::Index>(obs.size());
    Eigen::VectorXd y(m), d(m), w(m);
    Eigen::MatrixXd x(m, x_.cols());
    for (Eigen::Index r = 0; r < m; ++r) {
        const std::size_t k = obs[static_cast<std::size_t>(r)];
        const auto kk = static_cast<Eigen::Index>(k);
        units.push_back(unit_ids_[unit_of_[k]]);
        times.push_back(times_[k]);
        y[r] = y_[kk];
        d[r] = d_[kk];
        w[r] = w_[kk];
        x.row(r) = x_.row(kk);
    }
    auto out = from_columns(std::move(units), std::move(times), std::move(y), std::move(d), std::move(x),
                            has_weights_ ? std::optional<Eigen::VectorXd>(std::move(w)) : std::nullopt);
    return out;
}

PanelDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    const auto header = split_csv_line(line);

    std::map<std::string, std::size_t> col;
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (!col.emplace(header[k], k).second) throw DataError("duplicate column '" + header[k] + "'");
    }
    auto require = [&](const std::string& name) {
        const auto it = col.find(name);
        if (it == col.end()) throw DataError("missing column '" + name + "'");
        return it->second;
    };
    const std::size_t c_unit = require(schema.unit_col);
    const std::size_t c_time = require(schema.time_col);
    const std::size_t c_y = require(schema.y_col);
    const std::size_t c_d = require(schema.d_col);
    std::vector<std::string> x_names = schema.x_cols;
    if (x_names.empty()) {
        std::vector<std::pair<long long, std::string>> found;
        for (const auto& h : header) {
            if (h.size() > 1 && h[0] == 'x') {
                if (auto k = as_integer(h.substr(1)); k && *k >= 1) found.emplace_back(*k, h);
            }
        }
        std::sort(found.begin(), found.end());
        for (std::size_t k = 0; k < found.size(); ++k) {
            if (found[k].first != static_cast<long long>(k) + 1) {
                throw DataError("missing column 'x" + std::to_string(k + 1) + "'");
            }
            x_names.push_back(found[k].second);
        }
    }
    std::vector<std::size_t> c_x;
    for (const auto& name : x_names) c_x.push_back(require(name));
    std::optional<std::size_t> c_w;
    if (schema.weight_col) c_w = require(*schema.weight_col);

    std::vector<std::string> units;
    std::vector<std::int64_t> times;
    std::vector<double> ys, ds, ws, xs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " cells, found " + std::to_string(cells.size()));
        }
        units.push_back(cells[c_unit]);
        const auto t = as_integer(cells[c_time]);
        if (!t) {
            throw DataError("line " + std::to_string(line_no) + ": column '" + schema.time_col +
                            "' must be an integer, got '" + cells[c_time] + "'");
        }
        times.push_back(*t);
        ys.push_back(parse_double(cells[c_y], line_no, schema.y_col));
        ds.push_back(parse_double(cells[c_d], line_no, schema.d_col));
        for (std::size_t j = 0; j < c_x.size(); ++j) xs.push_back(parse_double(cells[c_x[j]], line_no, x_names[j]));
        if (c_w) {
            const double w = parse_double(cells[*c_w], line_no, *schema.weight_col);
            if (w <= 0) throw DataError("line " + std::to_string(line_no) + ": weight must be positive");
            ws.push_back(w);
        }
    }
    const auto n = static_cast<Eigen::Index>(units.size());
    if (n == 0) throw DataError("'" + path.string() + "' has no data rows");
    const auto h = static_cast<Eigen::Index>(c_x.size());
    Eigen::MatrixXd x(n, h);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index j = 0; j < h; ++j) x(r, j) = xs[static_cast<std::size_t>(r * h + j)];
    }
    std::optional<Eigen::VectorXd> w;
    if (c_w) w = Eigen::Map<Eigen::VectorXd>(ws.data(), n);
    return PanelDataset::from_columns(std::move(units), std::move(times), Eigen::Map<Eigen::VectorXd>(ys.data(), n),
                                      Eigen::Map<Eigen::VectorXd>(ds.data(), n), std::move(x), std::move(w));
}

void write_csv(const PanelDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << "unit,time,y,d";
    for (int j = 1; j <= data.n_covariates(); ++j) out << ",x" << j;
    if (data.has_weights()) out << ",weight";
    out << '\n';
    for (std::size_t k = 0; k < data.n_obs(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        out << data.unit_ids()[data.unit_of()[k]] << ',' << data.times()[k] << ',' << format_double(data.y()[kk])
            << ',' << format_double(data.d()[kk]);
        for (Eigen::Index j = 0; j < data.x().cols(); ++j) out << ',' << format_double(data.x()(kk, j));
        if (data.has_weights()) out << ',' << format_double(data.weights()[kk]);
        out << '\n';
    }
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(n_folds), 0);
    for (int f : fold_of_unit) ++sizes[static_cast<std::size_t>(f)];
    return sizes;
}

std::vector<std::size_t> FoldAssignment::units_in(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t u = 0; u < fold_of_unit.size(); ++u) {
        if (fold_of_unit[u] == fold) out.push_back(u);
    }
    return out;
}

FoldAssignment assign_folds(const PanelDataset& data, int n_folds, std::uint64_t seed) {
    if (n_folds < 2) throw ConfigError("fold count must be >= 2");
    if (static_cast<std::size_t>(n_folds) > data.n_units()) {
        throw ConfigError("fold count " + std::to_string(n_folds) + " exceeds the number of units (" +
                          std::to_string(data.n_units()) + ")");
    }
    std::vector<std::size_t> order(data.n_units());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    FoldAssignment fa;
    fa.n_folds = n_folds;
    fa.seed = seed;
    fa.fold_of_unit.assign(data.n_units(), 0);
    for (std::size_t k = 0; k < order.size(); ++k) fa.fold_of_unit[order[k]] = static_cast<int>(k % static_cast<std::size_t>(n_folds));
    return fa;
}

Eigen::MatrixXd basis_matrix(const PanelDataset& data, const Dictionary& dict) {
    if (dict.n_variables() != data.n_covariates() + 1) {
        throw ConfigError("dictionary expects " + std::to_string(dict.n_variables() - 1) + " covariates, panel has " +
                          std::to_string(data.n_covariates()));
    }
    Eigen::MatrixXd b(static_cast<Eigen::Index>(data.n_obs()), static_cast<Eigen::Index>(dict.size()));
    Eigen::VectorXd row(static_cast<Eigen::Index>(dict.size()));
    for (std::size_t k = 0; k < data.n_obs(); ++k) {
        dict.eval_into(data.variables(k), row);
        b.row(static_cast<Eigen::Index>(k)) = row.transpose();
    }
    return b;
}

DifferencedDesign build_differenced_design(const PanelDataset& data, const Dictionary& dict,
                                           const StandardizationStats& stats, const FoldAssignment* folds) {
    if (stats.size() != dict.size()) throw ConfigError("standardization stats do not match the dictionary");
    if (folds && folds->fold_of_unit.size() != data.n_units()) {
        throw ConfigError("fold assignment does not match the panel");
    }
    DifferencedDesign dd;
    dd.active = stats.active_indices();
    const auto rows = static_cast<Eigen::Index>(data.n_differenced());
    const auto pa = static_cast<Eigen::Index>(dd.active.size());
    dd.delta_b.resize(rows, pa);
    dd.deriv.resize(rows, pa);
    dd.delta_y.resize(rows);
    dd.weight.resize(rows);

    Eigen::VectorXd prev(static_cast<Eigen::Index>(dict.size()));
    Eigen::VectorXd cur(prev.size());
    Eigen::VectorXd der(prev.size());
    Eigen::Index r = 0;
    for (std::size_t u = 0; u < data.n_units(); ++u) {
        const std::size_t begin = data.unit_offsets()[u];
        const std::size_t end = data.unit_offsets()[u + 1];
        dict.eval_into(data.variables(begin), prev);
        for (std::size_t k = begin + 1; k < end; ++k) {
            const auto vars = data.variables(k);
            dict.eval_into(vars, cur);
            dict.eval_derivative_into(vars, der);
            for (Eigen::Index c = 0; c < pa; ++c) {
                const auto j = dd.active[static_cast<std::size_t>(c)];
                const double sd = stats.sds[j];
                // The mean cancels in the difference of standardized terms.
                dd.delta_b(r, c) = (cur[j] - stats.means[j]) / sd - (prev[j] - stats.means[j]) / sd;
                dd.deriv(r, c) = der[j] / sd;
            }
            const auto kk = static_cast<Eigen::Index>(k);
            dd.delta_y[r] = data.y()[kk] - data.y()[kk - 1];
            dd.weight[r] = data.weights()[kk];
            dd.unit.push_back(u);
            dd.time.push_back(data.times()[k]);
            dd.fold.push_back(folds ? folds->fold_of_unit[u] : -1);
            std::swap(prev, cur);
            ++r;
        }
    }
    return dd;
}

std::vector<PanelDataset> rolling_windows(const PanelDataset& data, int width) {
    if (width < 2) throw ConfigError("rolling window width must be >= 2");
    const auto times = data.distinct_times();
    std::vector<PanelDataset> out;
    if (static_cast<std::size_t>(width) > times.size()) return out;
    for (std::size_t s = 0; s + static_cast<std::size_t>(width) <= times.size(); ++s) {
        const std::int64_t lo = times[s];
        const std::int64_t hi = times[s + static_cast<std::size_t>(width) - 1];
        std::vector<std::size_t> keep;
        for (std::size_t u = 0; u < data.n_units(); ++u) {
            std::vector<std::size_t> obs;
            for (std::size_t k = data.unit_offsets()[u]; k < data.unit_offsets()[u + 1]; ++k) {
                if (data.times()[k] >= lo && data.times()[k] <= hi) obs.push_back(k);
            }
            if (obs.size() == static_cast<std::size_t>(width)) keep.insert(keep.end(), obs.begin(), obs.end());
        }
        if (!keep.empty()) out.push_back(data.subset(keep));
    }
    return out;
}

}  // namespace adpanel
