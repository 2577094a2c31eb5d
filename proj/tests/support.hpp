#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adpanel/panel.hpp"

namespace testsupport {

/// Seeded generator for hand-rolled property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal(double mean = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mean, sd)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    Eigen::VectorXd vector(Eigen::Index n, double sd = 1.0) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(0.0, sd);
        return v;
    }
    Eigen::MatrixXd matrix(Eigen::Index r, Eigen::Index c, double sd = 1.0) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(0.0, sd);
        return m;
    }
    /// Gram matrix of a random design: symmetric positive definite for rows > p.
    Eigen::MatrixXd spd(Eigen::Index p, Eigen::Index rows = 0) {
        const Eigen::Index n = rows > 0 ? rows : p + 5;
        const Eigen::MatrixXd x = matrix(n, p);
        return x.transpose() * x / static_cast<double>(n);
    }
    Eigen::VectorXd positive(Eigen::Index n, double lo = 0.2, double hi = 3.0) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
        return v;
    }
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Random panel with unit effects; `min_t`..`max_t` observed periods per unit
/// (unbalanced when they differ), periods drawn as a consecutive run from 1.
inline adpanel::PanelDataset random_panel(Gen& g, std::size_t units, int h, int min_t, int max_t,
                                          bool weights = false) {
    std::vector<std::string> ids;
    std::vector<std::int64_t> times;
    std::vector<double> y, d, w, x;
    for (std::size_t i = 0; i < units; ++i) {
        const int t_i = g.integer(min_t, max_t);
        const double a = g.normal(1.0, 1.0);
        for (int t = 1; t <= t_i; ++t) {
            ids.push_back("u" + std::to_string(i));
            times.push_back(t);
            double xs0 = 0.0;
            for (int j = 0; j < h; ++j) {
                const double v = a + g.normal();
                if (j == 0) xs0 = v;
                x.push_back(v);
            }
            const double dd = 0.5 + 0.2 * g.normal() + 0.05 * xs0;
            d.push_back(dd);
            y.push_back(a + dd + dd * dd + 0.5 * dd * xs0 + g.normal(0.0, 0.5));
            w.push_back(g.uniform(0.5, 2.0));
        }
    }
    const auto n = static_cast<Eigen::Index>(ids.size());
    Eigen::MatrixXd xm(n, h);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index j = 0; j < h; ++j) xm(r, j) = x[static_cast<std::size_t>(r * h + j)];
    std::optional<Eigen::VectorXd> wv;
    if (weights) wv = Eigen::Map<Eigen::VectorXd>(w.data(), n);
    return adpanel::PanelDataset::from_columns(ids, times, Eigen::Map<Eigen::VectorXd>(y.data(), n),
                                               Eigen::Map<Eigen::VectorXd>(d.data(), n), xm, wv);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("adpanel_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

}  // namespace testsupport
