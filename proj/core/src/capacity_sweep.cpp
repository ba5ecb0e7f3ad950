#include "embedcap/capacity_sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace embedcap {

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Next k-subset in lexicographic order; false when exhausted.
bool next_subset(std::vector<std::size_t>& subset, std::size_t n) {
    const std::size_t k = subset.size();
    for (std::size_t i = k; i-- > 0;) {
        if (subset[i] < n - k + i) {
            ++subset[i];
            for (std::size_t j = i + 1; j < k; ++j) subset[j] = subset[j - 1] + 1;
            return true;
        }
    }
    return false;
}

// Unranks index r into the r-th k-subset of {0..n-1} in lexicographic order.
std::vector<std::size_t> unrank_subset(std::uint64_t r, std::size_t n, std::size_t k) {
    std::vector<std::size_t> subset(k);
    std::size_t x = 0;
    for (std::size_t i = 0; i < k; ++i) {
        while (true) {
            const std::uint64_t block = binomial(n - 1 - x, k - 1 - i);
            if (r < block) break;
            r -= block;
            ++x;
        }
        subset[i] = x++;
    }
    return subset;
}

}  // namespace

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        result = result * (n - k + i) / i;
        if (result > static_cast<unsigned __int128>(UINT64_MAX)) {
            throw CapacityError("binomial(" + std::to_string(n) + "," + std::to_string(k) +
                                ") exceeds 64 bits");
        }
    }
    return static_cast<std::uint64_t>(result);
}

std::size_t min_docs_for_queries(std::uint64_t m, std::uint64_t k) {
    std::uint64_t n = k;
    while (binomial(n, k) < m) ++n;
    return static_cast<std::size_t>(n);
}

QrelMatrix dense_qrels(std::size_t n, std::size_t k, std::optional<std::uint64_t> m,
                       std::uint64_t seed) {
    if (k < 1 || n < k) throw CapacityError("dense_qrels: need n >= k >= 1");
    const std::uint64_t total = binomial(n, k);
    const std::uint64_t rows = m.value_or(total);
    if (rows > total) {
        throw CapacityError("dense_qrels: asked for " + std::to_string(rows) + " rows but C(" +
                            std::to_string(n) + "," + std::to_string(k) + ") = " +
                            std::to_string(total));
    }

    QrelMatrix a(rows, n);
    if (rows == total) {
        std::vector<std::size_t> subset(k);
        std::iota(subset.begin(), subset.end(), 0);
        std::size_t row = 0;
        do {
            for (std::size_t j : subset) a.set(row, j, true);
            ++row;
        } while (next_subset(subset, n));
        return a;
    }

    // Seeded sample of distinct subset ranks, then unrank each.
    std::mt19937_64 rng(seed);
    std::unordered_set<std::uint64_t> picked;
    std::vector<std::uint64_t> ranks;
    ranks.reserve(rows);
    std::uniform_int_distribution<std::uint64_t> dist(0, total - 1);
    while (ranks.size() < rows) {
        const std::uint64_t r = dist(rng);
        if (picked.insert(r).second) ranks.push_back(r);
    }
    for (std::size_t row = 0; row < ranks.size(); ++row) {
        for (std::size_t j : unrank_subset(ranks[row], n, k)) a.set(row, j, true);
    }
    return a;
}

SweepPoint find_critical_n(int d, std::size_t k, const OptimizerConfig& cfg,
                           const ScanConfig& scan) {
    if (scan.n_start <= k) throw ScanError("find_critical_n: n_start must exceed k");
    const auto t0 = std::chrono::steady_clock::now();

    SweepPoint point;
    point.d = d;
    bool any_solved = false;

    for (std::size_t n = scan.n_start; n <= scan.n_max; ++n) {
        const QrelMatrix a = dense_qrels(n, k);
        TrialSummary trial;
        trial.n = n;

        OptimizerConfig attempt_cfg = cfg;
        for (int attempt = 0; attempt <= scan.confirm_restarts; ++attempt) {
            attempt_cfg.seed = attempt == 0 ? cfg.seed : mix_seed(cfg.seed, 0xC0FFEEull + n * 16 + attempt);
            const SolveResult r = solve(a, d, attempt_cfg);
            trial.steps += r.steps_run;
            trial.attempts = attempt + 1;
            trial.accuracy = std::max(trial.accuracy, r.accuracy);
            trial.final_loss = r.final_loss;
            if (r.solved) {
                trial.solved = true;
                break;
            }
        }
        point.total_steps += trial.steps;
        point.trials.push_back(trial);

        if (trial.solved) {
            any_solved = true;
            point.critical_n = n;
        } else {
            if (!any_solved) {
                throw ScanError("find_critical_n: d=" + std::to_string(d) + " failed already at n_start=" +
                                std::to_string(n) + "; lower n_start");
            }
            point.first_failed_n = n;
            point.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            return point;
        }
    }
    throw ScanError("find_critical_n: no failure up to n_max=" + std::to_string(scan.n_max));
}

CubicFit fit_cubic(const std::vector<std::pair<double, double>>& points) {
    std::vector<double> xs;
    for (const auto& [x, y] : points)
        if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
    if (xs.size() < 4) throw FitError("fit_cubic: need at least 4 distinct d values");

    const Eigen::Index rows = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd design(rows, 4);
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double x = points[static_cast<std::size_t>(i)].first;
        design(i, 0) = 1.0;
        design(i, 1) = x;
        design(i, 2) = x * x;
        design(i, 3) = x * x * x;
        y(i) = points[static_cast<std::size_t>(i)].second;
    }

    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < 4) throw FitError("fit_cubic: singular design matrix");
    const Eigen::VectorXd c = qr.solve(y);

    const Eigen::VectorXd resid = y - design * c;
    const double ss_res = resid.squaredNorm();
    const double ss_tot = (y.array() - y.mean()).square().sum();

    CubicFit fit;
    fit.c0 = c(0);
    fit.c1 = c(1);
    fit.c2 = c(2);
    fit.c3 = c(3);
    fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

double extrapolate(const CubicFit& fit, double d) { return fit.eval(d); }

void write_sweep_csv(const std::vector<SweepPoint>& points,
                     const std::filesystem::path& path, bool include_timings) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write sweep csv: " + path.string());
    out << "d,critical_n,first_failed_n,steps,wall_seconds\n";
    char buf[64];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.3f", include_timings ? p.wall_seconds : 0.0);
        out << p.d << ',' << p.critical_n << ',' << p.first_failed_n << ',' << p.total_steps
            << ',' << buf << '\n';
    }
}

void write_fit_json(const CubicFit& fit, const std::vector<int>& extrapolate_dims,
                    const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["coefficients"] = {fit.c0, fit.c1, fit.c2, fit.c3};
    j["r_squared"] = fit.r_squared;
    nlohmann::ordered_json table = nlohmann::ordered_json::array();
    for (int d : extrapolate_dims) {
        table.push_back({{"d", d}, {"critical_n", extrapolate(fit, d)}});
    }
    j["extrapolation"] = table;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write fit json: " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace embedcap
