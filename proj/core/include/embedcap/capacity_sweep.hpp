#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "embedcap/free_embed.hpp"
#include "embedcap/qrel.hpp"

namespace embedcap {

/// C(n, k) in 128-bit arithmetic; CapacityError once the value no longer
/// fits in 64 bits (the combination counts explode quickly).
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// Smallest n with C(n, k) >= m.
std::size_t min_docs_for_queries(std::uint64_t m, std::uint64_t k);

/// Qrel matrix whose rows are k-subsets of n documents: all C(n,k) subsets
/// in lexicographic order when m is nullopt, otherwise a seeded uniform
/// sample of m distinct subsets.
QrelMatrix dense_qrels(std::size_t n, std::size_t k,
                       std::optional<std::uint64_t> m = std::nullopt,
                       std::uint64_t seed = 0);

struct TrialSummary {
    std::size_t n = 0;
    bool solved = false;
    long steps = 0;
    double accuracy = 0.0;
    double final_loss = 0.0;
    int attempts = 1;  // 1 + confirmation retries actually run
};

/// Largest n solved at dimension d plus the first failure, with per-n solve
/// summaries for the whole scan.
struct SweepPoint {
    int d = 0;
    std::size_t critical_n = 0;
    std::size_t first_failed_n = 0;
    std::vector<TrialSummary> trials;
    long total_steps = 0;
    double wall_seconds = 0.0;
};

struct ScanConfig {
    std::size_t n_start = 3;
    std::size_t n_max = 4096;     // hard stop; ScanError if the scan never fails
    int confirm_restarts = 2;     // extra reseeded attempts before a failure is final
};

/// Scans n = n_start, n_start+1, ... building the full top-k combination
/// matrix at each n and solving it at dimension d. A cell only counts as
/// failed after confirm_restarts reseeded retries also fail. ScanError if
/// n_start itself fails (lower it) or n_max is reached without a failure.
SweepPoint find_critical_n(int d, std::size_t k, const OptimizerConfig& cfg,
                           const ScanConfig& scan = {});

/// y = c0 + c1 d + c2 d^2 + c3 d^3 fitted by least squares.
struct CubicFit {
    double c0 = 0, c1 = 0, c2 = 0, c3 = 0;
    double r_squared = 0;

    double eval(double d) const { return c0 + d * (c1 + d * (c2 + d * c3)); }
};

/// Ordinary least squares on the degree-3 Vandermonde system. Requires at
/// least 4 distinct d values; r^2 = 1 - SS_res/SS_tot over the inputs.
CubicFit fit_cubic(const std::vector<std::pair<double, double>>& points);

/// Evaluates the fitted cubic at d.
double extrapolate(const CubicFit& fit, double d);

// --- artifact emission -------------------------------------------------------

/// CSV with columns d,critical_n,first_failed_n,steps,wall_seconds.
/// Wall seconds are written as 0.000 unless include_timings is set, keeping
/// rerun output byte-identical by default.
void write_sweep_csv(const std::vector<SweepPoint>& points,
                     const std::filesystem::path& path, bool include_timings = false);

/// JSON with coefficients, r^2 and an extrapolation table for the given dims.
void write_fit_json(const CubicFit& fit, const std::vector<int>& extrapolate_dims,
                    const std::filesystem::path& path);

}  // namespace embedcap
