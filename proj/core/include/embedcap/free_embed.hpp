#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "embedcap/qrel.hpp"

namespace embedcap {

/// Free embeddings: one directly optimized unit vector per query (columns of
/// U, d x m) and per document (columns of V, d x n).
struct EmbeddingPair {
    int d = 0;
    Eigen::MatrixXd U;
    Eigen::MatrixXd V;

    ScoreMatrix scores() const { return U.transpose() * V; }
};

struct OptimizerConfig {
    double temperature = 0.1;
    double learning_rate = 0.02;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    long max_steps = 200000;
    long patience = 1000;       // early stop after this many steps without a new best loss
    long eval_every = 25;       // accuracy check cadence, in steps
    std::uint64_t seed = 42;
    int restarts = 1;
    double min_improvement = 1e-7;  // absolute loss decrease that counts as progress
    std::uint64_t max_bytes = 2ull << 30;  // optimizer working-set budget

    void validate() const;
};

struct SolveResult {
    bool solved = false;     // full per-row separation reached and re-verified
    long steps_run = 0;
    double final_loss = 0.0;
    double accuracy = 0.0;   // fraction of fully separated queries
    EmbeddingPair embeddings;
};

/// Grouped InfoNCE over each query's full relevant set:
///   L = -(1/m) sum_i log( sum_{j in R_i} exp(B_ij/tau) / sum_k exp(B_ik/tau) )
/// Computed with per-row max subtraction; always >= 0.
double infonce_loss(const QrelMatrix& a, const EmbeddingPair& e, double tau);

/// Analytic gradient of infonce_loss with respect to U and V.
/// With p_i the full softmax of row i and q_i the softmax restricted to R_i,
/// dB_ij = (p_ij - q_ij)/(m tau), dU = V dB^T, dV = U dB.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> infonce_grad(const QrelMatrix& a,
                                                         const EmbeddingPair& e,
                                                         double tau);

/// Per-triple InfoNCE: one term per (query, relevant doc) pair,
///   L = -(1/T) sum_{(i,r)} log( exp(B_ir/tau) / sum_k exp(B_ik/tau) )
/// where T is the total number of relevant pairs. This is the training
/// objective solve() optimizes: unlike the grouped form it keeps pushing
/// every relevant document above the irrelevant ones instead of saturating
/// once a single relevant document dominates the softmax.
double triple_infonce_loss(const QrelMatrix& a, const EmbeddingPair& e, double tau);

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> triple_infonce_grad(const QrelMatrix& a,
                                                                const EmbeddingPair& e,
                                                                double tau);

/// Fraction of queries whose relevant scores all exceed all irrelevant
/// scores (strictly; ties fail). Equals 1.0 exactly when check_rop holds.
double accuracy(const QrelMatrix& a, const EmbeddingPair& e);

using SolveObserver = std::function<void(long step, double loss, double best_loss)>;

/// Full-batch Adam on the per-triple InfoNCE loss with column renormalization
/// after every update. Runs cfg.restarts independent seeds; a solved run wins
/// immediately, otherwise the highest-accuracy run is returned. Deterministic
/// for fixed cfg and inputs.
SolveResult solve(const QrelMatrix& a, int d, const OptimizerConfig& cfg,
                  const SolveObserver& observer = nullptr);

/// Smallest d <= d_max whose solve() run separates a, reported as d+1: a
/// certified upper bound on the sign rank of 2A - 1. The bound is only
/// emitted after an independent check_rop pass on the final score matrix.
std::optional<int> sign_rank_upper_bound(const QrelMatrix& a, int d_max,
                                         const OptimizerConfig& cfg);

/// One JSON object per line: {"id": <string>, "vector": [<d reals>]}.
/// Columns of m are written in id order.
void write_vectors_jsonl(const std::filesystem::path& path,
                         const std::vector<std::string>& ids,
                         const Eigen::MatrixXd& m);

}  // namespace embedcap
