#include "embedcap/free_embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

namespace embedcap {

namespace {

// splitmix64; used to derive independent restart seeds from the base seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Eigen::MatrixXd relevance_mask(const QrelMatrix& a) {
    Eigen::MatrixXd r(a.query_count(), a.doc_count());
    for (std::size_t i = 0; i < a.query_count(); ++i)
        for (std::size_t j = 0; j < a.doc_count(); ++j)
            r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a.at(i, j) ? 1.0 : 0.0;
    return r;
}

void require_consistent(const QrelMatrix& a, const EmbeddingPair& e, double tau,
                        const char* op) {
    if (tau <= 0.0) throw std::invalid_argument(std::string(op) + ": temperature must be positive");
    if (e.U.rows() != e.d || e.V.rows() != e.d ||
        e.U.cols() != static_cast<Eigen::Index>(a.query_count()) ||
        e.V.cols() != static_cast<Eigen::Index>(a.doc_count())) {
        throw ShapeError(std::string(op) + ": embedding shapes do not match the qrel matrix");
    }
}

void require_no_degenerate_rows(const QrelMatrix& a, const char* op) {
    for (std::size_t i = 0; i < a.query_count(); ++i) {
        if (a.row_sum(i) == 0) {
            throw DegenerateQueryError(std::string(op) + ": query " + a.query_ids()[i] +
                                       " has no relevant documents");
        }
    }
}

void normalize_columns(Eigen::MatrixXd& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m.col(c).normalize();
}

// Shared per-step workspace; everything is preallocated once per solve run.
struct StepWorkspace {
    Eigen::MatrixXd scores;   // m x n
    Eigen::MatrixXd probs;    // softmax rows
    Eigen::MatrixXd grad_b;
    Eigen::MatrixXd grad_u;
    Eigen::MatrixXd grad_v;
    Eigen::VectorXd row_max;
    Eigen::VectorXd row_z;
};

// Per-triple loss and gradient in one pass over the score matrix.
double triple_step(const Eigen::MatrixXd& rel, const Eigen::VectorXd& rel_counts,
                   double total_triples, const Eigen::MatrixXd& u,
                   const Eigen::MatrixXd& v, double tau, StepWorkspace& ws) {
    ws.scores.noalias() = u.transpose() * v;
    ws.scores /= tau;
    ws.row_max = ws.scores.rowwise().maxCoeff();
    ws.probs = (ws.scores.colwise() - ws.row_max).array().exp();
    ws.row_z = ws.probs.rowwise().sum();

    // loss: (1/T) sum_i [ k_i (log Z_i + max_i) - sum_{j in R_i} S_ij ]
    double loss = 0.0;
    loss += rel_counts.dot(ws.row_z.array().log().matrix() + ws.row_max);
    loss -= ws.scores.cwiseProduct(rel).sum();
    loss /= total_triples;

    ws.probs.array().colwise() /= ws.row_z.array();
    ws.grad_b = (ws.probs.array().colwise() * rel_counts.array()).matrix() - rel;
    ws.grad_b /= total_triples * tau;
    ws.grad_u.noalias() = v * ws.grad_b.transpose();
    ws.grad_v.noalias() = u * ws.grad_b;
    // Cosine-similarity gradient: columns are unit vectors, so the gradient
    // through the normalization is the raw gradient projected onto each
    // column's tangent space.
    for (Eigen::Index c = 0; c < u.cols(); ++c)
        ws.grad_u.col(c) -= u.col(c) * u.col(c).dot(ws.grad_u.col(c));
    for (Eigen::Index c = 0; c < v.cols(); ++c)
        ws.grad_v.col(c) -= v.col(c) * v.col(c).dot(ws.grad_v.col(c));
    return loss;
}

double row_separation_fraction(const Eigen::MatrixXd& rel, const Eigen::MatrixXd& scores) {
    const Eigen::Index m = scores.rows(), n = scores.cols();
    Eigen::Index separated = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        double min_rel = std::numeric_limits<double>::infinity();
        double max_irr = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (rel(i, j) != 0.0) min_rel = std::min(min_rel, scores(i, j));
            else max_irr = std::max(max_irr, scores(i, j));
        }
        if (min_rel > max_irr) ++separated;
    }
    return m == 0 ? 1.0 : static_cast<double>(separated) / static_cast<double>(m);
}

EmbeddingPair random_unit_embeddings(int d, std::size_t m, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    EmbeddingPair e;
    e.d = d;
    e.U.resize(d, static_cast<Eigen::Index>(m));
    e.V.resize(d, static_cast<Eigen::Index>(n));
    for (Eigen::Index c = 0; c < e.U.cols(); ++c)
        for (Eigen::Index r = 0; r < d; ++r) e.U(r, c) = gauss(rng);
    for (Eigen::Index c = 0; c < e.V.cols(); ++c)
        for (Eigen::Index r = 0; r < d; ++r) e.V(r, c) = gauss(rng);
    normalize_columns(e.U);
    normalize_columns(e.V);
    return e;
}

struct AdamState {
    Eigen::MatrixXd m1, v1, m2, v2;
    long t = 0;

    AdamState(Eigen::Index d, Eigen::Index m, Eigen::Index n)
        : m1(Eigen::MatrixXd::Zero(d, m)), v1(Eigen::MatrixXd::Zero(d, m)),
          m2(Eigen::MatrixXd::Zero(d, n)), v2(Eigen::MatrixXd::Zero(d, n)) {}

    void update(const OptimizerConfig& cfg, Eigen::MatrixXd& u, Eigen::MatrixXd& v,
                const Eigen::MatrixXd& gu, const Eigen::MatrixXd& gv) {
        ++t;
        const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
        const double step = cfg.learning_rate / bc1;
        const double denom_scale = 1.0 / std::sqrt(bc2);
        m1 = b1 * m1 + (1.0 - b1) * gu;
        v1 = b2 * v1 + (1.0 - b2) * gu.cwiseProduct(gu);
        m2 = b1 * m2 + (1.0 - b1) * gv;
        v2 = b2 * v2 + (1.0 - b2) * gv.cwiseProduct(gv);
        u.array() -= step * m1.array() / (v1.array().sqrt() * denom_scale + cfg.adam_epsilon);
        v.array() -= step * m2.array() / (v2.array().sqrt() * denom_scale + cfg.adam_epsilon);
    }
};

SolveResult solve_one(const QrelMatrix& a, int d, const OptimizerConfig& cfg,
                      std::uint64_t seed, const SolveObserver& observer) {
    const std::size_t m = a.query_count(), n = a.doc_count();
    EmbeddingPair e = random_unit_embeddings(d, m, n, seed);

    const Eigen::MatrixXd rel = relevance_mask(a);
    Eigen::VectorXd rel_counts = rel.rowwise().sum();
    const double total_triples = rel_counts.sum();

    StepWorkspace ws;
    AdamState adam(d, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));

    double best_loss = std::numeric_limits<double>::infinity();
    long since_best = 0;
    long step = 0;
    bool solved = false;

    for (step = 1; step <= cfg.max_steps; ++step) {
        const double loss = triple_step(rel, rel_counts, total_triples, e.U, e.V,
                                        cfg.temperature, ws);
        adam.update(cfg, e.U, e.V, ws.grad_u, ws.grad_v);
        normalize_columns(e.U);
        normalize_columns(e.V);

        if (loss < best_loss - cfg.min_improvement) {
            best_loss = loss;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (observer) observer(step, loss, best_loss);

        if (step % cfg.eval_every == 0) {
            ws.scores.noalias() = e.U.transpose() * e.V;
            if (row_separation_fraction(rel, ws.scores) == 1.0) {
                solved = true;
                break;
            }
        }
        if (since_best >= cfg.patience) break;
    }
    if (step > cfg.max_steps) step = cfg.max_steps;

    SolveResult result;
    result.steps_run = step;
    result.final_loss = triple_infonce_loss(a, e, cfg.temperature);
    result.accuracy = accuracy(a, e);
    // Never trust the in-loop counter alone: the solved flag requires an
    // independent pass of the rop checker over the final scores.
    result.solved = solved && check_rop(a, e.scores());
    result.embeddings = std::move(e);
    return result;
}

}  // namespace

void OptimizerConfig::validate() const {
    if (temperature <= 0.0) throw std::invalid_argument("OptimizerConfig: temperature must be > 0");
    if (learning_rate <= 0.0) throw std::invalid_argument("OptimizerConfig: learning_rate must be > 0");
    if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0)
        throw std::invalid_argument("OptimizerConfig: betas must lie in (0,1)");
    if (patience < 1) throw std::invalid_argument("OptimizerConfig: patience must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("OptimizerConfig: eval_every must be >= 1");
    if (max_steps < 1) throw std::invalid_argument("OptimizerConfig: max_steps must be >= 1");
    if (restarts < 1) throw std::invalid_argument("OptimizerConfig: restarts must be >= 1");
}

double infonce_loss(const QrelMatrix& a, const EmbeddingPair& e, double tau) {
    require_consistent(a, e, tau, "infonce_loss");
    require_no_degenerate_rows(a, "infonce_loss");

    const Eigen::MatrixXd rel = relevance_mask(a);
    Eigen::MatrixXd s = e.U.transpose() * e.V / tau;
    const Eigen::VectorXd row_max = s.rowwise().maxCoeff();
    const Eigen::MatrixXd ex = (s.colwise() - row_max).array().exp();
    const Eigen::VectorXd z_all = ex.rowwise().sum();
    const Eigen::VectorXd z_rel = ex.cwiseProduct(rel).rowwise().sum();
    return (z_all.array().log() - z_rel.array().log()).mean();
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> infonce_grad(const QrelMatrix& a,
                                                         const EmbeddingPair& e,
                                                         double tau) {
    require_consistent(a, e, tau, "infonce_grad");
    require_no_degenerate_rows(a, "infonce_grad");

    const Eigen::MatrixXd rel = relevance_mask(a);
    Eigen::MatrixXd s = e.U.transpose() * e.V / tau;
    const Eigen::VectorXd row_max = s.rowwise().maxCoeff();
    Eigen::MatrixXd p = (s.colwise() - row_max).array().exp();
    Eigen::MatrixXd q = p.cwiseProduct(rel);
    const Eigen::VectorXd z_all = p.rowwise().sum();
    const Eigen::VectorXd z_rel = q.rowwise().sum();
    p.array().colwise() /= z_all.array();
    q.array().colwise() /= z_rel.array();

    const double scale = 1.0 / (static_cast<double>(a.query_count()) * tau);
    Eigen::MatrixXd grad_b = (p - q) * scale;
    return {e.V * grad_b.transpose(), e.U * grad_b};
}

double triple_infonce_loss(const QrelMatrix& a, const EmbeddingPair& e, double tau) {
    require_consistent(a, e, tau, "triple_infonce_loss");
    require_no_degenerate_rows(a, "triple_infonce_loss");

    const Eigen::MatrixXd rel = relevance_mask(a);
    const Eigen::VectorXd rel_counts = rel.rowwise().sum();
    Eigen::MatrixXd s = e.U.transpose() * e.V / tau;
    const Eigen::VectorXd row_max = s.rowwise().maxCoeff();
    const Eigen::MatrixXd ex = (s.colwise() - row_max).array().exp();
    const Eigen::VectorXd z_all = ex.rowwise().sum();

    double loss = rel_counts.dot(z_all.array().log().matrix() + row_max);
    loss -= s.cwiseProduct(rel).sum();
    return loss / rel_counts.sum();
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> triple_infonce_grad(const QrelMatrix& a,
                                                                const EmbeddingPair& e,
                                                                double tau) {
    require_consistent(a, e, tau, "triple_infonce_grad");
    require_no_degenerate_rows(a, "triple_infonce_grad");

    const Eigen::MatrixXd rel = relevance_mask(a);
    const Eigen::VectorXd rel_counts = rel.rowwise().sum();
    const double total = rel_counts.sum();
    StepWorkspace ws;
    triple_step(rel, rel_counts, total, e.U, e.V, tau, ws);
    return {std::move(ws.grad_u), std::move(ws.grad_v)};
}

double accuracy(const QrelMatrix& a, const EmbeddingPair& e) {
    if (e.U.cols() != static_cast<Eigen::Index>(a.query_count()) ||
        e.V.cols() != static_cast<Eigen::Index>(a.doc_count()) || e.U.rows() != e.V.rows()) {
        throw ShapeError("accuracy: embedding shapes do not match the qrel matrix");
    }
    return row_separation_fraction(relevance_mask(a), e.U.transpose() * e.V);
}

SolveResult solve(const QrelMatrix& a, int d, const OptimizerConfig& cfg,
                  const SolveObserver& observer) {
    cfg.validate();
    if (d < 1) throw std::invalid_argument("solve: d must be >= 1");
    require_no_degenerate_rows(a, "solve");

    const std::size_t m = a.query_count(), n = a.doc_count();
    // Working set: score-shaped matrices dominate (scores, probs, grad_b,
    // relevance mask), plus embeddings and Adam moments.
    const std::uint64_t bytes =
        8ull * (4ull * m * n + 6ull * static_cast<std::uint64_t>(d) * (m + n));
    if (bytes > cfg.max_bytes) {
        throw CapacityError("solve: working set of " + std::to_string(bytes) +
                            " bytes exceeds budget of " + std::to_string(cfg.max_bytes));
    }

    SolveResult best;
    bool have_best = false;
    for (int r = 0; r < cfg.restarts; ++r) {
        const std::uint64_t seed = r == 0 ? cfg.seed : mix_seed(cfg.seed, static_cast<std::uint64_t>(r));
        SolveResult attempt = solve_one(a, d, cfg, seed, observer);
        if (attempt.solved) return attempt;
        if (!have_best || attempt.accuracy > best.accuracy) {
            best = std::move(attempt);
            have_best = true;
        }
    }
    return best;
}

std::optional<int> sign_rank_upper_bound(const QrelMatrix& a, int d_max,
                                         const OptimizerConfig& cfg) {
    if (d_max < 1) throw std::invalid_argument("sign_rank_upper_bound: d_max must be >= 1");
    for (int d = 1; d <= d_max; ++d) {
        SolveResult r = solve(a, d, cfg);
        if (r.solved && check_rop(a, r.embeddings.scores())) return d + 1;
    }
    return std::nullopt;
}

void write_vectors_jsonl(const std::filesystem::path& path,
                         const std::vector<std::string>& ids,
                         const Eigen::MatrixXd& m) {
    if (static_cast<Eigen::Index>(ids.size()) != m.cols()) {
        throw ShapeError("write_vectors_jsonl: id count does not match column count");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vectors file: " + path.string());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        nlohmann::json row;
        row["id"] = ids[static_cast<std::size_t>(c)];
        std::vector<double> v(m.rows());
        for (Eigen::Index r = 0; r < m.rows(); ++r) v[static_cast<std::size_t>(r)] = m(r, c);
        row["vector"] = v;
        out << row.dump() << '\n';
    }
}

}  // namespace embedcap
