#include "embedcap/qrel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace embedcap {

namespace {

void require_same_shape(const QrelMatrix& a, const ScoreMatrix& b, const char* op) {
    if (static_cast<Eigen::Index>(a.query_count()) != b.rows() ||
        static_cast<Eigen::Index>(a.doc_count()) != b.cols()) {
        throw ShapeError(std::string(op) + ": qrel matrix is " +
                         std::to_string(a.query_count()) + "x" + std::to_string(a.doc_count()) +
                         " but score matrix is " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

}  // namespace

QrelMatrix::QrelMatrix(std::size_t m, std::size_t n,
                       std::vector<std::string> query_ids,
                       std::vector<std::string> doc_ids)
    : m_(m), n_(n), bits_(m * n, 0),
      query_ids_(std::move(query_ids)), doc_ids_(std::move(doc_ids)) {
    if (query_ids_.size() != m_ || doc_ids_.size() != n_) {
        throw ShapeError("QrelMatrix: id list lengths must match m and n");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : query_ids_) {
        if (!seen.insert(id).second) throw ShapeError("QrelMatrix: duplicate query id " + id);
    }
    seen.clear();
    for (const auto& id : doc_ids_) {
        if (!seen.insert(id).second) throw ShapeError("QrelMatrix: duplicate doc id " + id);
    }
}

QrelMatrix::QrelMatrix(std::size_t m, std::size_t n)
    : m_(m), n_(n), bits_(m * n, 0) {
    query_ids_.reserve(m);
    doc_ids_.reserve(n);
    for (std::size_t i = 0; i < m; ++i) query_ids_.push_back("q" + std::to_string(i));
    for (std::size_t j = 0; j < n; ++j) doc_ids_.push_back("d" + std::to_string(j));
}

std::size_t QrelMatrix::row_sum(std::size_t i) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < n_; ++j) s += bits_[i * n_ + j];
    return s;
}

std::size_t QrelMatrix::col_sum(std::size_t j) const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < m_; ++i) s += bits_[i * n_ + j];
    return s;
}

std::vector<std::size_t> QrelMatrix::relevant_docs(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n_; ++j)
        if (at(i, j)) out.push_back(j);
    return out;
}

SignMatrix sign_matrix(const QrelMatrix& a) {
    Eigen::MatrixXi s(a.query_count(), a.doc_count());
    for (std::size_t i = 0; i < a.query_count(); ++i)
        for (std::size_t j = 0; j < a.doc_count(); ++j)
            s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a.at(i, j) ? 1 : -1;
    return SignMatrix{std::move(s)};
}

bool check_rop(const QrelMatrix& a, const ScoreMatrix& b) {
    require_same_shape(a, b, "check_rop");
    const auto m = static_cast<Eigen::Index>(a.query_count());
    const auto n = static_cast<Eigen::Index>(a.doc_count());
    for (Eigen::Index i = 0; i < m; ++i) {
        double min_rel = std::numeric_limits<double>::infinity();
        double max_irr = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (a.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
                min_rel = std::min(min_rel, b(i, j));
            } else {
                max_irr = std::max(max_irr, b(i, j));
            }
        }
        // Vacuous rows leave one side at +/-inf and pass automatically.
        if (!(min_rel > max_irr)) return false;
    }
    return true;
}

std::optional<RankCertificate> make_rt_certificate(const QrelMatrix& a,
                                                   const ScoreMatrix& b,
                                                   int realized_d) {
    require_same_shape(a, b, "make_rt_certificate");
    if (!check_rop(a, b)) return std::nullopt;

    const auto m = static_cast<Eigen::Index>(a.query_count());
    const auto n = static_cast<Eigen::Index>(a.doc_count());
    Eigen::VectorXd tau(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        double min_rel = std::numeric_limits<double>::infinity();
        double max_irr = -std::numeric_limits<double>::infinity();
        bool any_rel = false, any_irr = false;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (a.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
                min_rel = std::min(min_rel, b(i, j));
                any_rel = true;
            } else {
                max_irr = std::max(max_irr, b(i, j));
                any_irr = true;
            }
        }
        if (any_rel && any_irr) {
            tau(i) = (max_irr + min_rel) / 2.0;
        } else if (any_rel) {
            tau(i) = min_rel - 1.0;  // all relevant: anything below the scores
        } else {
            tau(i) = any_irr ? max_irr + 1.0 : 0.0;  // all irrelevant (or empty row)
        }
    }

    RankCertificate cert;
    cert.kind = RankCertificate::Kind::rt;
    cert.row_thresholds = std::move(tau);
    cert.realized_rank_upper_bound =
        realized_d >= 0 ? realized_d
                        : static_cast<int>(std::min(a.query_count(), a.doc_count()));
    return cert;
}

bool check_gt(const QrelMatrix& a, const ScoreMatrix& b, double tau) {
    require_same_shape(a, b, "check_gt");
    if (!std::isfinite(tau)) return false;
    const auto m = static_cast<Eigen::Index>(a.query_count());
    const auto n = static_cast<Eigen::Index>(a.doc_count());
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const bool rel = a.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            if (rel ? !(b(i, j) > tau) : !(b(i, j) < tau)) return false;
        }
    }
    return true;
}

ScoreMatrix shift_rows(const ScoreMatrix& b, const Eigen::VectorXd& tau) {
    if (tau.size() != b.rows()) {
        throw ShapeError("shift_rows: threshold vector length " + std::to_string(tau.size()) +
                         " does not match row count " + std::to_string(b.rows()));
    }
    return b.colwise() - tau;
}

bool sign_agrees(const SignMatrix& m, const ScoreMatrix& b) {
    if (m.entries.rows() != b.rows() || m.entries.cols() != b.cols()) {
        throw ShapeError("sign_agrees: shape mismatch");
    }
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            const double v = b(i, j);
            if (m.entries(i, j) > 0 ? !(v > 0.0) : !(v < 0.0)) return false;
        }
    }
    return true;
}

// --- TSV io -----------------------------------------------------------------

QrelMatrix load_qrels_tsv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("qrels: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "query-id\tcorpus-id\tscore") {
        throw ParseError("qrels line 1: expected header 'query-id\\tcorpus-id\\tscore', got '" +
                         line + "'");
    }

    std::vector<std::string> query_ids, doc_ids;
    std::unordered_map<std::string, std::size_t> qidx, didx;
    struct Pair { std::size_t q, d; bool rel; };
    std::vector<Pair> pairs;

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos) {
            throw ParseError("qrels line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
        }
        const std::string qid = line.substr(0, t1);
        const std::string did = line.substr(t1 + 1, t2 - t1 - 1);
        const std::string score = line.substr(t2 + 1);
        if (score != "0" && score != "1") {
            throw ParseError("qrels line " + std::to_string(lineno) + ": score must be 0 or 1, got '" +
                             score + "'");
        }
        auto [qit, qnew] = qidx.try_emplace(qid, query_ids.size());
        if (qnew) query_ids.push_back(qid);
        auto [dit, dnew] = didx.try_emplace(did, doc_ids.size());
        if (dnew) doc_ids.push_back(did);
        pairs.push_back({qit->second, dit->second, score == "1"});
    }

    QrelMatrix a(query_ids.size(), doc_ids.size(), std::move(query_ids), std::move(doc_ids));
    for (const auto& p : pairs)
        if (p.rel) a.set(p.q, p.d, true);
    return a;
}

QrelMatrix load_qrels_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open qrels file: " + path.string());
    return load_qrels_tsv(in);
}

void save_qrels_tsv(const QrelMatrix& a, std::ostream& out) {
    out << "query-id\tcorpus-id\tscore\n";
    for (std::size_t i = 0; i < a.query_count(); ++i)
        for (std::size_t j = 0; j < a.doc_count(); ++j)
            if (a.at(i, j)) out << a.query_ids()[i] << '\t' << a.doc_ids()[j] << "\t1\n";
}

void save_qrels_tsv(const QrelMatrix& a, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write qrels file: " + path.string());
    save_qrels_tsv(a, out);
}

}  // namespace embedcap
