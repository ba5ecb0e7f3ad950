#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "embedcap/errors.hpp"

namespace embedcap {

/// Real-valued query-by-document score matrix (row = query, col = document).
using ScoreMatrix = Eigen::MatrixXd;

/// Binary relevance judgments: m queries by n documents, entries in {0,1}.
///
/// Stored dense; intended scale is desk-size theory checks (up to ~1e6
/// entries), where a flat byte matrix beats anything sparse.
class QrelMatrix {
  public:
    QrelMatrix(std::size_t m, std::size_t n,
               std::vector<std::string> query_ids,
               std::vector<std::string> doc_ids);

    /// Convenience constructor with generated ids q0..q{m-1} / d0..d{n-1}.
    QrelMatrix(std::size_t m, std::size_t n);

    std::size_t query_count() const { return m_; }
    std::size_t doc_count() const { return n_; }

    bool at(std::size_t i, std::size_t j) const { return bits_[i * n_ + j] != 0; }
    void set(std::size_t i, std::size_t j, bool v) { bits_[i * n_ + j] = v ? 1 : 0; }

    const std::vector<std::string>& query_ids() const { return query_ids_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }

    std::size_t row_sum(std::size_t i) const;
    std::size_t col_sum(std::size_t j) const;

    /// Column indices of the relevant documents of query i, ascending.
    std::vector<std::size_t> relevant_docs(std::size_t i) const;

    bool operator==(const QrelMatrix& other) const = default;

  private:
    std::size_t m_ = 0;
    std::size_t n_ = 0;
    std::vector<std::uint8_t> bits_;
    std::vector<std::string> query_ids_;
    std::vector<std::string> doc_ids_;
};

/// Entrywise sign matrix, entries in {-1,+1}.
struct SignMatrix {
    Eigen::MatrixXi entries;

    std::size_t rows() const { return static_cast<std::size_t>(entries.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(entries.cols()); }
};

/// Witness that a score matrix realizes a qrel matrix under one of the
/// threshold semantics. Row thresholds are present for kind rt, the global
/// threshold for kind gt.
struct RankCertificate {
    enum class Kind { rop, rt, gt };

    Kind kind = Kind::rt;
    std::optional<Eigen::VectorXd> row_thresholds;
    std::optional<double> global_threshold;
    int realized_rank_upper_bound = 0;
};

/// M = 2A - 1: relevant entries map to +1, irrelevant to -1.
SignMatrix sign_matrix(const QrelMatrix& a);

/// True iff every row of b ranks all relevant documents strictly above all
/// irrelevant ones. Rows that are all-relevant or all-irrelevant are
/// vacuously satisfied. Ties count as violations.
bool check_rop(const QrelMatrix& a, const ScoreMatrix& b);

/// Builds a row-threshold certificate with tau_i = (max L_i + min U_i)/2 for
/// two-sided rows (0 for vacuous rows); nullopt when check_rop fails.
/// realized_d is recorded as the certificate's rank upper bound; pass the
/// embedding dimension that produced b when known, or leave negative to
/// record min(m, n).
std::optional<RankCertificate> make_rt_certificate(const QrelMatrix& a,
                                                   const ScoreMatrix& b,
                                                   int realized_d = -1);

/// True iff b[i][j] > tau exactly where a[i][j] = 1 and b[i][j] < tau
/// elsewhere. A tau colliding with any entry fails (strict separation).
bool check_gt(const QrelMatrix& a, const ScoreMatrix& b, double tau);

/// b[i][j] - tau[i]. Raises the rank by at most one.
ScoreMatrix shift_rows(const ScoreMatrix& b, const Eigen::VectorXd& tau);

/// True iff sign(b[i][j]) == m[i][j] everywhere; zero entries have no sign
/// and fail.
bool sign_agrees(const SignMatrix& m, const ScoreMatrix& b);

// --- TREC/BEIR tab-separated qrels -----------------------------------------
//
// Format: header line `query-id<TAB>corpus-id<TAB>score`, then one judged
// pair per line with score in {0,1}. Pairs absent from the file are 0.
// Ids keep first-appearance order.

QrelMatrix load_qrels_tsv(std::istream& in);
QrelMatrix load_qrels_tsv(const std::filesystem::path& path);
void save_qrels_tsv(const QrelMatrix& a, std::ostream& out);
void save_qrels_tsv(const QrelMatrix& a, const std::filesystem::path& path);

}  // namespace embedcap
