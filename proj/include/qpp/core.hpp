#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace qpp {

/// Malformed input text; carries a 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Semantically invalid data (invariant violation, missing vector, ...).
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inconsistent request (predictor without its input store, bad params, ...).
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerically undefined operation (degenerate normalizer, zero variance, ...).
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScoredEntry {
  std::string doc_id;
  double score;
  bool operator==(const ScoredEntry&) const = default;
};

/// One query's ranked result list, sorted non-increasing by score.
/// Ties keep the order the entries were supplied in.
class ScoredRanking {
 public:
  ScoredRanking(std::string query_id, std::vector<ScoredEntry> entries);

  const std::string& query_id() const { return query_id_; }
  const std::vector<ScoredEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Top-k entries; k past the end returns the whole list.
  std::vector<ScoredEntry> head(std::size_t k) const;
  /// Top-k scores in rank order.
  std::vector<double> head_scores(std::size_t k) const;

  bool operator==(const ScoredRanking&) const = default;

 private:
  std::string query_id_;
  std::vector<ScoredEntry> entries_;
};

/// Validates and sorts a raw (doc_id, score) list into a ScoredRanking.
ScoredRanking validate_ranking(std::string query_id, std::vector<ScoredEntry> raw);

/// Non-negative term weights; zero weights are never stored.
class SparseVector {
 public:
  SparseVector() = default;
  explicit SparseVector(std::map<std::string, double> components);

  const std::map<std::string, double>& components() const { return components_; }
  bool operator==(const SparseVector&) const = default;

 private:
  std::map<std::string, double> components_;
};

double dot(const SparseVector& a, const SparseVector& b);

class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::vector<double> values);

  const std::vector<double>& values() const { return values_; }
  std::size_t dim() const { return values_.size(); }
  bool operator==(const DenseVector&) const = default;

 private:
  std::vector<double> values_;
};

double dot(const DenseVector& a, const DenseVector& b);

enum class StoreKind { sparse, dense };

/// Document/query vectors keyed by id; all entries share one kind,
/// and all dense entries share one dimensionality.
class VectorStore {
 public:
  explicit VectorStore(StoreKind kind, std::size_t dim = 0) : kind_(kind), dim_(dim) {}

  StoreKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const;
  bool contains(const std::string& id) const;

  void add(const std::string& id, SparseVector v);
  void add(const std::string& id, DenseVector v);

  const SparseVector& sparse_at(const std::string& id) const;
  const DenseVector& dense_at(const std::string& id) const;

  const std::map<std::string, SparseVector>& sparse_vectors() const { return sparse_; }
  const std::map<std::string, DenseVector>& dense_vectors() const { return dense_; }

  bool operator==(const VectorStore&) const = default;

 private:
  StoreKind kind_;
  std::size_t dim_;
  std::map<std::string, SparseVector> sparse_;
  std::map<std::string, DenseVector> dense_;
};

/// Relevance judgments, grade >= 0, keyed (query_id, doc_id).
class Qrels {
 public:
  void set(const std::string& query_id, const std::string& doc_id, int grade);
  /// Grade of a judged pair, or 0 when unjudged.
  int grade(const std::string& query_id, const std::string& doc_id) const;
  bool has_query(const std::string& query_id) const;
  /// All judged (doc_id, grade) pairs for one query.
  const std::map<std::string, int>& judged(const std::string& query_id) const;
  const std::map<std::string, std::map<std::string, int>>& by_query() const { return judgments_; }

  bool operator==(const Qrels&) const = default;

 private:
  std::map<std::string, std::map<std::string, int>> judgments_;
  static const std::map<std::string, int> empty_;
};

/// Per-query values for a fixed ordered list of named columns.
/// Missing cells are NaN and serialize as "NA".
class ValueTable {
 public:
  ValueTable() = default;
  explicit ValueTable(std::vector<std::string> names) : names_(std::move(names)) {}

  const std::vector<std::string>& names() const { return names_; }
  const std::map<std::string, std::vector<double>>& rows() const { return rows_; }

  void set_row(const std::string& query_id, std::vector<double> values);
  void set_cell(const std::string& query_id, const std::string& name, double value);
  /// NaN when the cell is missing.
  double cell(const std::string& query_id, const std::string& name) const;
  std::size_t column_index(const std::string& name) const;
  /// One column as qid -> value, skipping missing cells.
  std::map<std::string, double> column(const std::string& name) const;
  std::size_t num_queries() const { return rows_.size(); }

  bool operator==(const ValueTable&) const = default;

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::vector<double>> rows_;
};

using PredictorTable = ValueTable;
using EffectivenessTable = ValueTable;
using SareTable = ValueTable;

/// The six question categories of the query-type taxonomy.
const std::set<std::string>& canonical_query_types();

class QueryTypeMap {
 public:
  void assign(const std::string& query_id, const std::string& label);
  bool contains(const std::string& query_id) const;
  const std::string& label(const std::string& query_id) const;
  const std::map<std::string, std::string>& assignment() const { return assignment_; }
  /// Throws DataError if any label is outside the canonical taxonomy.
  void validate_strict() const;

  bool operator==(const QueryTypeMap&) const = default;

 private:
  std::map<std::string, std::string> assignment_;
};

inline bool is_missing(double v) { return std::isnan(v); }

}  // namespace qpp
