#include "qpp/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qpp {

ScoredRanking::ScoredRanking(std::string query_id, std::vector<ScoredEntry> entries)
    : query_id_(std::move(query_id)), entries_(std::move(entries)) {
  if (entries_.empty()) throw DataError("ranking for query '" + query_id_ + "' is empty");
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (!std::isfinite(e.score))
      throw DataError("non-finite score for doc '" + e.doc_id + "' in query '" + query_id_ + "'");
    if (!seen.insert(e.doc_id).second)
      throw DataError("duplicate doc id '" + e.doc_id + "' in query '" + query_id_ + "'");
  }
  // Stable: equal scores keep input order.
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const ScoredEntry& a, const ScoredEntry& b) { return a.score > b.score; });
}

std::vector<ScoredEntry> ScoredRanking::head(std::size_t k) const {
  std::size_t n = std::min(k, entries_.size());
  return {entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<double> ScoredRanking::head_scores(std::size_t k) const {
  std::size_t n = std::min(k, entries_.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = entries_[i].score;
  return out;
}

ScoredRanking validate_ranking(std::string query_id, std::vector<ScoredEntry> raw) {
  return ScoredRanking(std::move(query_id), std::move(raw));
}

SparseVector::SparseVector(std::map<std::string, double> components)
    : components_(std::move(components)) {
  for (auto it = components_.begin(); it != components_.end();) {
    if (!std::isfinite(it->second))
      throw DataError("non-finite weight for term '" + it->first + "'");
    if (it->second < 0.0)
      throw DataError("negative weight for term '" + it->first + "'");
    if (it->second == 0.0)
      it = components_.erase(it);
    else
      ++it;
  }
}

double dot(const SparseVector& a, const SparseVector& b) {
  const auto& small = a.components().size() <= b.components().size() ? a : b;
  const auto& large = a.components().size() <= b.components().size() ? b : a;
  double sum = 0.0;
  for (const auto& [term, w] : small.components()) {
    auto it = large.components().find(term);
    if (it != large.components().end()) sum += w * it->second;
  }
  return sum;
}

DenseVector::DenseVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_)
    if (!std::isfinite(v)) throw DataError("non-finite component in dense vector");
}

double dot(const DenseVector& a, const DenseVector& b) {
  if (a.dim() != b.dim())
    throw DataError("dense vector dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                    std::to_string(b.dim()));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) sum += a.values()[i] * b.values()[i];
  return sum;
}

std::size_t VectorStore::size() const {
  return kind_ == StoreKind::sparse ? sparse_.size() : dense_.size();
}

bool VectorStore::contains(const std::string& id) const {
  return kind_ == StoreKind::sparse ? sparse_.contains(id) : dense_.contains(id);
}

void VectorStore::add(const std::string& id, SparseVector v) {
  if (kind_ != StoreKind::sparse) throw DataError("sparse vector added to dense store");
  sparse_[id] = std::move(v);
}

void VectorStore::add(const std::string& id, DenseVector v) {
  if (kind_ != StoreKind::dense) throw DataError("dense vector added to sparse store");
  if (v.dim() != dim_)
    throw DataError("vector '" + id + "' has dim " + std::to_string(v.dim()) +
                    ", store expects " + std::to_string(dim_));
  dense_[id] = std::move(v);
}

const SparseVector& VectorStore::sparse_at(const std::string& id) const {
  auto it = sparse_.find(id);
  if (it == sparse_.end()) throw DataError("no sparse vector for id '" + id + "'");
  return it->second;
}

const DenseVector& VectorStore::dense_at(const std::string& id) const {
  auto it = dense_.find(id);
  if (it == dense_.end()) throw DataError("no dense vector for id '" + id + "'");
  return it->second;
}

const std::map<std::string, int> Qrels::empty_;

void Qrels::set(const std::string& query_id, const std::string& doc_id, int grade) {
  if (grade < 0) throw DataError("negative grade for (" + query_id + ", " + doc_id + ")");
  judgments_[query_id][doc_id] = grade;
}

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
  auto q = judgments_.find(query_id);
  if (q == judgments_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

bool Qrels::has_query(const std::string& query_id) const {
  return judgments_.contains(query_id);
}

const std::map<std::string, int>& Qrels::judged(const std::string& query_id) const {
  auto q = judgments_.find(query_id);
  return q == judgments_.end() ? empty_ : q->second;
}

void ValueTable::set_row(const std::string& query_id, std::vector<double> values) {
  if (values.size() != names_.size())
    throw DataError("row for query '" + query_id + "' has " + std::to_string(values.size()) +
                    " values, expected " + std::to_string(names_.size()));
  rows_[query_id] = std::move(values);
}

void ValueTable::set_cell(const std::string& query_id, const std::string& name, double value) {
  auto it = rows_.find(query_id);
  if (it == rows_.end()) {
    it = rows_.emplace(query_id, std::vector<double>(names_.size(),
                                                     std::numeric_limits<double>::quiet_NaN()))
             .first;
  }
  it->second[column_index(name)] = value;
}

double ValueTable::cell(const std::string& query_id, const std::string& name) const {
  auto it = rows_.find(query_id);
  if (it == rows_.end()) return std::numeric_limits<double>::quiet_NaN();
  return it->second[column_index(name)];
}

std::size_t ValueTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw DataError("no column named '" + name + "'");
}

std::map<std::string, double> ValueTable::column(const std::string& name) const {
  std::size_t idx = column_index(name);
  std::map<std::string, double> out;
  for (const auto& [qid, vals] : rows_)
    if (!is_missing(vals[idx])) out[qid] = vals[idx];
  return out;
}

const std::set<std::string>& canonical_query_types() {
  static const std::set<std::string> types = {"Evidence-based", "Factoid",  "Experience",
                                              "Instruction",    "Reason",   "Not a Question"};
  return types;
}

void QueryTypeMap::assign(const std::string& query_id, const std::string& label) {
  auto it = assignment_.find(query_id);
  if (it != assignment_.end() && it->second != label)
    throw DataError("conflicting type labels for query '" + query_id + "': '" + it->second +
                    "' vs '" + label + "'");
  assignment_[query_id] = label;
}

bool QueryTypeMap::contains(const std::string& query_id) const {
  return assignment_.contains(query_id);
}

const std::string& QueryTypeMap::label(const std::string& query_id) const {
  auto it = assignment_.find(query_id);
  if (it == assignment_.end()) throw DataError("no type label for query '" + query_id + "'");
  return it->second;
}

void QueryTypeMap::validate_strict() const {
  for (const auto& [qid, label] : assignment_)
    if (!canonical_query_types().contains(label))
      throw DataError("query '" + qid + "' has non-canonical type label '" + label + "'");
}

}  // namespace qpp
