#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nncomp/error.hpp"

namespace nncomp {

enum class Metric : std::uint8_t { L2, Cosine };

Metric parse_metric(std::string_view text);

using Id = std::int64_t;

/// Database descriptors, one per row.
template <typename Scalar>
struct Database {
  std::vector<Id> ids;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> vectors;

  std::size_t size() const { return ids.size(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

template <typename Scalar>
struct Query {
  Id id = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> descriptor;
  std::vector<Id> relevant;
};

template <typename Scalar>
struct RetrievalRun {
  std::vector<Query<Scalar>> queries;
  Database<Scalar> database;
  Metric metric = Metric::L2;
};

/// Database ids by ascending L2 distance or descending cosine similarity,
/// ties by ascending id. `exclude` drops one id (the query itself).
template <typename Scalar, typename Derived>
std::vector<Id> rank_database(const Eigen::MatrixBase<Derived>& q, const Database<Scalar>& db, Metric metric,
                              std::optional<Id> exclude = std::nullopt) {
  if (db.size() == 0) throw ArgumentError("cannot rank an empty database");
  if (q.size() != db.dim())
    throw ShapeError("query has dimension " + std::to_string(q.size()) + ", database " + std::to_string(db.dim()));
  const Eigen::VectorXd qd = q.template cast<double>();
  const double qn = qd.norm();
  std::vector<std::pair<double, Id>> keyed;
  keyed.reserve(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (exclude && db.ids[i] == *exclude) continue;
    const Eigen::VectorXd v = db.vectors.row(static_cast<Eigen::Index>(i)).transpose().template cast<double>();
    double key;
    if (metric == Metric::L2) {
      key = (v - qd).squaredNorm();
    } else {
      const double denom = qn * v.norm();
      key = -(denom == 0.0 ? 0.0 : qd.dot(v) / denom);
    }
    keyed.emplace_back(key, db.ids[i]);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<Id> out;
  out.reserve(keyed.size());
  for (const auto& k : keyed) out.push_back(k.second);
  return out;
}

/// Non-interpolated AP: mean over relevant ids of the precision at each hit;
/// relevant ids never retrieved contribute zero.
double average_precision(std::span<const Id> ranking, std::span<const Id> relevant);

/// Relevant ids among the first four ranks.
int recall_at_4(std::span<const Id> ranking, std::span<const Id> relevant);

struct RetrievalScores {
  double mean_ap = 0.0;
  double mean_recall_at_4 = 0.0;
};

template <typename Scalar>
RetrievalScores evaluate(const RetrievalRun<Scalar>& run) {
  if (run.queries.empty()) throw ArgumentError("retrieval run has no queries");
  RetrievalScores s;
  for (const auto& q : run.queries) {
    if (q.relevant.empty()) throw ArgumentError("query " + std::to_string(q.id) + " has no relevant items");
    const auto ranking = rank_database(q.descriptor, run.database, run.metric, q.id);
    s.mean_ap += average_precision(ranking, q.relevant);
    s.mean_recall_at_4 += recall_at_4(ranking, q.relevant);
  }
  s.mean_ap /= static_cast<double>(run.queries.size());
  s.mean_recall_at_4 /= static_cast<double>(run.queries.size());
  return s;
}

template <typename Scalar>
double mean_average_precision(const RetrievalRun<Scalar>& run) {
  return evaluate(run).mean_ap;
}

/// Text formats. Descriptors: one `id v1 v2 ... vd` line per item.
/// Relevance: one `query_id: id id ...` line per query. `#` starts a
/// comment in both.
Database<double> parse_descriptors(std::string_view text);
std::string format_descriptors(const Database<double>& db);

struct Relevance {
  Id query = 0;
  std::vector<Id> relevant;
};
std::vector<Relevance> parse_relevance(std::string_view text);

/// Queries take their descriptors from `db` by id.
RetrievalRun<double> make_run(const Database<double>& db, std::span<const Relevance> relevance, Metric metric);

}  // namespace nncomp
