#include "nncomp/retrieval.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace nncomp {

Metric parse_metric(std::string_view text) {
  if (text == "l2") return Metric::L2;
  if (text == "cosine") return Metric::Cosine;
  throw ConfigError("metric must be 'l2' or 'cosine', got '" + std::string(text) + "'");
}

double average_precision(std::span<const Id> ranking, std::span<const Id> relevant) {
  if (relevant.empty()) throw ArgumentError("average precision needs a nonempty relevant set");
  const std::set<Id> rel(relevant.begin(), relevant.end());
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (!rel.count(ranking[i])) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(rel.size());
}

int recall_at_4(std::span<const Id> ranking, std::span<const Id> relevant) {
  const std::set<Id> rel(relevant.begin(), relevant.end());
  int n = 0;
  for (std::size_t i = 0; i < ranking.size() && i < 4; ++i) n += rel.count(ranking[i]) ? 1 : 0;
  return n;
}

namespace {

std::vector<std::string> content_lines(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(line);
  }
  return out;
}

Id parse_id(const std::string& tok, std::size_t line) {
  Id v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ArgumentError("line " + std::to_string(line) + ": bad id '" + tok + "'");
  return v;
}

}  // namespace

Database<double> parse_descriptors(std::string_view text) {
  std::vector<Id> ids;
  std::vector<std::vector<double>> rows;
  std::set<Id> seen;
  std::size_t n = 0;
  for (const auto& line : content_lines(text)) {
    ++n;
    std::istringstream in(line);
    std::string tok;
    in >> tok;
    const Id id = parse_id(tok, n);
    if (!seen.insert(id).second) throw ArgumentError("descriptor " + std::to_string(n) + ": duplicate id " + tok);
    std::vector<double> v;
    while (in >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ArgumentError("descriptor " + std::to_string(n) + ": bad value '" + tok + "'");
      }
    }
    if (v.empty()) throw ArgumentError("descriptor " + std::to_string(n) + ": no values");
    if (!rows.empty() && v.size() != rows.front().size())
      throw ShapeError("descriptor " + std::to_string(n) + ": dimension " + std::to_string(v.size()) +
                       " differs from " + std::to_string(rows.front().size()));
    ids.push_back(id);
    rows.push_back(std::move(v));
  }
  Database<double> db;
  db.ids = std::move(ids);
  db.vectors.resize(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      db.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return db;
}

std::string format_descriptors(const Database<double>& db) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < db.size(); ++i) {
    out += std::to_string(db.ids[i]);
    for (Eigen::Index j = 0; j < db.dim(); ++j) {
      std::snprintf(buf, sizeof buf, " %.17g", db.vectors(static_cast<Eigen::Index>(i), j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<Relevance> parse_relevance(std::string_view text) {
  std::vector<Relevance> out;
  std::size_t n = 0;
  for (const auto& line : content_lines(text)) {
    ++n;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ArgumentError("relevance line " + std::to_string(n) + ": expected 'query: ids'");
    Relevance r;
    std::istringstream head(line.substr(0, colon));
    std::string tok;
    head >> tok;
    r.query = parse_id(tok, n);
    std::istringstream rest(line.substr(colon + 1));
    while (rest >> tok) r.relevant.push_back(parse_id(tok, n));
    if (r.relevant.empty()) throw ArgumentError("relevance line " + std::to_string(n) + ": no relevant ids");
    out.push_back(std::move(r));
  }
  return out;
}

RetrievalRun<double> make_run(const Database<double>& db, std::span<const Relevance> relevance, Metric metric) {
  std::map<Id, Eigen::Index> row;
  for (std::size_t i = 0; i < db.size(); ++i) row[db.ids[i]] = static_cast<Eigen::Index>(i);
  RetrievalRun<double> run;
  run.database = db;
  run.metric = metric;
  for (const auto& r : relevance) {
    auto it = row.find(r.query);
    if (it == row.end()) throw ArgumentError("query id " + std::to_string(r.query) + " has no descriptor");
    for (Id id : r.relevant)
      if (!row.count(id))
        throw ArgumentError("query " + std::to_string(r.query) + " lists unknown id " + std::to_string(id));
    run.queries.push_back({r.query, db.vectors.row(it->second).transpose(), r.relevant});
  }
  return run;
}

}  // namespace nncomp
