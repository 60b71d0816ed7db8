#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "nncomp/retrieval.hpp"
#include "oracles.hpp"

using namespace nncomp;

namespace {

Database<double> random_db(Rng& rng, std::size_t n, int dim) {
  Database<double> db;
  db.vectors.resize(static_cast<Eigen::Index>(n), dim);
  for (std::size_t i = 0; i < n; ++i) db.ids.push_back(static_cast<Id>(3 * i + rng.below(3)));
  for (Eigen::Index i = 0; i < db.vectors.size(); ++i) db.vectors.data()[i] = rng.uniform(-1, 1);
  return db;
}

// Exhaustive sort with explicitly looped keys.
std::vector<Id> oracle_rank(const Eigen::VectorXd& q, const Database<double>& db, Metric m) {
  std::vector<std::size_t> order(db.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    double dot = 0.0, nq = 0.0, nv = 0.0, l2 = 0.0;
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      const double v = db.vectors(static_cast<Eigen::Index>(i), j);
      dot += v * q[j];
      nq += q[j] * q[j];
      nv += v * v;
      l2 += (v - q[j]) * (v - q[j]);
    }
    return m == Metric::L2 ? l2 : -dot / (std::sqrt(nq) * std::sqrt(nv));
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ka = key(a), kb = key(b);
    return ka != kb ? ka < kb : db.ids[a] < db.ids[b];
  });
  std::vector<Id> out;
  for (auto i : order) out.push_back(db.ids[i]);
  return out;
}

}  // namespace

TEST_CASE("ranking basics") {
  Database<double> db;
  db.ids = {7};
  db.vectors = Eigen::MatrixXd::Ones(1, 3);
  CHECK(rank_database(Eigen::Vector3d(0, 0, 0), db, Metric::L2) == std::vector<Id>{7});

  Rng rng(1);
  auto big = random_db(rng, 20, 4);
  const Eigen::VectorXd q = big.vectors.row(13).transpose();
  CHECK(rank_database(q, big, Metric::L2).front() == big.ids[13]);
  CHECK_THROWS_AS(rank_database(Eigen::Vector2d(0, 0), big, Metric::L2), ShapeError);
  CHECK_THROWS_AS(rank_database(q, Database<double>{}, Metric::L2), ArgumentError);
}

TEST_CASE("ties are broken by ascending id") {
  Database<double> db;
  db.ids = {9, 4, 6};
  db.vectors = Eigen::MatrixXd::Ones(3, 2);
  CHECK(rank_database(Eigen::Vector2d(0, 0), db, Metric::L2) == std::vector<Id>{4, 6, 9});
  CHECK(rank_database(Eigen::Vector2d(1, 1), db, Metric::Cosine) == std::vector<Id>{4, 6, 9});
}

TEST_CASE("ranking matches the exhaustive sort oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto db = random_db(rng, 10, 1 + static_cast<int>(rng.below(8)));
    Eigen::VectorXd q(db.dim());
    for (auto& v : q) v = rng.uniform(-1, 1);
    for (auto m : {Metric::L2, Metric::Cosine}) CHECK_MESSAGE(rank_database(q, db, m) == oracle_rank(q, db, m), "dim " << db.dim() << " metric " << int(m));
  }
}

TEST_CASE("average precision") {
  const std::vector<Id> r{1, 2, 3, 4, 5};
  CHECK(average_precision(r, std::vector<Id>{1, 2}) == 1.0);
  CHECK(average_precision(std::vector<Id>{8, 9}, std::vector<Id>{9}) == 0.5);
  CHECK(average_precision(r, std::vector<Id>{1, 3, 5}) == (1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0);
  CHECK(average_precision(r, std::vector<Id>{1, 3, 5}) == doctest::Approx(0.7555555555555555).epsilon(1e-15));
  CHECK(average_precision(r, std::vector<Id>{42}) == 0.0);
  CHECK_THROWS_AS(average_precision(r, std::vector<Id>{}), ArgumentError);
}

TEST_CASE("recall at 4") {
  const std::vector<Id> r{1, 2, 3, 4, 5, 6, 7, 8};
  CHECK(recall_at_4(r, std::vector<Id>{1, 2, 3, 4}) == 4);
  CHECK(recall_at_4(r, std::vector<Id>{5, 6}) == 0);
  CHECK(recall_at_4(r, std::vector<Id>{2, 4, 7}) == 2);
  CHECK(recall_at_4(std::vector<Id>{1, 2}, std::vector<Id>{2, 9}) == 1);
}

TEST_CASE("metrics match the counting oracle on random rankings") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = static_cast<std::size_t>(1 + rng.below(40));
    std::vector<Id> ranking(n);
    std::iota(ranking.begin(), ranking.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(ranking[i], ranking[rng.below(i + 1)]);
    std::vector<Id> rel;
    for (Id i = 0; i < static_cast<Id>(n) + 3; ++i)
      if (rng.below(3) == 0) rel.push_back(i);
    if (rel.empty()) rel.push_back(0);
    CHECK(std::abs(average_precision(ranking, rel) - oracle::average_precision(ranking, rel)) <= 1e-12);
    int hits = 0;
    for (std::size_t i = 0; i < std::min<std::size_t>(4, n); ++i)
      hits += std::count(rel.begin(), rel.end(), ranking[i]) > 0;
    CHECK(recall_at_4(ranking, rel) == hits);
    CHECK(recall_at_4(ranking, rel) <= std::min<int>(4, static_cast<int>(rel.size())));
  }
}

TEST_CASE("AP ignores the order of irrelevant items after the last hit") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Id> r(12);
    std::iota(r.begin(), r.end(), 0);
    const std::vector<Id> rel{static_cast<Id>(rng.below(6)), static_cast<Id>(6 + rng.below(3))};
    auto last = std::max(std::find(r.begin(), r.end(), rel[0]), std::find(r.begin(), r.end(), rel[1]));
    auto s = r;
    std::reverse(s.begin() + (last - r.begin()) + 1, s.end());
    CHECK(average_precision(r, rel) == average_precision(s, rel));
  }
}

TEST_CASE("AP depends on ranking only") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto db = random_db(rng, 15, 3);
    Eigen::VectorXd q(3);
    for (auto& v : q) v = rng.uniform(-1, 1);
    const std::vector<Id> rel{db.ids[rng.below(15)], db.ids[rng.below(15)]};
    const auto before = average_precision(rank_database(q, db, Metric::L2), rel);
    // Scaling and translating the space scales every distance alike.
    db.vectors = (db.vectors * 3.0).rowwise() + Eigen::RowVector3d(1, -2, 0.5);
    const Eigen::VectorXd q2 = q * 3.0 + Eigen::Vector3d(1, -2, 0.5);
    CHECK(average_precision(rank_database(q2, db, Metric::L2), rel) == before);
  }
}

TEST_CASE("mean average precision") {
  Rng rng(6);
  SUBCASE("single query equals its AP, two queries average") {
    auto db = random_db(rng, 8, 3);
    RetrievalRun<double> run;
    run.database = db;
    run.queries.push_back({1000, db.vectors.row(2).transpose(), {db.ids[2]}});
    CHECK(mean_average_precision(run) == 1.0);
    Eigen::VectorXd far(3);
    far << 100, 100, 100;
    // The item farthest from `far` is ranked last of 8.
    const auto ranking = rank_database(far, db, Metric::L2);
    run.queries.push_back({1001, far, {ranking.back()}});
    CHECK(mean_average_precision(run) == doctest::Approx((1.0 + 1.0 / 8.0) / 2.0));
  }
  SUBCASE("exact matches give mAP 1") {
    auto db = random_db(rng, 30, 5);
    RetrievalRun<double> run;
    run.database = db;
    for (std::size_t i = 0; i < 30; i += 3) run.queries.push_back({-1 - static_cast<Id>(i), db.vectors.row(static_cast<Eigen::Index>(i)).transpose(), {db.ids[i]}});
    CHECK(mean_average_precision(run) == 1.0);
  }
  SUBCASE("random runs match the brute-force reference") {
    for (int trial = 0; trial < 50; ++trial) {
      auto db = random_db(rng, 25, 4);
      RetrievalRun<double> run;
      run.database = db;
      run.metric = rng.below(2) ? Metric::Cosine : Metric::L2;
      double ref = 0.0, ref_r4 = 0.0;
      for (int qn = 0; qn < 5; ++qn) {
        const auto qi = rng.below(25);
        Query<double> q{db.ids[qi], db.vectors.row(static_cast<Eigen::Index>(qi)).transpose(), {}};
        for (std::size_t j = 0; j < 25; ++j)
          if (j != qi && rng.below(4) == 0) q.relevant.push_back(db.ids[j]);
        if (q.relevant.empty()) q.relevant.push_back(db.ids[(qi + 1) % 25]);
        auto ranking = oracle_rank(q.descriptor, db, run.metric);
        ranking.erase(std::find(ranking.begin(), ranking.end(), q.id));
        ref += oracle::average_precision(ranking, q.relevant);
        for (std::size_t i = 0; i < 4; ++i) ref_r4 += std::count(q.relevant.begin(), q.relevant.end(), ranking[i]) > 0;
        run.queries.push_back(q);
      }
      const auto s = evaluate(run);
      CHECK(std::abs(s.mean_ap - ref / 5.0) <= 1e-12);
      CHECK(std::abs(s.mean_recall_at_4 - ref_r4 / 5.0) <= 1e-12);
    }
  }
}

TEST_CASE("text formats") {
  const auto db = parse_descriptors("# header\n3 0.5 1\n1 -2 4e-1  # trailing\n\n");
  CHECK(db.ids == std::vector<Id>{3, 1});
  CHECK(db.vectors(1, 1) == 0.4);
  CHECK(parse_descriptors(format_descriptors(db)).vectors == db.vectors);
  const auto rel = parse_relevance("3: 1\n1: 3 3\n");
  REQUIRE(rel.size() == 2);
  CHECK(rel[1].relevant == std::vector<Id>{3, 3});
  const auto run = make_run(db, rel, Metric::L2);
  CHECK(evaluate(run).mean_ap == 1.0);
  CHECK_THROWS_AS(parse_descriptors("1 0 0\n2 0\n"), ShapeError);
  CHECK_THROWS_AS(parse_descriptors("1 0\n1 1\n"), ArgumentError);
  CHECK_THROWS_AS(parse_descriptors("x 0\n"), ArgumentError);
  CHECK_THROWS_AS(parse_relevance("3 1\n"), ArgumentError);
  CHECK_THROWS_AS(make_run(db, parse_relevance("5: 1\n"), Metric::L2), ArgumentError);
  CHECK_THROWS_AS(parse_metric("hamming"), ConfigError);
}
