#include "propd/query.hpp"

#include "propd/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

namespace propd {

std::string to_string(QueryStatus s) {
  switch (s) {
    case QueryStatus::ok:
      return "ok";
    case QueryStatus::fallback:
      return "fallback";
    case QueryStatus::not_penetrating:
      return "not_penetrating";
  }
  return "unknown";
}

PdQuery::PdQuery(const TriMesh& A, const TriMesh& B, const SampleDB& db)
    : A_(A), B_(B), db_(db), props_(mass_properties(A)), tol_(Tolerances::for_mesh(B)) {
  if (db.meta().mesh_hash_a != A.hash() || db.meta().mesh_hash_b != B.hash()) {
    throw DataMismatchError("sample database was built for different meshes");
  }
  if (metric() == MetricKind::object_norm) {
    factor_ = object_norm_factor(props_);
    for (std::size_t i = 0; i < db.size(); ++i) {
      exact_index_.insert(object_norm_point(db.samples()[i].q, factor_), static_cast<int>(i));
    }
  }
}

PDResult PdQuery::query(const Configuration& q0, std::size_t k) const {
  PDResult res;
  res.metric = metric();
  if (q0.mode != db_.meta().mode) throw PreconditionError("query mode differs from the database mode");
  if (!is_collision(A_, q0, B_)) {
    res.status = QueryStatus::not_penetrating;
    res.witness = q0;
    return res;
  }
  if (db_.empty()) throw PreconditionError("empty sample database");

  struct Candidate {
    double d;
    int id;
  };
  std::vector<Candidate> near;
  const std::size_t kk = std::max<std::size_t>(k, 1);
  const auto neighbors = metric() == MetricKind::object_norm
                             ? exact_index_.knn(object_norm_point(q0, factor_), kk)
                             : db_.nearest(q0, kk);
  for (const auto& n : neighbors) {
    near.push_back({distance(q0, db_.samples()[n.id].q), n.id});
  }
  std::stable_sort(near.begin(), near.end(),
                   [](const Candidate& a, const Candidate& b) { return a.d < b.d; });
  res.candidates_examined = near.size();
  res.raw_nearest = near.front().d;

  // Sample pairs whose B vertices lie on a common triangle, best first.
  struct Pair {
    double score;
    int i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < near.size(); ++i) {
    const auto& si = db_.samples()[near[i].id];
    for (std::size_t j = i + 1; j < near.size(); ++j) {
      const auto& sj = db_.samples()[near[j].id];
      if (si.vertex_b != sj.vertex_b && !B_.adjacent(si.vertex_b, sj.vertex_b)) continue;
      if (db_.embedding(si.q) == db_.embedding(sj.q)) continue;  // zero-length segment
      pairs.push_back({near[i].d + near[j].d, static_cast<int>(i), static_cast<int>(j)});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.score < b.score; });
  if (pairs.size() > static_cast<std::size_t>(kPairs)) pairs.resize(kPairs);

  const Embedding e0 = db_.embedding(q0);
  std::vector<std::pair<double, Configuration>> projected;
  for (const auto& p : pairs) {
    const auto& qa = db_.samples()[near[p.i].id].q;
    const auto& qb = db_.samples()[near[p.j].id].q;
    const Embedding ea = db_.embedding(qa), eb = db_.embedding(qb);
    const Embedding seg = eb - ea;
    const double rho = std::clamp((e0 - ea).dot(seg) / seg.squaredNorm(), 0.0, 1.0);
    const Configuration q2 = interpolate(qa, qb, rho);

    // Walk from q2 directly away from q0 until collision-free.
    const Embedding e2 = db_.embedding(q2);
    const Embedding away = e2 - e0;
    if (away.norm() == 0.0) continue;
    const Embedding step = (tol_.contact / away.norm()) * away;
    for (int s = 0; s <= kMarchCap; ++s) {
      const Configuration qc =
          s == 0 ? q2 : unembed(e2 + static_cast<double>(s) * step, db_.meta().sigma, q0.mode);
      if (!is_collision(A_, qc, B_)) {
        projected.emplace_back(distance(q0, qc), qc);
        break;
      }
    }
  }

  // Minimum-distance certified candidate among raw neighbors and projections.
  struct Choice {
    double d;
    Configuration q;
    bool projection;
  };
  std::vector<Choice> choices;
  for (const auto& c : near) choices.push_back({c.d, db_.samples()[c.id].q, false});
  for (const auto& [d, q] : projected) choices.push_back({d, q, true});
  std::stable_sort(choices.begin(), choices.end(),
                   [](const Choice& a, const Choice& b) { return a.d < b.d; });
  for (const auto& c : choices) {
    if (c.projection || !is_collision(A_, c.q, B_)) {
      res.witness = c.q;
      res.value = c.d;
      res.refined = c.projection && c.d < res.raw_nearest;
      res.status = pairs.empty() ? QueryStatus::fallback : QueryStatus::ok;
      return res;
    }
  }
  throw Error("no collision-free candidate among the nearest samples");
}

std::vector<PdQuery::Timed> PdQuery::batch(const std::vector<Configuration>& queries,
                                           std::size_t k, int threads) const {
  std::vector<Timed> out(queries.size());
  auto run = [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    try {
      out[i].result = query(queries[i], k);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
    out[i].micros =
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) run(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < queries.size(); i = next++) run(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace propd
