#include "propd/error.hpp"
#include "propd/oracle.hpp"
#include "propd/query.hpp"
#include "propd/sampler.hpp"
#include "propd/shapes.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace propd;

namespace {

BuildParams params_for(Mode mode, std::size_t budget, std::uint64_t seed = 17) {
  BuildParams p;
  p.mode = mode;
  p.metric = mode == Mode::translational ? MetricKind::euclidean_translation : MetricKind::object_norm;
  p.budget = budget;
  p.rng_seed = seed;
  return p;
}

struct CubeFixture {
  TriMesh cube = shapes::cube();
  SampleDB db = build_contact_db(cube, cube, params_for(Mode::translational, 20000)).db;
};

const CubeFixture& cube_fixture() {
  static const CubeFixture f;
  return f;
}

}  // namespace

TEST_CASE("axis-aligned cube overlap") {
  const auto& f = cube_fixture();
  const PdQuery pdq(f.cube, f.cube, f.db);
  const auto q0 = Configuration::translation_only(Vec3(0.4, 0, 0));
  const auto r = pdq.query(q0);
  CHECK(r.status == QueryStatus::ok);
  CHECK(std::abs(r.value - 0.6) / 0.6 < 0.05);
  CHECK_FALSE(is_collision(f.cube, r.witness, f.cube));
  CHECK(r.value == pdq.distance(q0, r.witness));
  CHECK(r.candidates_examined == PdQuery::kDefaultK);
}

TEST_CASE("free queries and database samples are not penetrating") {
  const auto& f = cube_fixture();
  const PdQuery pdq(f.cube, f.cube, f.db);
  const auto far = pdq.query(Configuration::translation_only(Vec3(3, 0, 0)));
  CHECK(far.status == QueryStatus::not_penetrating);
  CHECK(far.value == 0.0);
  const auto on = pdq.query(f.db.samples()[0].q);
  CHECK(on.status == QueryStatus::not_penetrating);
  CHECK(on.value == 0.0);
}

TEST_CASE("query preconditions") {
  const auto& f = cube_fixture();
  CHECK_THROWS_AS(PdQuery(f.cube, shapes::icosphere(), f.db), DataMismatchError);
  const PdQuery pdq(f.cube, f.cube, f.db);
  const auto rotated = Configuration::make(Vec3(0.2, 0, 0), Quat::Identity(), Mode::generalized);
  CHECK_THROWS_AS(pdq.query(rotated), PreconditionError);
}

TEST_CASE("batch queries") {
  const auto& f = cube_fixture();
  const PdQuery pdq(f.cube, f.cube, f.db);
  CHECK(pdq.batch({}).empty());
  Rng rng(71);
  auto queries = random_in_collision(f.cube, f.cube, Mode::translational, 1000, rng,
                                     SeedBounds::around(f.cube, f.cube));
  queries.push_back(Configuration::translation_only(Vec3(0, 0, 5)));
  const auto out = pdq.batch(queries, PdQuery::kDefaultK, 2);
  REQUIRE(out.size() == queries.size());
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    CHECK(out[i].error.empty());
    CHECK_FALSE(is_collision(f.cube, out[i].result.witness, f.cube));
    CHECK(out[i].result.status != QueryStatus::not_penetrating);
    if (out[i].result.refined) CHECK(out[i].result.value <= out[i].result.raw_nearest);
  }
  CHECK(out.back().result.status == QueryStatus::not_penetrating);
  const auto single = pdq.query(queries[17]);
  CHECK(single.value == out[17].result.value);
}

TEST_CASE("query values are upper bounds of the directional oracle") {
  const auto& f = cube_fixture();
  const PdQuery pdq(f.cube, f.cube, f.db);
  Rng rng(72);
  const auto queries = random_in_collision(f.cube, f.cube, Mode::translational, 30, rng,
                                           SeedBounds::around(f.cube, f.cube));
  for (const auto& q : queries) {
    const auto r = pdq.query(q);
    const auto o = translational_pd_oracle(f.cube, q, f.cube, 500);
    // The oracle's own error is at most its bisection tolerance plus the
    // angular gap of the direction set.
    const double slack = 1e-4 + o.value * (1.0 - std::cos(o.angular_spacing));
    CHECK(o.value * std::cos(o.angular_spacing) <= r.value + slack);
  }
}

TEST_CASE("icosphere pair") {
  const auto sphere = shapes::icosphere(1.0, 2);
  const auto db = build_contact_db(sphere, sphere, params_for(Mode::translational, 10000)).db;
  const PdQuery pdq(sphere, sphere, db);
  double faceting = 0.0;
  for (std::size_t t = 0; t < sphere.triangle_count(); ++t) {
    const auto T = sphere.triangle_points(static_cast<int>(t));
    faceting = std::max(faceting, 1.0 - std::abs(sphere.triangle_normal(static_cast<int>(t)).dot(T[0])));
  }
  const auto r = pdq.query(Configuration::translation_only(Vec3(1.2, 0, 0)));
  CHECK(std::abs(r.value - 0.8) <= 0.05 * 0.8 + 2.0 * faceting);
}

TEST_CASE("nested databases: raw nearest distance is non-increasing") {
  const auto& f = cube_fixture();
  Rng rng(73);
  const auto queries = random_in_collision(f.cube, f.cube, Mode::translational, 50, rng,
                                           SeedBounds::around(f.cube, f.cube));
  std::vector<double> previous(queries.size(), 1e300);
  for (std::size_t n : {100u, 1000u, 5000u, 20000u}) {
    const auto db = f.db.prefix(n);
    const PdQuery pdq(f.cube, f.cube, db);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto r = pdq.query(queries[i]);
      CHECK(r.raw_nearest <= previous[i] + 1e-9);
      previous[i] = r.raw_nearest;
    }
  }
}

TEST_CASE("index candidates contain the exact-metric nearest sample") {
  const auto torus = shapes::torus();
  const auto A = testsupport::turned_torus(torus);
  for (Mode mode : {Mode::translational, Mode::generalized}) {
    const auto db = build_contact_db(A, torus, params_for(mode, 5000)).db;
    const PdQuery pdq(A, torus, db);
    Rng rng(74);
    const auto queries = random_in_collision(A, torus, mode, 100, rng, SeedBounds::around(A, torus));
    for (const auto& q : queries) {
      double best = 1e300;
      for (const auto& s : db.samples()) best = std::min(best, pdq.distance(q, s.q));
      const auto r = pdq.query(q, 8);
      CHECK(r.raw_nearest == best);
    }
  }
}

TEST_CASE("generalized mode on a rotated cube overlap") {
  const auto cube = shapes::cube();
  const auto db = build_contact_db(cube, cube, params_for(Mode::generalized, 100000)).db;
  const PdQuery pdq(cube, cube, db);
  const Quat rot(Eigen::AngleAxisd(std::numbers::pi / 6, Vec3::UnitZ()));
  const auto q0 = Configuration::make(Vec3(0.4, 0.1, 0), rot, Mode::generalized);
  const auto r = pdq.query(q0);
  CHECK(r.status != QueryStatus::not_penetrating);
  CHECK(r.value >= 0.0);
  CHECK_FALSE(is_collision(cube, r.witness, cube));

  // Translating out without turning is one admissible escape.
  double translational = 1e300;
  for (const auto& u : fibonacci_directions(400)) {
    double h = 0.01;
    for (;; h += 0.01) {
      auto q = q0;
      q.translation += h * u;
      if (!is_collision(cube, q, cube)) break;
    }
    translational = std::min(translational, h);
  }
  CHECK(r.value <= translational * 1.1);

  // Two independent upper bounds: they agree within 10%, and the query never
  // undercuts the oracle by more than the certificate slack.
  Rng rng(75);
  const auto o = generalized_pd_oracle(cube, q0, cube, 100000, rng, mass_properties(cube));
  CHECK(std::abs(r.value - o.value) <= 0.1 * std::max(r.value, o.value));
  CHECK(o.value <= r.value + 2.0 * Tolerances::for_mesh(cube).contact);
}
