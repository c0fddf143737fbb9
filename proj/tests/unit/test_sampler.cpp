#include "propd/error.hpp"
#include "propd/sampler.hpp"
#include "propd/shapes.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <set>
#include <sstream>

using namespace propd;

namespace {

BuildParams params_for(Mode mode, std::size_t budget, std::uint64_t seed = 9) {
  BuildParams p;
  p.mode = mode;
  p.metric = mode == Mode::translational ? MetricKind::euclidean_translation : MetricKind::object_norm;
  p.budget = budget;
  p.rng_seed = seed;
  return p;
}

SurfacePoint apex_of(const TriMesh& tet) {
  for (std::size_t t = 0; t < tet.triangle_count(); ++t) {
    for (int k = 0; k < 3; ++k) {
      if (tet.vertex(tet.triangle(static_cast<int>(t))[k]).norm() < 1e-15) {
        SurfacePoint sp;
        sp.triangle = static_cast<int>(t);
        sp.bary[k] = 1.0;
        return sp;
      }
    }
  }
  FAIL("tetrahedron apex not found");
  return {};
}

int vertex_at(const TriMesh& m, const Vec3& p) {
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    if ((m.vertex(static_cast<int>(v)) - p).norm() < 1e-9) return static_cast<int>(v);
  }
  FAIL("vertex not found");
  return -1;
}

// Tetrahedron apex resting on a grid vertex.
ContactSample apex_sample(const SamplerContext& ctx, int v) {
  ContactSample s;
  s.anchor = apex_of(ctx.A);
  s.vertex_b = v;
  s.q = Configuration::translation_only(ctx.B.vertex(v));
  s.q.mode = ctx.mode;
  record_orientation(ctx, s);
  return s;
}

std::set<int> flood_fill(const TriMesh& m, int start) {
  std::set<int> seen{start};
  std::vector<int> stack{start};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : m.neighbors(v)) {
      if (seen.insert(u).second) stack.push_back(u);
    }
  }
  return seen;
}

}  // namespace

TEST_CASE("contact frames are right-handed and aligned with the vertex normal") {
  for (const auto& m : {shapes::torus(), shapes::cube(), shapes::icosphere(1.0, 2)}) {
    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
      const Mat3 F = contact_frame(m, static_cast<int>(v));
      CHECK((F.transpose() * F - Mat3::Identity()).norm() < 1e-12);
      CHECK(F.determinant() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK((F.col(2) - m.vertex_normal(static_cast<int>(v))).norm() < 1e-15);
    }
  }
}

TEST_CASE("random contact seeds on cubes and spheres") {
  const auto cube = shapes::cube();
  SamplerContext ctx{cube, cube, Mode::translational, Tolerances::for_mesh(cube), {}};
  Rng rng(61);
  SampleDB empty;
  const auto bounds = SeedBounds::around(cube, cube);
  for (int i = 0; i < 20; ++i) {
    const auto s = random_contact_seed(ctx, rng, bounds, empty);
    REQUIRE(s.has_value());
    CHECK_FALSE(is_collision(cube, s->q, cube));
    CHECK(min_distance(cube, s->q, cube).distance <= ctx.tol.contact);
    const double axis = s->q.translation.cwiseAbs().maxCoeff();
    CHECK(axis >= 1.0);
    CHECK(axis <= 1.0 + ctx.tol.contact);
  }

  const auto sphere = shapes::icosphere(1.0, 3);
  double faceting = 0.0;
  for (std::size_t t = 0; t < sphere.triangle_count(); ++t) {
    const auto T = sphere.triangle_points(static_cast<int>(t));
    faceting = std::max(faceting, 1.0 - std::abs(sphere.triangle_normal(static_cast<int>(t)).dot(T[0])));
  }
  SamplerContext sctx{sphere, sphere, Mode::translational, Tolerances::for_mesh(sphere), {}};
  const auto sb = SeedBounds::around(sphere, sphere);
  for (int i = 0; i < 20; ++i) {
    const auto s = random_contact_seed(sctx, rng, sb, empty);
    REQUIRE(s.has_value());
    const double d = s->q.translation.norm();
    CHECK(d <= 2.0 + sctx.tol.contact);
    CHECK(d >= 2.0 - 2.0 * faceting);
  }

  SeedBounds zero;
  CHECK_THROWS_AS(random_contact_seed(ctx, rng, zero, empty), PreconditionError);
}

TEST_CASE("translational slide on the flat grid is an in-plane translation") {
  const auto grid = shapes::grid(10, 0.1);
  const auto tet = shapes::tetrahedron();
  SamplerContext ctx{tet, grid, Mode::translational, Tolerances::for_mesh(grid), {}};
  const int v = vertex_at(grid, Vec3(0, 0, 0));
  const auto s = apex_sample(ctx, v);
  for (int w : grid.neighbors(v)) {
    const auto q = slide_transition(ctx, s, w);
    const Vec3 step = q.translation - s.q.translation;
    CHECK((step - (grid.vertex(w) - grid.vertex(v))).norm() < 1e-15);
    CHECK(std::abs(step.z()) == 0.0);
    CHECK(step.norm() >= 0.1 - 1e-12);
    CHECK(q.rotation.isApprox(Quat::Identity()));
  }

  SamplerContext gctx{tet, grid, Mode::generalized, Tolerances::for_mesh(grid), {}};
  auto gs = apex_sample(gctx, v);
  gs.q = Configuration::make(gs.q.translation, Quat::Identity(), Mode::generalized);
  record_orientation(gctx, gs);
  const int interior = vertex_at(grid, Vec3(0.1, 0.0, 0.0));
  const auto gq = slide_transition(gctx, gs, interior);
  CHECK(gq.rotation.angularDistance(Quat::Identity()) < 1e-12);
  CHECK((gq.translation - grid.vertex(interior)).norm() < 1e-12);
}

TEST_CASE("generalized slide around a faceted cylinder turns by the facet angle") {
  const int segments = 16;
  const auto cyl = shapes::open_cylinder(1.0, 1.0, segments, 4);
  const auto tet = shapes::tetrahedron();
  SamplerContext ctx{tet, cyl, Mode::generalized, Tolerances::for_mesh(cyl), {}};
  const int v = vertex_at(cyl, Vec3(1, 0, 0));
  const double facet = 2.0 * std::numbers::pi / segments;
  const int w = vertex_at(cyl, Vec3(std::cos(facet), std::sin(facet), 0));
  ContactSample s;
  s.anchor = apex_of(tet);
  s.vertex_b = v;
  s.q = Configuration::make(cyl.vertex(v), canonical(Quat(0.3, 0.5, -0.2, 0.7)), Mode::generalized);
  record_orientation(ctx, s);
  const auto q0 = slide_transition(ctx, s, v);
  CHECK(q0.rotation.angularDistance(s.q.rotation) < 1e-12);
  const auto q1 = slide_transition(ctx, s, w);
  const Quat turn = q1.rotation * q0.rotation.conjugate();
  CHECK(std::abs(rotation_angle(turn) - facet) < 1e-12);
  CHECK((rotation_vector(turn).normalized() - Vec3::UnitZ()).norm() < 1e-9);
  CHECK((apply(q1, tet.point(s.anchor)) - cyl.vertex(w)).norm() < 1e-12);
}

TEST_CASE("propagation floods the flat grid") {
  const auto grid = shapes::grid(10, 0.1);
  const auto tet = shapes::tetrahedron();
  SamplerContext ctx{tet, grid, Mode::translational, Tolerances::for_mesh(grid), {}};
  DbMeta meta;
  meta.r = 2e-3 * grid.diagonal();
  meta.sigma = rotation_scale(mass_properties(tet));
  SampleDB db(meta);
  const int centre = vertex_at(grid, Vec3(0, 0, 0));
  const auto seed = apex_sample(ctx, centre);
  db.insert(seed);
  PropagationStats stats;
  const auto added = propagate(ctx, seed, db, 100000, &stats);
  std::set<int> visited{centre};
  for (const auto& s : added) visited.insert(s.vertex_b);
  CHECK(added.size() + 1 == 121);
  CHECK(visited == flood_fill(grid, centre));
  CHECK(stats.ccd.calls == 0);
}

TEST_CASE("propagation stops when every slide is already covered") {
  const auto grid = shapes::grid(10, 0.1);
  const auto tet = shapes::tetrahedron();
  SamplerContext ctx{tet, grid, Mode::translational, Tolerances::for_mesh(grid), {}};
  DbMeta meta;
  meta.r = 2e-3 * grid.diagonal();
  SampleDB db(meta);
  const int centre = vertex_at(grid, Vec3(0, 0, 0));
  const auto seed = apex_sample(ctx, centre);
  db.insert(seed);
  for (int w : grid.neighbors(centre)) db.insert(apex_sample(ctx, w));
  CHECK(propagate(ctx, seed, db, 100000).empty());
}

TEST_CASE("propagation crosses a concave corner through the internal case") {
  const auto stairs = shapes::staircase(4, 0.25, 0.25, 1.0);
  const auto small = shapes::cube(0.1);
  auto p = params_for(Mode::translational, 400);
  const auto res = build_contact_db(small, stairs, p);
  CHECK(res.stats.internal_cases > res.stats.critical_none);
  std::set<long> heights;
  for (const auto& s : res.db.samples()) heights.insert(std::lround(4.0 * stairs.vertex(s.vertex_b).z()));
  CHECK(heights.size() >= 3);
}

TEST_CASE("built databases are certified and deduplicated") {
  const auto cube = shapes::cube();
  for (Mode mode : {Mode::translational, Mode::generalized}) {
    const auto res = build_contact_db(cube, cube, params_for(mode, 1000));
    const auto& db = res.db;
    CHECK(db.size() <= 1000);
    CHECK(db.meta().seeds + db.meta().propagated == db.size());
    const auto tol = Tolerances::for_mesh(cube);
    for (const auto& s : db.samples()) CHECK(certify_contact(cube, s.q, cube, tol).ok());
    for (std::size_t i = 0; i < db.size(); ++i) {
      for (std::size_t j = i + 1; j < db.size(); ++j) {
        CHECK((db.embedding(db.samples()[i].q) - db.embedding(db.samples()[j].q)).norm() >= db.meta().r);
      }
    }
  }
}

TEST_CASE("budget of one keeps only the first seed") {
  const auto cube = shapes::cube();
  const auto res = build_contact_db(cube, cube, params_for(Mode::translational, 1));
  REQUIRE(res.db.size() == 1);
  CHECK(res.db.samples()[0].kind == SampleKind::seed);
  CHECK(res.stats.seeds == 1);
}

TEST_CASE("grid benchmark amortizes seeds") {
  const auto grid = shapes::grid(10, 0.1);
  const auto tet = shapes::tetrahedron();
  const auto res = build_contact_db(tet, grid, params_for(Mode::translational, 1210));
  CHECK(res.stats.propagated >= 0.9 * res.db.size());
  CHECK(res.stats.ccd.calls <= 1.05 * res.stats.seeds);
  CHECK(res.stats.seeds <= 0.1 * res.db.size());
}

TEST_CASE("single-threaded builds are byte-identical") {
  const auto cube = shapes::cube();
  std::ostringstream a, b;
  build_contact_db(cube, cube, params_for(Mode::generalized, 500, 42)).db.write(a);
  build_contact_db(cube, cube, params_for(Mode::generalized, 500, 42)).db.write(b);
  CHECK(a.str() == b.str());
  std::ostringstream c;
  build_contact_db(cube, cube, params_for(Mode::generalized, 500, 43)).db.write(c);
  CHECK(a.str() != c.str());
}

TEST_CASE("parallel builds keep the invariants") {
  const auto cube = shapes::cube();
  auto p = params_for(Mode::translational, 800);
  p.threads = 3;
  const auto res = build_contact_db(cube, cube, p);
  const auto& db = res.db;
  CHECK(db.size() <= 800);
  CHECK(db.size() >= 700);
  const auto tol = Tolerances::for_mesh(cube);
  for (std::size_t i = 0; i < db.size(); ++i) {
    CHECK(certify_contact(cube, db.samples()[i].q, cube, tol).ok());
    const auto nn = db.nearest(db.samples()[i].q, 2);
    CHECK(nn[1].distance >= db.meta().r);
  }
}

TEST_CASE("inverse slides return to the start") {
  const auto torus = shapes::torus();
  const auto A = testsupport::turned_torus(torus);
  const auto res = build_contact_db(A, torus, params_for(Mode::generalized, 300));
  SamplerContext ctx{A, torus, Mode::generalized, Tolerances::for_mesh(torus), {}};
  int tested = 0;
  for (const auto& s : res.db.samples()) {
    if ((apply(s.q, A.point(s.anchor)) - torus.vertex(s.vertex_b)).norm() > 1e-9) continue;
    for (int w : torus.neighbors(s.vertex_b)) {
      const auto q1 = slide_transition(ctx, s, w);
      if (is_collision(A, q1, torus)) continue;
      ContactSample moved = s;
      moved.q = q1;
      moved.vertex_b = w;
      const auto back = slide_transition(ctx, moved, s.vertex_b);
      CHECK((back.translation - s.q.translation).norm() <= 1e-6 * torus.diagonal());
      CHECK(back.rotation.angularDistance(s.q.rotation) <= 1e-6);
      ++tested;
    }
  }
  CHECK(tested > 100);
}

TEST_CASE("translational re-anchoring lands on a certified contact") {
  const auto torus = shapes::torus();
  const auto A = testsupport::turned_torus(torus);
  const auto res = build_contact_db(A, torus, params_for(Mode::translational, 2000));
  CHECK(res.stats.lifted > 0);
  CHECK(res.stats.seeds * 9 <= res.stats.propagated);
  const auto tol = Tolerances::for_mesh(torus);
  for (const auto& s : res.db.samples()) CHECK(certify_contact(A, s.q, torus, tol).ok());
}

TEST_CASE("certificate rejects perturbed samples") {
  const auto cube = shapes::cube();
  const auto tol = Tolerances::for_mesh(cube);
  CHECK(certify_contact(cube, Configuration::translation_only(Vec3(1, 0, 0)), cube, tol).ok());
  CHECK_FALSE(certify_contact(cube, Configuration::translation_only(Vec3(1 + 10 * tol.contact, 0, 0)), cube, tol).ok());
  CHECK_FALSE(certify_contact(cube, Configuration::translation_only(Vec3(0.9, 0, 0)), cube, tol).ok());
}

TEST_CASE("contacts under an open sheet push towards the sheet") {
  const auto grid = shapes::grid(10, 0.1);
  const auto tet = shapes::tetrahedron();
  const auto tol = Tolerances::for_mesh(grid);
  // Top face of the tetrahedron flush with the underside of the grid.
  const auto under = Configuration::translation_only(Vec3(0.25, -0.4, -0.05));
  CHECK(min_distance(tet, under, grid).pair.normal_b.z() == doctest::Approx(-1.0));
  CHECK(certify_contact(tet, under, grid, tol).ok());
  // Hanging past the rim, touching only the boundary edge: no inward push collides.
  CHECK_FALSE(certify_contact(tet, Configuration::translation_only(Vec3(-0.55, -0.4, -0.05)), grid, tol).ok());

  const auto res = build_contact_db(tet, grid, params_for(Mode::translational, 1210, 42));
  for (const auto& s : res.db.samples()) CHECK(certify_contact(tet, s.q, grid, tol).ok());
}

TEST_CASE("median and MAD") {
  const auto [m, mad] = median_mad({1.0, 2.0, 3.0, 4.0, 100.0});
  CHECK(m == 3.0);
  CHECK(mad == 1.0);
  const auto [m2, mad2] = median_mad({1.0, 2.0, 3.0, 4.0});
  CHECK(m2 == 2.5);
  CHECK(mad2 == 1.0);
}

TEST_CASE("build parameter validation") {
  const auto cube = shapes::cube();
  auto p = params_for(Mode::translational, 0);
  CHECK_THROWS_AS(build_contact_db(cube, cube, p), PreconditionError);
  p = params_for(Mode::translational, 10);
  p.metric = MetricKind::object_norm;
  CHECK_THROWS_AS(build_contact_db(cube, cube, p), PreconditionError);
}
