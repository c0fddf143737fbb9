#include "propd/sampler.hpp"

#include "propd/error.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

namespace propd {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

bool timed_collision(const SamplerContext& ctx, const Configuration& q, PropagationStats* stats) {
  if (stats == nullptr) return is_collision(ctx.A, q, ctx.B);
  const auto start = Clock::now();
  const bool hit = is_collision(ctx.A, q, ctx.B);
  stats->dcd.micros.push_back(micros_since(start));
  ++stats->dcd.calls;
  return hit;
}

Configuration random_configuration(Rng& rng, const SeedBounds& bounds, Mode mode) {
  Configuration q;
  q.mode = mode;
  q.translation = rng.uniform_in_box(bounds.lo, bounds.hi);
  if (mode == Mode::generalized) q.rotation = canonical(rng.rotation());
  return q;
}

std::vector<int> slide_targets(const SamplerContext& ctx, const ContactSample& s, bool on_vertex) {
  if (!on_vertex) {
    // Generic contact point (seed or critical configuration): first snap to the
    // nearest corner, then continue to its one-ring.
    std::vector<int> t{s.vertex_b};
    const auto ring = ctx.B.neighbors(s.vertex_b);
    t.insert(t.end(), ring.begin(), ring.end());
    return t;
  }
  if (ctx.step.one_ring) {
    const auto ring = ctx.B.neighbors(s.vertex_b);
    return {ring.begin(), ring.end()};
  }
  return vertex_neighbors_at_step(ctx.B, s.vertex_b, ctx.step.d);
}

}  // namespace

SeedBounds SeedBounds::around(const TriMesh& A, const TriMesh& B) {
  const double half = 0.5 * (A.diagonal() + B.diagonal());
  const Vec3 c = B.bounds().center() - A.bounds().center();
  return {c - Vec3::Constant(half), c + Vec3::Constant(half)};
}

std::vector<Configuration> random_in_collision(const TriMesh& A, const TriMesh& B, Mode mode,
                                               std::size_t n, Rng& rng, const SeedBounds& bounds) {
  std::vector<Configuration> out;
  out.reserve(n);
  std::size_t draws = 0;
  while (out.size() < n) {
    if (++draws > 10'000'000 + 1000 * n) throw Error("cannot find in-collision configurations");
    auto q = random_configuration(rng, bounds, mode);
    if (is_collision(A, q, B)) out.push_back(q);
  }
  return out;
}

Mat3 contact_frame(const TriMesh& B, int v) {
  const Vec3& n = B.vertex_normal(v);
  for (const Vec3& axis : std::array<Vec3, 2>{Vec3::UnitZ(), Vec3::UnitX()}) {
    const Vec3 t = axis - axis.dot(n) * n;
    if (t.norm() > 1e-3) {
      Mat3 F;
      F.col(0) = t.normalized();
      F.col(1) = n.cross(F.col(0));
      F.col(2) = n;
      return F;
    }
  }
  throw GeometryError("no tangent direction at vertex " + std::to_string(v));
}

void record_orientation(const SamplerContext& ctx, ContactSample& s) {
  if (ctx.mode == Mode::translational) {
    const Vec3 na = s.q.rotation * ctx.A.surface_normal(s.anchor);
    const Vec3 nb = ctx.B.has_vertex_normal(s.vertex_b) ? ctx.B.vertex_normal(s.vertex_b) : Vec3::UnitZ();
    s.theta = std::atan2(na.cross(nb).norm(), na.dot(nb));
  } else {
    s.rel = canonical(Quat(contact_frame(ctx.B, s.vertex_b).transpose() * s.q.rotation_matrix()));
  }
}

Configuration slide_transition(const SamplerContext& ctx, const ContactSample& s, int target) {
  const Vec3 a = ctx.A.point(s.anchor);
  Configuration q;
  q.mode = ctx.mode;
  if (ctx.mode == Mode::generalized) {
    q.rotation = canonical(Quat(contact_frame(ctx.B, target)) * s.rel);
  }
  q.translation = ctx.B.vertex(target) - q.rotation * a;
  return q;
}

namespace {

// Vertex normal of B; on an open sheet, flipped to the side where A lies.
Vec3 facing_normal(const SamplerContext& ctx, const Configuration& q, int v) {
  const Vec3& n = ctx.B.vertex_normal(v);
  if (ctx.B.is_closed()) return n;
  Vec3 center = Vec3::Zero();
  for (const auto& p : ctx.A.vertices()) center += p;
  center /= static_cast<double>(ctx.A.vertex_count());
  return (apply(q, center) - ctx.B.vertex(v)).dot(n) < 0.0 ? Vec3(-n) : n;
}

}  // namespace

std::optional<Configuration> repair_contact(const SamplerContext& ctx, const Configuration& q,
                                            int v) {
  const Vec3 n = facing_normal(ctx, q, v);
  auto moved = [&](double s) {
    Configuration m = q;
    m.translation -= s * n;
    return m;
  };
  const double gap0 = min_distance(ctx.A, q, ctx.B).distance;
  if (gap0 > 0.0 && gap0 <= ctx.tol.contact) return q;
  // Bracket: lo keeps the gap above the tolerance, hi collides.
  double lo = 0.0, hi = gap0 + ctx.tol.contact;
  if (!is_collision(ctx.A, moved(hi), ctx.B)) return std::nullopt;
  for (int k = 0; k < 32; ++k) {
    const double mid = 0.5 * (lo + hi);
    const auto qm = moved(mid);
    if (is_collision(ctx.A, qm, ctx.B)) {
      hi = mid;
      continue;
    }
    const double g = min_distance(ctx.A, qm, ctx.B).distance;
    if (g > 0.0 && g <= ctx.tol.contact) return qm;
    lo = mid;
  }
  return std::nullopt;
}

std::optional<ContactSample> lift_to_contact(const SamplerContext& ctx, const Configuration& q,
                                             int v) {
  if (!ctx.B.has_vertex_normal(v)) return std::nullopt;
  const Vec3 n = facing_normal(ctx, q, v);
  auto moved = [&](double h) {
    Configuration m = q;
    m.translation += h * n;
    return m;
  };
  double lo = 0.0, hi = ctx.tol.contact;
  while (is_collision(ctx.A, moved(hi), ctx.B)) {
    lo = hi;
    hi *= 2.0;
    if (hi > ctx.B.diagonal()) return std::nullopt;
  }
  for (int k = 0; k < 64; ++k) {
    if (hi - lo <= 0.5 * ctx.tol.contact) {
      const auto d = min_distance(ctx.A, moved(hi), ctx.B);
      if (d.distance <= ctx.tol.contact) {
        ContactSample s;
        s.q = moved(hi);
        s.anchor = d.pair.feature_a;
        s.vertex_b = ctx.B.nearest_corner(d.pair.feature_b);
        s.kind = SampleKind::propagated;
        return s;
      }
    }
    const double mid = 0.5 * (lo + hi);
    if (is_collision(ctx.A, moved(mid), ctx.B)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::nullopt;
}

Certificate certify_contact(const TriMesh& A, const Configuration& q, const TriMesh& B,
                            const Tolerances& tol) {
  Certificate c;
  c.free = !is_collision(A, q, B);
  if (!c.free) return c;
  const auto d = min_distance(A, q, B);
  c.gap = d.distance;
  c.gap_ok = d.distance <= tol.contact;
  Configuration pushed = q;
  pushed.translation -= 2.0 * tol.contact * d.pair.normal_b;
  c.push_collides = is_collision(A, pushed, B);
  return c;
}

std::map<std::size_t, std::size_t> PropagationStats::per_seed_histogram() const {
  std::map<std::size_t, std::size_t> h;
  for (auto n : per_seed) ++h[n];
  return h;
}

std::pair<double, double> median_mad(std::vector<double> values) {
  if (values.empty()) return {0.0, 0.0};
  auto median = [](std::vector<double>& v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
  };
  const double m = median(values);
  for (auto& x : values) x = std::abs(x - m);
  return {m, median(values)};
}

double PropagationStats::t_ccd_over_t_dcd() const {
  const double d = median_mad(dcd.micros).first;
  return d > 0.0 ? median_mad(ccd.micros).first / d : 0.0;
}

std::optional<ContactSample> random_contact_seed(const SamplerContext& ctx, Rng& rng,
                                                 const SeedBounds& bounds, const SampleDB& db,
                                                 PropagationStats* stats) {
  const double needed = ctx.A.diagonal() + ctx.B.diagonal();
  if ((bounds.hi - bounds.lo).minCoeff() < needed * (1.0 - 1e-12)) {
    throw PreconditionError("seed bounds smaller than the sum of the bounding-box diagonals");
  }
  constexpr int kRetryCap = 64;
  constexpr std::size_t kDrawCap = 10'000'000;
  for (int attempt = 0; attempt < kRetryCap; ++attempt) {
    std::optional<Configuration> free, hit;
    for (std::size_t n = 0; !(free && hit); ++n) {
      if (n == kDrawCap) throw Error("no free/in-collision configuration pair found in the seed bounds");
      auto q = random_configuration(rng, bounds, ctx.mode);
      if (timed_collision(ctx, q, stats)) {
        if (!hit) hit = q;
      } else if (!free) {
        free = q;
      }
    }
    const auto start = Clock::now();
    const auto ccd = ccd_first_contact(ctx.A, *free, *hit, ctx.B, ctx.tol);
    if (stats != nullptr) {
      stats->ccd.micros.push_back(micros_since(start));
      ++stats->ccd.calls;
      ++stats->seed_attempts;
    }
    ContactSample s;
    s.q = ccd.q_contact;
    s.anchor = ccd.pair.feature_a;
    s.vertex_b = ctx.B.nearest_corner(ccd.pair.feature_b);
    s.kind = SampleKind::seed;
    if (db.dedup_test(s.q)) {
      if (stats != nullptr) ++stats->seed_rejections;
      continue;
    }
    try {
      record_orientation(ctx, s);
    } catch (const GeometryError&) {
      continue;  // no contact frame at that vertex
    }
    return s;
  }
  return std::nullopt;
}

std::vector<ContactSample> propagate(const SamplerContext& ctx, const ContactSample& seed,
                                     SampleDB& db, std::size_t budget, PropagationStats* stats) {
  std::vector<ContactSample> added;
  std::deque<ContactSample> queue{seed};
  auto accept = [&](const ContactSample& s) {
    db.insert(s);
    added.push_back(s);
  };

  while (!queue.empty() && db.size() < budget) {
    const ContactSample s = queue.front();
    queue.pop_front();
    const Vec3 a = ctx.A.point(s.anchor);
    const bool on_vertex = (apply(s.q, a) - ctx.B.vertex(s.vertex_b)).norm() <= ctx.tol.contact;

    for (int target : slide_targets(ctx, s, on_vertex)) {
      if (db.size() >= budget) break;
      if (on_vertex && target == s.vertex_b) continue;
      Configuration q;
      try {
        q = slide_transition(ctx, s, target);
      } catch (const GeometryError&) {
        continue;  // undefined normal at the target
      }

      if (timed_collision(ctx, q, stats)) {
        // Internal case: stop at the first new contact along the slide.
        if (stats != nullptr) ++stats->internal_cases;
        const auto cc = critical_configuration(ctx.A, s.q, q, ctx.B, s.anchor, ctx.tol);
        if (!cc) {
          if (stats != nullptr) ++stats->critical_none;
          if (ctx.mode != Mode::translational) continue;
          auto lifted = lift_to_contact(ctx, q, target);
          if (!lifted || db.dedup_test(lifted->q)) continue;
          try {
            record_orientation(ctx, *lifted);
          } catch (const GeometryError&) {
            continue;
          }
          if (stats != nullptr) ++stats->lifted;
          accept(*lifted);
          queue.push_back(*lifted);
          continue;
        }
        if (db.dedup_test(cc->q)) continue;
        bool first = true;
        for (const auto& pair : cc->contacts) {
          ContactSample n;
          n.q = cc->q;
          n.anchor = pair.feature_a;
          n.vertex_b = ctx.B.nearest_corner(pair.feature_b);
          n.kind = SampleKind::propagated;
          try {
            record_orientation(ctx, n);
          } catch (const GeometryError&) {
            continue;
          }
          if (first) {
            accept(n);
            first = false;
          }
          queue.push_back(n);
        }
        continue;
      }

      // Boundary case: the anchor sits on the target vertex, so the gap is
      // zero unless rounding moved it; repair only if the certificate fails.
      if (stats != nullptr) ++stats->boundary_cases;
      if ((apply(q, a) - ctx.B.vertex(target)).norm() > ctx.tol.contact) {
        const auto fixed = repair_contact(ctx, q, target);
        if (!fixed) continue;
        q = *fixed;
      }
      if (db.dedup_test(q)) continue;
      // Off the rim of an open sheet the inward push can miss B entirely.
      if (!ctx.B.is_closed() && !certify_contact(ctx.A, q, ctx.B, ctx.tol).ok()) continue;
      ContactSample n = s;
      n.q = q;
      n.vertex_b = target;
      n.kind = SampleKind::propagated;
      accept(n);
      queue.push_back(n);
    }
  }
  return added;
}

namespace {

void validate(const TriMesh& A, const TriMesh& B, const BuildParams& p) {
  if (p.budget == 0) throw PreconditionError("budget must be positive");
  if (p.r < 0.0) throw PreconditionError("dedup radius must be positive");
  if (p.threads < 1) throw PreconditionError("threads must be at least 1");
  const bool compatible = (p.mode == Mode::translational) ==
                          (p.metric == MetricKind::euclidean_translation);
  if (!compatible) throw PreconditionError("mode and metric are incompatible");
  if (!p.step.one_ring && !(p.step.d > 0.0)) throw PreconditionError("step length must be positive");
  (void)A;
  (void)B;
}

void merge_stats(PropagationStats& into, const PropagationStats& s) {
  into.seed_attempts += s.seed_attempts;
  into.seed_rejections += s.seed_rejections;
  into.internal_cases += s.internal_cases;
  into.boundary_cases += s.boundary_cases;
  into.critical_none += s.critical_none;
  into.lifted += s.lifted;
  into.ccd.calls += s.ccd.calls;
  into.dcd.calls += s.dcd.calls;
  into.ccd.micros.insert(into.ccd.micros.end(), s.ccd.micros.begin(), s.ccd.micros.end());
  into.dcd.micros.insert(into.dcd.micros.end(), s.dcd.micros.begin(), s.dcd.micros.end());
}

std::uint64_t worker_seed(std::uint64_t seed, int worker) {
  // splitmix64 step so neighbouring worker streams are unrelated
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(worker + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void build_parallel(const SamplerContext& ctx, const BuildParams& params, const SeedBounds& bounds,
                    SampleDB& db, PropagationStats& stats) {
  std::mutex mutex;
  std::condition_variable ready;
  std::deque<std::vector<ContactSample>> batches;
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> seeds_started{0};
  int running = params.threads;
  std::vector<PropagationStats> worker_stats(params.threads);
  std::vector<char> saturated(params.threads, 0);
  const DbMeta base = db.meta();

  auto worker = [&](int w) {
    Rng rng(worker_seed(params.rng_seed, w));
    SampleDB local(base);
    auto& st = worker_stats[w];
    try {
      while (!stop.load() && local.size() < params.budget) {
        if (params.max_seeds > 0 && seeds_started.fetch_add(1) >= params.max_seeds) break;
        auto seed = random_contact_seed(ctx, rng, bounds, local, &st);
        if (!seed) {
          saturated[w] = 1;
          break;
        }
        local.insert(*seed);
        std::vector<ContactSample> batch{*seed};
        auto more = propagate(ctx, *seed, local, params.budget, &st);
        batch.insert(batch.end(), more.begin(), more.end());
        std::lock_guard lock(mutex);
        batches.push_back(std::move(batch));
        ready.notify_one();
      }
    } catch (...) {
      stop = true;
    }
    std::lock_guard lock(mutex);
    --running;
    ready.notify_one();
  };

  std::vector<std::thread> pool;
  for (int w = 0; w < params.threads; ++w) pool.emplace_back(worker, w);
  {
    std::unique_lock lock(mutex);
    while (true) {
      ready.wait(lock, [&] { return !batches.empty() || running == 0; });
      if (batches.empty() && running == 0) break;
      auto batch = std::move(batches.front());
      batches.pop_front();
      lock.unlock();
      std::size_t accepted = 0;
      for (const auto& s : batch) {
        if (db.size() >= params.budget) break;
        if (db.dedup_test(s.q)) continue;
        // A batch whose seed was rejected keeps its samples as propagated ones.
        ContactSample c = s;
        if (c.kind == SampleKind::seed && accepted > 0) c.kind = SampleKind::propagated;
        db.insert(c);
        ++accepted;
      }
      if (accepted > 0) stats.per_seed.push_back(accepted);
      if (db.size() >= params.budget) stop = true;
      lock.lock();
    }
  }
  for (auto& t : pool) t.join();
  for (int w = 0; w < params.threads; ++w) {
    merge_stats(stats, worker_stats[w]);
    stats.saturated = stats.saturated || saturated[w] != 0;
  }
}

}  // namespace

BuildResult build_contact_db(const TriMesh& A, const TriMesh& B, const BuildParams& params) {
  validate(A, B, params);
  const auto start = Clock::now();
  const MassProperties mp = mass_properties(A);

  DbMeta meta;
  meta.mesh_hash_a = A.hash();
  meta.mesh_hash_b = B.hash();
  meta.mode = params.mode;
  meta.metric = params.metric;
  meta.r = params.r > 0.0 ? params.r : kDefaultDedupFraction * B.diagonal();
  meta.sigma = rotation_scale(mp);
  meta.rng_seed = params.rng_seed;
  meta.step = params.step;

  BuildResult out{SampleDB(meta), {}};
  SamplerContext ctx{A, B, params.mode, Tolerances::for_mesh(B), params.step};
  const SeedBounds bounds = params.bounds ? *params.bounds : SeedBounds::around(A, B);
  auto& db = out.db;
  auto& stats = out.stats;

  if (params.threads > 1) {
    build_parallel(ctx, params, bounds, db, stats);
  } else {
    Rng rng(params.rng_seed);
    while (db.size() < params.budget &&
           (params.max_seeds == 0 || db.meta().seeds < params.max_seeds)) {
      auto seed = random_contact_seed(ctx, rng, bounds, db, &stats);
      if (!seed) {
        stats.saturated = true;
        break;
      }
      db.insert(*seed);
      const auto added = propagate(ctx, *seed, db, params.budget, &stats);
      stats.per_seed.push_back(added.size() + 1);
    }
  }
  if (db.empty()) throw Error("no contact samples produced: the bodies cannot touch inside the bounds");
  stats.seeds = db.meta().seeds;
  stats.propagated = db.meta().propagated;
  stats.build_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

}  // namespace propd
