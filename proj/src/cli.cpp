#include "propd/cli.hpp"

#include "propd/collision.hpp"
#include "propd/error.hpp"
#include "propd/mesh.hpp"
#include "propd/oracle.hpp"
#include "propd/query.hpp"
#include "propd/sample_db.hpp"
#include "propd/sampler.hpp"
#include "propd/shapes.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

namespace propd {

namespace {

using json = nlohmann::ordered_json;

class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<double> split_numbers(const std::string& line, bool* numeric) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string field;
  *numeric = true;
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    if (b == std::string::npos) {
      *numeric = false;
      return values;
    }
    const char* first = field.data() + b;
    const char* last = field.data() + e + 1;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      *numeric = false;
      return values;
    }
    values.push_back(v);
  }
  return values;
}

Configuration pose_from_numbers(const std::vector<double>& v, Mode mode) {
  if (v.size() == 3) {
    Configuration q;
    q.mode = mode;
    q.translation = Vec3(v[0], v[1], v[2]);
    return q;
  }
  if (v.size() != 7) throw ParseError("a pose needs 3 or 7 numbers");
  for (double x : v) {
    if (!std::isfinite(x)) throw ParseError("non-finite pose component");
  }
  try {
    return Configuration::make(Vec3(v[0], v[1], v[2]), Quat(v[3], v[4], v[5], v[6]), mode);
  } catch (const PreconditionError& e) {
    throw ParseError(e.what());
  }
}

// Shortest representation that reads back to the same double.
std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

void write_pose(std::ostream& os, const Configuration& q) {
  for (double x : q.to_array()) os << ',' << format_double(x);
}

std::unique_ptr<std::ofstream> open_output(const std::string& path) {
  auto f = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*f) throw Error("cannot open " + path + " for writing");
  return f;
}

// Options shared by several subcommands.
struct Common {
  std::string model_a, model_b, mode = "trans", db, out, queries, pose;
  std::size_t budget = 10000, max_seeds = 0, k = PdQuery::kDefaultK, ndirs = 2000,
              nsamples = 20000, num_queries = 0;
  std::string step = "one-ring";
  double dedup_radius = 0.0, tol = 1e-4, min_pd = 0.0;
  std::uint64_t rng_seed = 1, query_seed = 7;
  int threads = 1;
  bool oracle = false;
  std::string stats;
};

Mode mode_of(const Common& c) {
  try {
    return parse_mode(c.mode);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

MetricKind metric_for(Mode mode) {
  return mode == Mode::translational ? MetricKind::euclidean_translation : MetricKind::object_norm;
}

std::pair<TriMesh, TriMesh> load_pair(const Common& c) {
  if (c.model_a.empty() || c.model_b.empty()) throw UsageError("--model-a and --model-b are required");
  return {load_mesh(c.model_a), load_mesh(c.model_b)};
}

std::vector<Configuration> gather_queries(const Common& c, const TriMesh& A, const TriMesh& B,
                                          Mode mode) {
  std::vector<Configuration> qs;
  if (!c.pose.empty()) qs.push_back(parse_pose(c.pose, mode));
  if (!c.queries.empty()) {
    auto more = read_queries(c.queries, mode);
    qs.insert(qs.end(), more.begin(), more.end());
  }
  if (c.num_queries > 0) {
    Rng rng(c.query_seed);
    auto more = random_in_collision(A, B, mode, c.num_queries, rng, SeedBounds::around(A, B));
    qs.insert(qs.end(), more.begin(), more.end());
  }
  if (qs.empty()) throw UsageError("no queries: give --pose, --queries or --num-queries");
  return qs;
}

OracleResult run_oracle(const Common& c, const TriMesh& A, const Configuration& q,
                        const TriMesh& B, const MassProperties& props, std::size_t index) {
  if (q.mode == Mode::translational) {
    TranslationalOracleOptions opt;
    opt.tol = c.tol;
    opt.threads = c.threads;
    return translational_pd_oracle(A, q, B, c.ndirs, opt);
  }
  Rng rng(c.query_seed + 0x9e3779b97f4a7c15ull * (index + 1));
  return generalized_pd_oracle(A, q, B, c.nsamples, rng, props);
}

json stats_json(const BuildParams& p, const SampleDB& db, const PropagationStats& s) {
  json j;
  j["mode"] = to_string(p.mode);
  j["metric"] = to_string(p.metric);
  j["budget"] = p.budget;
  j["samples"] = db.size();
  j["seeds"] = s.seeds;
  j["propagated"] = s.propagated;
  j["propagated_per_seed"] = s.seeds > 0 ? static_cast<double>(s.propagated) / s.seeds : 0.0;
  j["seed_attempts"] = s.seed_attempts;
  j["seed_rejections"] = s.seed_rejections;
  j["ccd_calls"] = s.ccd.calls;
  j["ccd_calls_per_seed"] = s.seeds > 0 ? static_cast<double>(s.ccd.calls) / s.seeds : 0.0;
  j["dcd_calls"] = s.dcd.calls;
  j["dcd_calls_per_sample"] = db.empty() ? 0.0 : static_cast<double>(s.dcd.calls) / db.size();
  j["internal_cases"] = s.internal_cases;
  j["boundary_cases"] = s.boundary_cases;
  j["critical_none"] = s.critical_none;
  j["lifted"] = s.lifted;
  const auto [ccd_med, ccd_mad] = median_mad(s.ccd.micros);
  const auto [dcd_med, dcd_mad] = median_mad(s.dcd.micros);
  j["t_ccd_micros"] = {{"median", ccd_med}, {"mad", ccd_mad}};
  j["t_dcd_micros"] = {{"median", dcd_med}, {"mad", dcd_mad}};
  j["t_ccd_over_t_dcd"] = s.t_ccd_over_t_dcd();
  json hist = json::object();
  for (const auto& [n, count] : s.per_seed_histogram()) hist[std::to_string(n)] = count;
  j["per_seed_histogram"] = hist;
  j["build_seconds"] = s.build_seconds;
  j["seconds_per_sample"] = db.empty() ? 0.0 : s.build_seconds / db.size();
  j["saturated"] = s.saturated;
  j["threads"] = p.threads;
  return j;
}

BuildParams build_params(const Common& c) {
  if (c.budget == 0) throw UsageError("--budget must be positive");
  if (c.threads < 1) throw UsageError("--threads must be at least 1");
  if (c.dedup_radius < 0.0) throw UsageError("--dedup-radius must be positive");
  BuildParams p;
  p.mode = mode_of(c);
  p.metric = metric_for(p.mode);
  p.budget = c.budget;
  p.max_seeds = c.max_seeds;
  try {
    p.step = StepPolicy::parse(c.step);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  p.r = c.dedup_radius;
  p.rng_seed = c.rng_seed;
  p.threads = c.threads;
  return p;
}

int cmd_precompute(const Common& c, std::ostream& out) {
  if (c.db.empty()) throw UsageError("--db is required");
  const BuildParams params = build_params(c);
  const auto [A, B] = load_pair(c);
  const auto res = build_contact_db(A, B, params);
  res.db.write(c.db);
  const std::string stats_path = c.stats.empty() ? c.db + ".stats.json" : c.stats;
  *open_output(stats_path) << stats_json(params, res.db, res.stats).dump(2) << '\n';
  out << "samples " << res.db.size() << " seeds " << res.stats.seeds << " propagated "
      << res.stats.propagated << " ccd " << res.stats.ccd.calls << " seconds "
      << res.stats.build_seconds << '\n';
  return kExitOk;
}

int cmd_query(const Common& c, std::ostream& out, std::ostream& err) {
  if (c.db.empty()) throw UsageError("--db is required");
  if (c.k == 0) throw UsageError("--k must be positive");
  const auto [A, B] = load_pair(c);
  const SampleDB db = SampleDB::read(c.db, A, B);
  const PdQuery pdq(A, B, db);
  const auto queries = gather_queries(c, A, B, db.meta().mode);
  const auto results = pdq.batch(queries, c.k, c.threads);

  std::unique_ptr<std::ofstream> file;
  if (!c.out.empty()) file = open_output(c.out);
  std::ostream& os = file ? *file : out;
  os << "query_index,pd_value,tx,ty,tz,qw,qx,qy,qz,refined,status,micros";
  if (c.oracle) os << ",oracle_pd";
  os << '\n';
  double sum_pd = 0.0, sum_micros = 0.0, sum_oracle = 0.0;
  std::size_t n_ok = 0, n_oracle = 0, n_err = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& t = results[i];
    if (!t.error.empty()) {
      ++n_err;
      err << "query " << i << ": " << t.error << '\n';
      os << i << ",,,,,,,,,," << "error," << format_double(t.micros);
      if (c.oracle) os << ',';
      os << '\n';
      continue;
    }
    os << i << ',' << format_double(t.result.value);
    write_pose(os, t.result.witness);
    os << ',' << (t.result.refined ? 1 : 0) << ',' << to_string(t.result.status) << ','
       << format_double(t.micros);
    sum_pd += t.result.value;
    sum_micros += t.micros;
    ++n_ok;
    if (c.oracle) {
      os << ',';
      if (t.result.status != QueryStatus::not_penetrating) {
        const auto o = run_oracle(c, A, queries[i], B, pdq.props(), i);
        os << format_double(o.value);
        sum_oracle += o.value;
      } else {
        os << 0;
      }
      ++n_oracle;
    }
    os << '\n';
  }
  const double mean_pd = n_ok > 0 ? sum_pd / n_ok : 0.0;
  const double mean_us = n_ok > 0 ? sum_micros / n_ok : 0.0;
  os << "mean," << format_double(mean_pd) << ",,,,,,,,,," << format_double(mean_us);
  if (c.oracle) os << ',' << format_double(n_oracle > 0 ? sum_oracle / n_oracle : 0.0);
  os << '\n';
  return n_err > 0 ? kExitRuntime : kExitOk;
}

int cmd_convergence(const Common& c, std::ostream& out, std::ostream& err) {
  const BuildParams params = build_params(c);
  const auto [A, B] = load_pair(c);
  const auto res = build_contact_db(A, B, params);
  const MassProperties props = mass_properties(A);
  Common qc = c;
  if (qc.num_queries == 0 && qc.pose.empty() && qc.queries.empty()) qc.num_queries = 100;
  const auto queries = gather_queries(qc, A, B, params.mode);

  std::vector<double> truth(queries.size());
  std::vector<char> used(queries.size(), 0);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    truth[i] = run_oracle(c, A, queries[i], B, props, i).value;
    used[i] = truth[i] >= c.min_pd ? 1 : 0;
  }

  std::vector<std::size_t> sizes;
  for (std::size_t n = 100; n < res.db.size(); n *= 10) sizes.push_back(n);
  sizes.push_back(res.db.size());

  std::unique_ptr<std::ofstream> file;
  if (!c.out.empty()) file = open_output(c.out);
  std::ostream& os = file ? *file : out;
  os << "samples,mean_relative_error,max_relative_error,mean_micros,queries\n";
  for (std::size_t n : sizes) {
    const SampleDB db = res.db.prefix(n);
    const PdQuery pdq(A, B, db);
    const auto results = pdq.batch(queries, c.k, 1);
    double sum = 0.0, worst = 0.0, micros = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      if (!used[i]) continue;
      if (!results[i].error.empty()) {
        err << "query " << i << " at " << n << " samples: " << results[i].error << '\n';
        return kExitRuntime;
      }
      const double e = std::abs(results[i].result.value - truth[i]) / truth[i];
      sum += e;
      worst = std::max(worst, e);
      micros += results[i].micros;
      ++count;
    }
    if (count == 0) throw Error("no query reaches --min-pd");
    os << n << ',' << format_double(sum / count) << ',' << format_double(worst) << ','
       << format_double(micros / count) << ',' << count << '\n';
  }
  return kExitOk;
}

int cmd_validate(const Common& c, std::ostream& out, std::ostream& err) {
  if (c.db.empty()) throw UsageError("--db is required");
  const auto [A, B] = load_pair(c);
  const SampleDB db = SampleDB::read(c.db, A, B);
  const Tolerances tol = Tolerances::for_mesh(B);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto& s = db.samples()[i];
    const auto cert = certify_contact(A, s.q, B, tol);
    if (!cert.free) {
      err << "sample " << i << ": in collision\n";
      ++violations;
    } else if (!cert.gap_ok) {
      err << "sample " << i << ": gap " << cert.gap << " exceeds " << tol.contact << '\n';
      ++violations;
    } else if (!cert.push_collides) {
      err << "sample " << i << ": inward push stays free\n";
      ++violations;
    }
    const auto nn = db.nearest(s.q, 2);
    for (const auto& n : nn) {
      if (n.id == static_cast<int>(i)) continue;
      if (n.distance < db.meta().r) {
        err << "sample " << i << ": within " << n.distance << " of sample " << n.id
            << " (dedup radius " << db.meta().r << ")\n";
        ++violations;
      }
      break;
    }
  }
  out << "samples " << db.size() << " violations " << violations << '\n';
  return violations == 0 ? kExitOk : kExitRuntime;
}

int cmd_oracle(const Common& c, std::ostream& out) {
  const Mode mode = mode_of(c);
  const auto [A, B] = load_pair(c);
  const auto queries = gather_queries(c, A, B, mode);
  const MassProperties props = mass_properties(A);
  std::unique_ptr<std::ofstream> file;
  if (!c.out.empty()) file = open_output(c.out);
  std::ostream& os = file ? *file : out;
  os << "query_index,oracle_pd,tx,ty,tz,qw,qx,qy,qz,resolution\n";
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto o = run_oracle(c, A, queries[i], B, props, i);
    os << i << ',' << format_double(o.value);
    write_pose(os, o.witness);
    os << ',' << o.resolution << '\n';
  }
  return kExitOk;
}

struct ShapeOptions {
  std::string shape;
  double size = 1.0, radius = 1.0, major_radius = 1.0, minor_radius = 0.4, spacing = 0.1,
         height = 0.05, amplitude = 0.1, frequency = 4.0, rotate_x = 0.0;
  int subdiv = 3, major = 24, minor = 12, cells = 10, steps = 4;
};

int cmd_genmesh(const ShapeOptions& s, const std::string& path, std::ostream& out) {
  if (path.empty()) throw UsageError("--out is required");
  TriMesh m;
  if (s.shape == "cube") {
    m = shapes::cube(s.size);
  } else if (s.shape == "icosphere") {
    m = shapes::icosphere(s.radius, s.subdiv);
  } else if (s.shape == "bumpy-sphere") {
    m = shapes::bumpy_sphere(s.radius, s.amplitude, s.frequency, s.subdiv);
  } else if (s.shape == "torus") {
    m = shapes::torus(s.major_radius, s.minor_radius, s.major, s.minor);
  } else if (s.shape == "grid") {
    m = shapes::grid(s.cells, s.spacing);
  } else if (s.shape == "tetrahedron") {
    m = shapes::tetrahedron(s.size, s.height);
  } else if (s.shape == "staircase") {
    m = shapes::staircase(s.steps, s.height, s.height, s.size);
  } else if (s.shape == "star") {
    m = shapes::star(5, s.radius, 0.45 * s.radius, s.height);
  } else {
    throw UsageError("unknown shape '" + s.shape + "'");
  }
  if (s.rotate_x != 0.0) {
    const Mat3 R = Eigen::AngleAxisd(s.rotate_x * std::numbers::pi / 180.0, Vec3::UnitX())
                       .toRotationMatrix();
    std::vector<Vec3> v;
    v.reserve(m.vertex_count());
    for (const auto& p : m.vertices()) v.push_back(R * p);
    m = TriMesh::build(std::move(v), m.triangles());
  }
  save_off(m, path);
  out << "vertices " << m.vertex_count() << " triangles " << m.triangle_count() << '\n';
  return kExitOk;
}

void add_models(CLI::App* app, Common& c) {
  app->add_option("--model-a", c.model_a, "Mesh of the movable body (OFF or OBJ)");
  app->add_option("--model-b", c.model_b, "Mesh of the fixed body (OFF or OBJ)");
}

void add_build(CLI::App* app, Common& c) {
  app->add_option("--mode", c.mode, "trans or gen")->check(CLI::IsMember({"trans", "gen"}));
  app->add_option("--budget", c.budget, "Total number of samples");
  app->add_option("--max-seeds", c.max_seeds, "Stop after this many seeds (0 = no limit)");
  app->add_option("--step", c.step, "one-ring or fixed:<d>");
  app->add_option("--dedup-radius", c.dedup_radius, "Embedding dedup radius (0 = 4e-3 diag B)");
  app->add_option("--rng-seed", c.rng_seed, "Random seed");
  app->add_option("--threads", c.threads, "Worker threads");
}

void add_queries(CLI::App* app, Common& c) {
  app->add_option("--pose", c.pose, "Single pose: tx,ty,tz[,qw,qx,qy,qz]");
  app->add_option("--queries", c.queries, "CSV file of poses");
  app->add_option("--num-queries", c.num_queries, "Random in-collision queries");
  app->add_option("--query-seed", c.query_seed, "Seed for random queries and the generalized oracle");
}

void add_oracle(CLI::App* app, Common& c) {
  app->add_option("--ndirs", c.ndirs, "Translational oracle directions");
  app->add_option("--tol", c.tol, "Translational oracle bisection tolerance");
  app->add_option("--nsamples", c.nsamples, "Generalized oracle samples");
}

}  // namespace

Configuration parse_pose(const std::string& text, Mode mode) {
  bool numeric = false;
  const auto v = split_numbers(text, &numeric);
  if (!numeric) throw ParseError("malformed pose '" + text + "'");
  return pose_from_numbers(v, mode);
}

std::vector<Configuration> read_queries(const std::filesystem::path& path, Mode mode) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Configuration> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') {
      continue;
    }
    bool numeric = false;
    const auto v = split_numbers(line, &numeric);
    if (!numeric) {
      if (out.empty() && lineno == 1) continue;  // header
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed pose");
    }
    try {
      out.push_back(pose_from_numbers(v, mode));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Penetration depth by contact-space propagation sampling", "propd"};
  app.require_subcommand(1);
  Common c;
  ShapeOptions shape;

  auto* pre = app.add_subcommand("precompute", "Build a contact-space sample database");
  add_models(pre, c);
  add_build(pre, c);
  pre->add_option("--db", c.db, "Output database file");
  pre->add_option("--stats", c.stats, "Output statistics JSON (default <db>.stats.json)");

  auto* query = app.add_subcommand("query", "Answer PD queries against a database");
  add_models(query, c);
  add_queries(query, c);
  add_oracle(query, c);
  query->add_option("--db", c.db, "Database file");
  query->add_option("--k", c.k, "Nearest samples examined per query");
  query->add_option("--threads", c.threads, "Worker threads");
  query->add_flag("--oracle", c.oracle, "Append the oracle PD to each row");
  query->add_option("--out", c.out, "Output CSV (default stdout)");

  auto* conv = app.add_subcommand("convergence", "Error against the oracle over nested databases");
  add_models(conv, c);
  add_build(conv, c);
  add_queries(conv, c);
  add_oracle(conv, c);
  conv->add_option("--k", c.k, "Nearest samples examined per query");
  conv->add_option("--min-pd", c.min_pd, "Ignore queries whose oracle PD is below this");
  conv->add_option("--out", c.out, "Output CSV (default stdout)");

  auto* val = app.add_subcommand("validate", "Re-certify every sample of a database");
  add_models(val, c);
  val->add_option("--db", c.db, "Database file");

  auto* gen = app.add_subcommand("genmesh", "Write a procedural benchmark mesh as OFF");
  gen->add_option("--shape", shape.shape, "cube, icosphere, bumpy-sphere, torus, grid, tetrahedron, staircase, star")
      ->required();
  gen->add_option("--size", shape.size, "Edge length (cube, tetrahedron) or width (staircase)");
  gen->add_option("--radius", shape.radius, "Sphere or star radius");
  gen->add_option("--subdiv", shape.subdiv, "Sphere subdivisions");
  gen->add_option("--amplitude", shape.amplitude, "Bump amplitude");
  gen->add_option("--frequency", shape.frequency, "Bump frequency");
  gen->add_option("--major-radius", shape.major_radius, "Torus major radius");
  gen->add_option("--minor-radius", shape.minor_radius, "Torus tube radius");
  gen->add_option("--major", shape.major, "Torus segments around the axis");
  gen->add_option("--minor", shape.minor, "Torus segments around the tube");
  gen->add_option("--cells", shape.cells, "Grid cells per side");
  gen->add_option("--spacing", shape.spacing, "Grid spacing");
  gen->add_option("--height", shape.height, "Tetrahedron height, stair rise and run, star depth");
  gen->add_option("--steps", shape.steps, "Staircase steps");
  gen->add_option("--rotate-x", shape.rotate_x, "Rotate the result about x (degrees)");
  gen->add_option("--out", c.out, "Output OFF file");

  auto* orc = app.add_subcommand("oracle", "Brute-force reference PD");
  add_models(orc, c);
  add_queries(orc, c);
  add_oracle(orc, c);
  orc->add_option("--mode", c.mode, "trans or gen")->check(CLI::IsMember({"trans", "gen"}));
  orc->add_option("--threads", c.threads, "Worker threads (translational)");
  orc->add_option("--out", c.out, "Output CSV (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (pre->parsed()) return cmd_precompute(c, out);
    if (query->parsed()) return cmd_query(c, out, err);
    if (conv->parsed()) return cmd_convergence(c, out, err);
    if (val->parsed()) return cmd_validate(c, out, err);
    if (gen->parsed()) return cmd_genmesh(shape, c.out, out);
    if (orc->parsed()) return cmd_oracle(c, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataMismatchError& e) {
    err << "data mismatch: " << e.what() << '\n';
    return kExitDataMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace propd
