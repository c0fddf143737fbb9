#include "propd/cli.hpp"
#include "propd/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace propd;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

struct Files {
  std::filesystem::path dir = testsupport::scratch_dir("cli");
  std::string cube = (dir / "cube.off").string();
  std::string sphere = (dir / "sphere.off").string();
  std::string db = (dir / "cube.db").string();

  Files() {
    REQUIRE(run({"genmesh", "--shape", "cube", "--out", cube}).code == 0);
    REQUIRE(run({"genmesh", "--shape", "icosphere", "--subdiv", "1", "--out", sphere}).code == 0);
    REQUIRE(run({"precompute", "--model-a", cube, "--model-b", cube, "--budget", "2000", "--rng-seed", "42",
                 "--db", db})
                .code == 0);
  }
};

const Files& files() {
  static const Files f;
  return f;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const auto& f = files();
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"precompute", "--model-a", f.cube, "--model-b", f.cube, "--budget", "0", "--db",
             (f.dir / "zero.db").string()})
            .code == kExitUsage);
  CHECK(run({"precompute", "--model-a", f.cube, "--model-b", f.cube, "--mode", "sideways", "--db",
             (f.dir / "x.db").string()})
            .code == kExitUsage);
  CHECK(run({"precompute", "--model-a", f.cube, "--model-b", f.cube, "--step", "two-ring", "--db",
             (f.dir / "x.db").string()})
            .code == kExitUsage);
  CHECK(run({"query", "--model-a", f.cube, "--model-b", f.cube, "--db", f.db}).code == kExitUsage);
  CHECK(run({"genmesh", "--shape", "teapot", "--out", (f.dir / "t.off").string()}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("precompute is deterministic and writes stats") {
  const auto& f = files();
  const auto other = (f.dir / "again.db").string();
  REQUIRE(run({"precompute", "--model-a", f.cube, "--model-b", f.cube, "--budget", "2000", "--rng-seed", "42",
               "--db", other})
              .code == 0);
  CHECK(testsupport::read_text(f.db) == testsupport::read_text(other));
  const auto stats = testsupport::read_text(f.db + ".stats.json");
  for (const char* key : {"\"seeds\"", "\"propagated\"", "\"ccd_calls\"", "\"t_ccd_over_t_dcd\"",
                          "\"per_seed_histogram\"", "\"build_seconds\""}) {
    CHECK(stats.find(key) != std::string::npos);
  }
}

TEST_CASE("query output schema") {
  const auto& f = files();
  const auto r = run({"query", "--model-a", f.cube, "--model-b", f.cube, "--db", f.db, "--pose", "0.4,0,0"});
  REQUIRE(r.code == 0);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "query_index,pd_value,tx,ty,tz,qw,qx,qy,qz,refined,status,micros");
  CHECK(rows[1].rfind("0,0.6", 0) == 0);
  CHECK(rows[1].find(",ok,") != std::string::npos);
  CHECK(rows[2].rfind("mean,", 0) == 0);

  const auto free = run({"query", "--model-a", f.cube, "--model-b", f.cube, "--db", f.db, "--pose",
                         "3,0,0,1,0,0,0"});
  REQUIRE(free.code == 0);
  CHECK(lines(free.out)[1].rfind("0,0,3,0,0,1,0,0,0,0,not_penetrating,", 0) == 0);

  const auto with_oracle = run({"query", "--model-a", f.cube, "--model-b", f.cube, "--db", f.db, "--pose",
                                "0.4,0,0", "--oracle", "--ndirs", "50"});
  REQUIRE(with_oracle.code == 0);
  CHECK(lines(with_oracle.out)[0] ==
        "query_index,pd_value,tx,ty,tz,qw,qx,qy,qz,refined,status,micros,oracle_pd");
}

TEST_CASE("batch query from a file and from random poses") {
  const auto& f = files();
  const auto qfile = f.dir / "queries.csv";
  testsupport::write_text(qfile, "tx,ty,tz,qw,qx,qy,qz\n0.4,0,0,1,0,0,0\n# comment\n\n0,0.5,0,1,0,0,0\n");
  const auto r = run({"query", "--model-a", f.cube, "--model-b", f.cube, "--db", f.db, "--queries",
                      qfile.string()});
  REQUIRE(r.code == 0);
  CHECK(lines(r.out).size() == 4);

  const auto out = f.dir / "batch.csv";
  const auto b = run({"query", "--model-a", f.cube, "--model-b", f.cube, "--db", f.db, "--num-queries",
                      "1000", "--out", out.string()});
  REQUIRE(b.code == 0);
  const auto rows = lines(testsupport::read_text(out));
  CHECK(rows.size() == 1002);
  CHECK(rows.back().rfind("mean,", 0) == 0);

  testsupport::write_text(qfile, "0.4,0,0\nnot,a,pose\n");
  CHECK(run({"query", "--model-a", f.cube, "--model-b", f.cube, "--db", f.db, "--queries", qfile.string()}).code ==
        kExitRuntime);
}

TEST_CASE("validate") {
  const auto& f = files();
  CHECK(run({"validate", "--model-a", f.cube, "--model-b", f.cube, "--db", f.db}).code == 0);
  CHECK(run({"validate", "--model-a", f.cube, "--model-b", f.sphere, "--db", f.db}).code == kExitDataMismatch);
  CHECK(run({"query", "--model-a", f.cube, "--model-b", f.sphere, "--db", f.db, "--pose", "0.4,0,0"}).code ==
        kExitDataMismatch);

  // Push the fifth sample off its contact face by ten contact tolerances.
  auto text = testsupport::read_text(f.db);
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (n++ == 5) {
      const auto start = line.find("\"q\":[") + 5;
      const auto end = line.find(']', start);
      std::vector<double> q;
      std::istringstream nums(line.substr(start, end - start));
      for (std::string tok; std::getline(nums, tok, ',');) q.push_back(std::stod(tok));
      REQUIRE(q.size() == 7);
      int axis = 0;
      for (int k = 1; k < 3; ++k) {
        if (std::abs(q[k]) > std::abs(q[axis])) axis = k;
      }
      q[axis] += (q[axis] >= 0 ? 10 : -10) * 1e-4 * std::sqrt(3.0);
      std::ostringstream nums_out;
      nums_out.precision(17);
      for (std::size_t k = 0; k < q.size(); ++k) nums_out << (k ? "," : "") << q[k];
      line = line.substr(0, start) + nums_out.str() + line.substr(end);
    }
    out << line << '\n';
  }
  const auto bad = f.dir / "bad.db";
  testsupport::write_text(bad, out.str());
  const auto r = run({"validate", "--model-a", f.cube, "--model-b", f.cube, "--db", bad.string()});
  CHECK(r.code == kExitRuntime);
  CHECK(r.err.find("sample 4") != std::string::npos);
}

TEST_CASE("convergence output") {
  const auto& f = files();
  const auto r = run({"convergence", "--model-a", f.cube, "--model-b", f.cube, "--budget", "1000",
                      "--num-queries", "10", "--ndirs", "100", "--rng-seed", "3"});
  REQUIRE(r.code == 0);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "samples,mean_relative_error,max_relative_error,mean_micros,queries");
  CHECK(rows[1].rfind("100,", 0) == 0);
  CHECK(rows[2].rfind("1000,", 0) == 0);
}

TEST_CASE("oracle and genmesh subcommands") {
  const auto& f = files();
  const auto r = run({"oracle", "--model-a", f.cube, "--model-b", f.cube, "--pose", "0.4,0,0", "--ndirs", "20"});
  REQUIRE(r.code == 0);
  const auto rows = lines(r.out);
  CHECK(rows[0] == "query_index,oracle_pd,tx,ty,tz,qw,qx,qy,qz,resolution");
  CHECK(rows[1].rfind("0,0.6", 0) == 0);
  const auto g = run({"oracle", "--model-a", f.cube, "--model-b", f.cube, "--mode", "gen", "--pose",
                      "0.4,0,0,1,0,0,0", "--nsamples", "200"});
  CHECK(g.code == 0);
  CHECK(run({"genmesh", "--shape", "torus", "--rotate-x", "90", "--out", (f.dir / "t.off").string()}).code == 0);
  CHECK(run({"oracle", "--model-a", f.cube, "--model-b", f.cube, "--pose", "3,0,0"}).code == kExitRuntime);
}

TEST_CASE("pose parsing") {
  CHECK(parse_pose("1,2,3", Mode::translational).translation == Vec3(1, 2, 3));
  const auto q = parse_pose("0,0,0,0,0,0,2", Mode::generalized);
  CHECK(q.rotation.z() == doctest::Approx(1.0));
  CHECK_THROWS_AS(parse_pose("1,2", Mode::translational), ParseError);
  CHECK_THROWS_AS(parse_pose("1,2,x", Mode::translational), ParseError);
  CHECK_THROWS_AS(parse_pose("0,0,0,0,0,0,0", Mode::generalized), ParseError);
}
