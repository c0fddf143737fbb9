#include "propd/sample_db.hpp"

#include "propd/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace propd {

using ojson = nlohmann::ordered_json;

std::string hash_to_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::uint64_t hex_to_hash(const std::string& s) {
  std::size_t used = 0;
  const auto h = std::stoull(s, &used, 16);
  if (used != s.size()) throw ParseError("bad mesh hash '" + s + "'");
  return h;
}

std::string kind_name(SampleKind k) { return k == SampleKind::seed ? "seed" : "propagated"; }

}  // namespace

StepPolicy StepPolicy::parse(const std::string& s) {
  if (s == "one-ring") return {};
  if (s.rfind("fixed:", 0) == 0) {
    double d = 0.0;
    try {
      std::size_t used = 0;
      d = std::stod(s.substr(6), &used);
      if (used != s.size() - 6) throw ParseError("");
    } catch (const std::exception&) {
      throw ParseError("bad step policy '" + s + "'");
    }
    if (!(d > 0.0)) throw ParseError("step length must be positive");
    return {false, d};
  }
  throw ParseError("bad step policy '" + s + "' (expected one-ring or fixed:<d>)");
}

std::string StepPolicy::to_string() const {
  if (one_ring) return "one-ring";
  std::ostringstream out;
  out.precision(17);
  out << "fixed:" << d;
  return out.str();
}

bool SampleDB::dedup_test(const Configuration& q, double r) const {
  return index_.any_within(embedding(q), r);
}

int SampleDB::insert(const ContactSample& s) {
  const int id = static_cast<int>(samples_.size());
  samples_.push_back(s);
  index_.insert(embedding(s.q), id);
  if (s.kind == SampleKind::seed) {
    ++meta_.seeds;
  } else {
    ++meta_.propagated;
  }
  return id;
}

SampleDB SampleDB::prefix(std::size_t n) const {
  DbMeta meta = meta_;
  meta.seeds = meta.propagated = 0;
  SampleDB out(meta);
  for (std::size_t i = 0; i < std::min(n, samples_.size()); ++i) out.insert(samples_[i]);
  return out;
}

void SampleDB::write(std::ostream& out) const {
  ojson header;
  header["format_version"] = kFormatVersion;
  header["mesh_hash_A"] = hash_to_hex(meta_.mesh_hash_a);
  header["mesh_hash_B"] = hash_to_hex(meta_.mesh_hash_b);
  header["mode"] = to_string(meta_.mode);
  header["metric"] = to_string(meta_.metric);
  header["r"] = meta_.r;
  header["sigma"] = meta_.sigma;
  header["rng_seed"] = meta_.rng_seed;
  header["step"] = meta_.step.to_string();
  header["counts"] = {{"samples", samples_.size()},
                      {"seeds", meta_.seeds},
                      {"propagated", meta_.propagated}};
  out << header.dump() << '\n';
  for (const auto& s : samples_) {
    ojson rec;
    const auto q = s.q.to_array();
    rec["q"] = q;
    rec["anchor"] = {s.anchor.triangle, s.anchor.bary[0], s.anchor.bary[1]};
    rec["vertex_B"] = s.vertex_b;
    if (meta_.mode == Mode::translational) {
      rec["rel_orient"] = s.theta;
    } else {
      rec["rel_orient"] = {s.rel.w(), s.rel.x(), s.rel.y(), s.rel.z()};
    }
    rec["kind"] = kind_name(s.kind);
    out << rec.dump() << '\n';
  }
}

void SampleDB::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write(out);
  if (!out) throw Error("write failed: " + path.string());
}

SampleDB SampleDB::read(std::istream& in, const TriMesh& A, const TriMesh& B) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty sample database");
  DbMeta meta;
  std::size_t expected = 0;
  try {
    const auto h = ojson::parse(line);
    const int version = h.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw DataMismatchError("sample database format version " + std::to_string(version) +
                              ", expected " + std::to_string(kFormatVersion));
    }
    meta.mesh_hash_a = hex_to_hash(h.at("mesh_hash_A").get<std::string>());
    meta.mesh_hash_b = hex_to_hash(h.at("mesh_hash_B").get<std::string>());
    meta.mode = parse_mode(h.at("mode").get<std::string>());
    meta.metric = parse_metric(h.at("metric").get<std::string>());
    meta.r = h.at("r").get<double>();
    meta.sigma = h.at("sigma").get<double>();
    meta.rng_seed = h.at("rng_seed").get<std::uint64_t>();
    meta.step = StepPolicy::parse(h.at("step").get<std::string>());
    expected = h.at("counts").at("samples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed sample database header: ") + e.what());
  }
  if (meta.mesh_hash_a != A.hash() || meta.mesh_hash_b != B.hash()) {
    throw DataMismatchError("sample database was built for different meshes (hash " +
                            hash_to_hex(meta.mesh_hash_a) + "/" + hash_to_hex(meta.mesh_hash_b) +
                            ", given " + hash_to_hex(A.hash()) + "/" + hash_to_hex(B.hash()) +
                            ")");
  }

  SampleDB db(meta);
  db.meta_.seeds = db.meta_.propagated = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto rec = ojson::parse(line);
      ContactSample s;
      s.q = Configuration::from_array(rec.at("q").get<std::array<double, 7>>(), meta.mode);
      const auto& anchor = rec.at("anchor");
      s.anchor.triangle = anchor.at(0).get<int>();
      const double b0 = anchor.at(1).get<double>(), b1 = anchor.at(2).get<double>();
      s.anchor.bary = {b0, b1, 1.0 - b0 - b1};
      s.vertex_b = rec.at("vertex_B").get<int>();
      if (meta.mode == Mode::translational) {
        s.theta = rec.at("rel_orient").get<double>();
      } else {
        const auto r = rec.at("rel_orient").get<std::array<double, 4>>();
        s.rel = Quat(r[0], r[1], r[2], r[3]);
      }
      const auto kind = rec.at("kind").get<std::string>();
      if (kind != "seed" && kind != "propagated") throw ParseError("bad sample kind " + kind);
      s.kind = kind == "seed" ? SampleKind::seed : SampleKind::propagated;
      if (s.anchor.triangle < 0 || s.anchor.triangle >= static_cast<int>(A.triangle_count()) ||
          s.vertex_b < 0 || s.vertex_b >= static_cast<int>(B.vertex_count())) {
        throw ParseError("feature index out of range");
      }
      db.insert(s);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("sample database line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("sample database line " + std::to_string(lineno) + ": " + e.what());
    } catch (const PreconditionError& e) {
      throw ParseError("sample database line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (db.size() != expected) {
    throw ParseError("sample database holds " + std::to_string(db.size()) + " samples, header says " +
                     std::to_string(expected));
  }
  return db;
}

SampleDB SampleDB::read(const std::filesystem::path& path, const TriMesh& A, const TriMesh& B) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return read(in, A, B);
}

}  // namespace propd
