#include "bwc/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bwc/errors.hpp"

namespace bwc {

using nlohmann::json;

namespace {

std::string at(const std::string& path, const std::string& msg) { return path + ": " + msg; }

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ArgumentError(at(path, "expected an object"));
  auto it = obj.find(key);
  if (it == obj.end()) throw ArgumentError(at(path, std::string("missing field '") + key + "'"));
  return *it;
}

int int_field(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_number_integer()) throw ArgumentError(at(path + "." + key, "expected an integer"));
  return v.get<int>();
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

std::string circuit_to_json(const BrickwallCircuit& c, const std::string& config_hash) {
  json j;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["n"] = c.n_sites;
  j["depth"] = c.depth;
  json layers = json::array();
  for (int m = 1; m <= c.depth; ++m) {
    json layer = json::array();
    for (int k = 0; k < c.gates_in_layer(m); ++k) {
      const MatrixXc& g = c.layers[m - 1][k];
      json u = json::array();
      for (int r = 0; r < 4; ++r)
        for (int s = 0; s < 4; ++s) {
          u.push_back(g(r, s).real());
          u.push_back(g(r, s).imag());
        }
      layer.push_back({{"sites", {c.bond(m, k), c.bond(m, k) + 1}}, {"u", u}});
    }
    layers.push_back(layer);
  }
  j["layers"] = layers;
  return j.dump(1) + "\n";
}

BrickwallCircuit circuit_from_json(const std::string& text) {
  json j = parse_json(text);
  const int n = int_field(j, "n", "circuit");
  const int depth = int_field(j, "depth", "circuit");
  if (n < 2) throw ArgumentError("circuit.n: need at least 2 sites");
  if (depth < 1) throw ArgumentError("circuit.depth: must be positive");
  const json& layers = field(j, "layers", "circuit");
  if (!layers.is_array() || static_cast<int>(layers.size()) != depth)
    throw ArgumentError("circuit.layers: expected " + std::to_string(depth) + " layers");
  BrickwallCircuit c(n, depth);
  for (int m = 1; m <= depth; ++m) {
    const json& layer = layers[m - 1];
    const std::string lp = "circuit.layers[" + std::to_string(m - 1) + "]";
    if (!layer.is_array() || static_cast<int>(layer.size()) != c.gates_in_layer(m))
      throw ArgumentError(at(lp, "expected " + std::to_string(c.gates_in_layer(m)) + " gates"));
    for (int k = 0; k < c.gates_in_layer(m); ++k) {
      const std::string gp = lp + "[" + std::to_string(k) + "]";
      const json& sites = field(layer[k], "sites", gp);
      if (!sites.is_array() || sites.size() != 2 || !sites[0].is_number_integer() || !sites[1].is_number_integer() ||
          sites[0].get<int>() != c.bond(m, k) || sites[1].get<int>() != c.bond(m, k) + 1)
        throw ArgumentError(at(gp + ".sites", "expected [" + std::to_string(c.bond(m, k)) + ", " +
                                                  std::to_string(c.bond(m, k) + 1) + "]"));
      const json& u = field(layer[k], "u", gp);
      if (!u.is_array() || u.size() != 32) throw ArgumentError(at(gp + ".u", "expected 32 numbers"));
      MatrixXc g(4, 4);
      for (int e = 0; e < 16; ++e) {
        if (!u[2 * e].is_number() || !u[2 * e + 1].is_number())
          throw ArgumentError(at(gp + ".u[" + std::to_string(2 * e) + "]", "expected a number"));
        g(e / 4, e % 4) = cplx(u[2 * e].get<double>(), u[2 * e + 1].get<double>());
      }
      if (!g.allFinite()) throw ArgumentError(at(gp + ".u", "non-finite entry"));
      c.layers[m - 1][k] = g;
    }
  }
  return c;
}

std::string mpo_to_json(const Mpo& m) {
  json j;
  j["n"] = m.n_sites();
  json sites = json::array();
  for (const auto& t : m.tensors()) {
    json data = json::array();
    for (const auto& v : t.data()) {
      data.push_back(v.real());
      data.push_back(v.imag());
    }
    sites.push_back({{"shape", t.shape()}, {"data", data}});
  }
  j["sites"] = sites;
  return j.dump() + "\n";
}

Mpo mpo_from_json(const std::string& text) {
  json j = parse_json(text);
  const int n = int_field(j, "n", "mpo");
  const json& sites = field(j, "sites", "mpo");
  if (!sites.is_array() || static_cast<int>(sites.size()) != n) throw ArgumentError("mpo.sites: expected n entries");
  std::vector<DenseTensor> ts;
  for (int s = 0; s < n; ++s) {
    const std::string sp = "mpo.sites[" + std::to_string(s) + "]";
    Shape shape;
    try {
      shape = field(sites[s], "shape", sp).get<Shape>();
    } catch (const json::exception&) {
      throw ArgumentError(at(sp + ".shape", "expected integer extents"));
    }
    if (shape.size() != 4) throw ArgumentError(at(sp + ".shape", "expected 4 extents"));
    const json& data = field(sites[s], "data", sp);
    std::size_t count = 1;
    for (auto e : shape) count *= e;
    if (!data.is_array() || data.size() != 2 * count) throw ArgumentError(at(sp + ".data", "size mismatch"));
    std::vector<cplx> vals(count);
    for (std::size_t e = 0; e < count; ++e) vals[e] = cplx(data[2 * e].get<double>(), data[2 * e + 1].get<double>());
    ts.emplace_back(shape, std::move(vals));
  }
  Mpo m(std::move(ts));
  m.validate();
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ArgumentError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ArgumentError("write failed for '" + path + "'");
  }
  fs::rename(tmp, p);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string target_key(const ModelTarget& t) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s|n=%d|g=%.17g|gx=%.17g|gzz=%.17g|gz1z=%.17g|dt=%.17g|sub=%d|cut=%.17g|chi=%zu|mode=%d",
                model_name(t.model).c_str(), t.n_sites, t.params.g, t.params.gx, t.params.gzz, t.params.gz1z, t.dt,
                t.mpo.substeps, t.mpo.cutoff, t.mpo.max_bond, static_cast<int>(t.mode));
  return hex64(fnv1a(buf));
}

Mpo cached_target(const ModelTarget& t, const std::string& dir) {
  if (dir.empty()) return build_target(t);
  namespace fs = std::filesystem;
  fs::path p = fs::path(dir) / ("mpo-" + target_key(t) + ".json");
  if (fs::exists(p)) {
    try {
      return mpo_from_json(read_file(p.string()));
    } catch (const std::exception&) {
      // unreadable entry: rebuild and overwrite
    }
  }
  Mpo m = build_target(t);
  write_file(p.string(), mpo_to_json(m));
  return m;
}

}  // namespace bwc
