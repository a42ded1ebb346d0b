#include "bowtie/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <utility>

#include "bowtie/error.hpp"

namespace bowtie {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

struct CsvReader {
  std::ifstream in;
  std::string path;
  std::size_t lineno = 0;

  explicit CsvReader(const std::string& p) : in(p), path(p) {
    if (!in) throw ParseError("cannot open " + p);
  }

  // skips comment lines starting with '#'
  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line[0] == '#') continue;
      if (line.empty() || line == "\r") continue;
      fields = split_line(line);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(path + ":" + std::to_string(lineno) + ": " + msg);
  }

  void expect_header(const std::vector<std::string>& names) {
    std::vector<std::string> fields;
    if (!next(fields)) fail("missing header");
    if (fields.size() < names.size()) fail("short header");
    for (std::size_t k = 0; k < names.size(); ++k)
      if (fields[k] != names[k])
        fail("expected header column '" + names[k] + "', found '" + fields[k] + "'");
  }
};

double parse_double(const CsvReader& r, const std::string& s, const char* what) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    r.fail(std::string("bad ") + what + " value '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const CsvReader& r, const std::string& s, const char* what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    r.fail(std::string("bad ") + what + " value '" + s + "'");
  return v;
}

bool all_numeric(const std::vector<std::string>& ids) {
  for (const auto& s : ids) {
    if (s.empty()) return false;
    for (char c : s)
      if (c < '0' || c > '9') return false;
  }
  return true;
}

NodeMap build_nodemap(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (all_numeric(ids)) {
    std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
      if (a.size() != b.size()) return a.size() < b.size();
      return a < b;
    });
  }
  NodeMap map;
  map.dense_to_orig = std::move(ids);
  map.orig_to_dense.reserve(map.dense_to_orig.size());
  for (std::size_t k = 0; k < map.dense_to_orig.size(); ++k)
    map.orig_to_dense.emplace(map.dense_to_orig[k], static_cast<NodeId>(k));
  return map;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  return out;
}

void write_provenance(std::ofstream& out, const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << "\n";
}

} // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

NodeMap NodeMap::identity(std::size_t n) {
  NodeMap map;
  map.dense_to_orig.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    map.dense_to_orig[k] = std::to_string(k);
    map.orig_to_dense.emplace(map.dense_to_orig[k], static_cast<NodeId>(k));
  }
  return map;
}

NodeId NodeMap::require(const std::string& orig) const {
  auto it = orig_to_dense.find(orig);
  if (it == orig_to_dense.end())
    throw ParseError("node id '" + orig + "' not present in node map");
  return it->second;
}

LoadedGraph load_edge_list_csv(const std::string& path) {
  CsvReader r(path);
  r.expect_header({"src", "dst", "weight"});
  struct Raw {
    std::string src, dst;
    double w;
  };
  std::vector<Raw> raw;
  std::vector<std::string> fields, ids;
  while (r.next(fields)) {
    if (fields.size() != 3) r.fail("expected 3 fields");
    double w = parse_double(r, fields[2], "weight");
    raw.push_back({fields[0], fields[1], w});
    ids.push_back(fields[0]);
    ids.push_back(fields[1]);
  }
  NodeMap map = build_nodemap(std::move(ids));
  std::vector<WeightedEdge> edges;
  edges.reserve(raw.size());
  for (const auto& e : raw)
    edges.push_back({map.require(e.src), map.require(e.dst), e.w});
  return {WeightedGraph::from_edges(edges, map.dense_to_orig.size()), std::move(map)};
}

LoadedGraph load_multiplex_csv(const std::string& path, const std::string& manifest_path) {
  std::unordered_map<std::string, std::uint32_t> layer_names;
  if (!manifest_path.empty()) {
    CsvReader mr(manifest_path);
    mr.expect_header({"layer", "index"});
    std::vector<std::string> fields;
    while (mr.next(fields)) {
      if (fields.size() != 2) mr.fail("expected 2 fields");
      std::uint64_t idx = parse_u64(mr, fields[1], "layer index");
      if (idx >= kMultiplexLayerCount)
        mr.fail("layer index " + fields[1] + " out of range 0.." +
                std::to_string(kMultiplexLayerCount - 1));
      layer_names[fields[0]] = static_cast<std::uint32_t>(idx);
    }
  }

  CsvReader r(path);
  r.expect_header({"src", "dst", "layer"});
  struct Raw {
    std::string src, dst;
    std::uint32_t layer;
  };
  std::vector<Raw> raw;
  std::vector<std::string> fields, ids;
  while (r.next(fields)) {
    if (fields.size() != 3) r.fail("expected 3 fields");
    std::uint32_t layer;
    auto it = layer_names.find(fields[2]);
    if (it != layer_names.end()) {
      layer = it->second;
    } else {
      std::uint64_t idx = parse_u64(r, fields[2], "layer");
      if (idx >= kMultiplexLayerCount)
        r.fail("layer index " + fields[2] + " out of range 0.." +
               std::to_string(kMultiplexLayerCount - 1));
      layer = static_cast<std::uint32_t>(idx);
    }
    raw.push_back({fields[0], fields[1], layer});
    ids.push_back(fields[0]);
    ids.push_back(fields[1]);
  }
  NodeMap map = build_nodemap(std::move(ids));
  std::vector<MultiplexRecord> records;
  records.reserve(raw.size());
  for (const auto& e : raw)
    records.push_back({map.require(e.src), map.require(e.dst), e.layer});
  return {WeightedGraph::from_multiplex(records, map.dense_to_orig.size()), std::move(map)};
}

LoadedGraph load_cdr_csv(const std::string& path) {
  CsvReader r(path);
  r.expect_header({"date", "caller", "callee", "duration_min", "calls", "sms", "mms"});
  // accumulate total duration per unordered pair of original ids
  std::map<std::pair<std::string, std::string>, double> totals;
  std::vector<std::string> fields;
  while (r.next(fields)) {
    if (fields.size() != 7) r.fail("expected 7 fields");
    double dur = parse_double(r, fields[3], "duration_min");
    if (dur < 0) r.fail("negative duration");
    if (fields[1] == fields[2]) r.fail("caller equals callee");
    auto key = std::minmax(fields[1], fields[2]);
    totals[{key.first, key.second}] += dur;
  }
  std::vector<std::string> ids;
  for (const auto& [pair, dur] : totals) {
    if (dur <= 0) continue; // spoke-at-least-once rule: duration must be positive
    ids.push_back(pair.first);
    ids.push_back(pair.second);
  }
  NodeMap map = build_nodemap(std::move(ids));
  std::vector<WeightedEdge> edges;
  for (const auto& [pair, dur] : totals) {
    if (dur <= 0) continue;
    edges.push_back({map.require(pair.first), map.require(pair.second), dur});
  }
  return {WeightedGraph::from_edges(edges, map.dense_to_orig.size()), std::move(map)};
}

AttributeTable load_attributes_csv(const std::string& path, const NodeMap& map) {
  CsvReader r(path);
  r.expect_header({"node", "age", "sex", "zip", "household"});
  AttributeTable attrs(map.dense_to_orig.size());
  std::vector<std::string> fields;
  while (r.next(fields)) {
    if (fields.size() != 5) r.fail("expected 5 fields");
    if (!map.contains(fields[0])) continue;
    NodeId node = map.require(fields[0]);
    if (!fields[1].empty()) attrs.set_age(node, parse_double(r, fields[1], "age"));
    if (!fields[2].empty()) {
      if (fields[2] == "M")
        attrs.set_sex(node, Sex::male);
      else if (fields[2] == "F")
        attrs.set_sex(node, Sex::female);
      else
        r.fail("sex must be M or F, found '" + fields[2] + "'");
    }
    if (!fields[3].empty()) attrs.set_zip(node, fields[3]);
    if (!fields[4].empty()) attrs.set_household(node, fields[4]);
  }
  return attrs;
}

void write_nodemap_csv(const NodeMap& map, const std::string& path) {
  auto out = open_out(path);
  out << "node,original_id\n";
  for (std::size_t k = 0; k < map.dense_to_orig.size(); ++k)
    out << k << "," << map.dense_to_orig[k] << "\n";
}

NodeMap load_nodemap_csv(const std::string& path) {
  CsvReader r(path);
  r.expect_header({"node", "original_id"});
  NodeMap map;
  std::vector<std::string> fields;
  while (r.next(fields)) {
    if (fields.size() != 2) r.fail("expected 2 fields");
    std::uint64_t dense = parse_u64(r, fields[0], "node");
    if (dense != map.dense_to_orig.size()) r.fail("node map indices must be 0,1,2,...");
    map.dense_to_orig.push_back(fields[1]);
    map.orig_to_dense.emplace(fields[1], static_cast<NodeId>(dense));
  }
  return map;
}

void write_edge_list_csv(const WeightedGraph& g, const std::string& path,
                         const std::string& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  out << "src,dst,weight\n";
  for (const auto& e : g.edges())
    out << e.src << "," << e.dst << "," << format_double(e.weight) << "\n";
}

void write_attributes_csv(const AttributeTable& attrs, const std::string& path,
                          const std::string& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  out << "node,age,sex,zip,household\n";
  for (NodeId i = 0; i < attrs.size(); ++i) {
    out << i << ",";
    if (attrs.has_age(i)) out << format_double(attrs.age(i));
    out << ",";
    if (attrs.has_sex(i)) out << (attrs.sex(i) == Sex::male ? "M" : "F");
    out << ",";
    if (attrs.has_zip(i)) out << attrs.zip(i);
    out << ",";
    if (attrs.has_household(i)) out << attrs.household(i);
    out << "\n";
  }
}

AttributeTable load_attributes_dense_csv(const std::string& path, std::size_t node_count) {
  return load_attributes_csv(path, NodeMap::identity(node_count));
}

void write_feature_csv(const FeatureMatrix& fm, const std::string& path,
                       const std::string& schema_path, const std::string& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  out << "src,dst";
  for (const char* name : kFeatureNames) out << "," << name;
  out << "\n";
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    auto [src, dst] = fm.edge(r);
    out << src << "," << dst;
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      out << ",";
      const double v = fm.value(r, c);
      if (!std::isnan(v)) out << format_double(v);
    }
    out << "\n";
  }
  if (!schema_path.empty()) {
    auto sout = open_out(schema_path);
    sout << "column,name,type\n";
    sout << "0,src,node\n1,dst,node\n";
    for (std::size_t c = 0; c < kFeatureCount; ++c)
      sout << (c + 2) << "," << kFeatureNames[c] << "," << kFeatureTypes[c] << "\n";
  }
}

FeatureMatrix load_feature_csv(const std::string& path) {
  CsvReader r(path);
  std::vector<std::string> header{"src", "dst"};
  for (const char* name : kFeatureNames) header.emplace_back(name);
  r.expect_header(header);
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<double> data;
  std::vector<std::string> fields;
  while (r.next(fields)) {
    if (fields.size() != 2 + kFeatureCount)
      r.fail("expected " + std::to_string(2 + kFeatureCount) + " fields");
    edges.emplace_back(static_cast<NodeId>(parse_u64(r, fields[0], "src")),
                       static_cast<NodeId>(parse_u64(r, fields[1], "dst")));
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      const std::string& s = fields[2 + c];
      data.push_back(s.empty() ? kNaN : parse_double(r, s, kFeatureNames[c]));
    }
  }
  return FeatureMatrix(std::move(edges), std::move(data));
}

void write_target_csv(const TieStrengthTarget& t, const std::string& path,
                      const std::string& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  out << "src,dst,orientation,value\n";
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto& row = t.rows()[k];
    out << row.src << "," << row.dst << "," << orientation_name(row.orientation) << ","
        << format_double(t.values()[k]) << "\n";
  }
}

TieStrengthTarget load_target_csv(const std::string& path) {
  CsvReader r(path);
  r.expect_header({"src", "dst", "orientation", "value"});
  std::vector<TargetRow> rows;
  std::vector<double> values;
  std::vector<std::string> fields;
  bool any_ij = false, any_sym = false;
  while (r.next(fields)) {
    if (fields.size() != 4) r.fail("expected 4 fields");
    Orientation o;
    if (fields[2] == "ij")
      o = Orientation::ij;
    else if (fields[2] == "ji")
      o = Orientation::ji;
    else if (fields[2] == "sym")
      o = Orientation::sym;
    else
      r.fail("orientation must be ij, ji or sym");
    (o == Orientation::sym ? any_sym : any_ij) = true;
    rows.push_back({static_cast<NodeId>(parse_u64(r, fields[0], "src")),
                    static_cast<NodeId>(parse_u64(r, fields[1], "dst")), o});
    values.push_back(parse_double(r, fields[3], "value"));
  }
  // kind is not stored in the file; oriented rows imply y, symmetric rows a
  // symmetric measure. Integer-vs-real distinction is the caller's concern.
  TargetKind kind = any_ij && !any_sym ? TargetKind::normalized_y : TargetKind::averaged_z;
  return TieStrengthTarget(kind, std::move(rows), std::move(values));
}

} // namespace bowtie
