#include "bowtie/strength.hpp"

#include <cmath>

#include "bowtie/error.hpp"

namespace bowtie {

TieStrengthTarget multiplex_strength(const WeightedGraph& g) {
  std::vector<TargetRow> rows;
  std::vector<double> values;
  rows.reserve(g.edge_count());
  values.reserve(g.edge_count());
  for (const auto& e : g.edges()) {
    const double w = e.weight;
    if (w != std::floor(w) || w < 1.0 || w > static_cast<double>(kMultiplexLayerCount))
      throw ValidationError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                            ") has weight " + std::to_string(w) +
                            "; multiplex strength requires integer weights in 1.." +
                            std::to_string(kMultiplexLayerCount));
    rows.push_back({e.src, e.dst, Orientation::sym});
    values.push_back(w);
  }
  return TieStrengthTarget(TargetKind::multiplex_w, std::move(rows), std::move(values));
}

TieStrengthTarget normalized_strengths(const WeightedGraph& g, bool both_orientations) {
  std::vector<TargetRow> rows;
  std::vector<double> values;
  const std::size_t per_edge = both_orientations ? 2 : 1;
  rows.reserve(per_edge * g.edge_count());
  values.reserve(per_edge * g.edge_count());
  for (const auto& e : g.edges()) {
    rows.push_back({e.src, e.dst, Orientation::ij});
    values.push_back(e.weight / g.strength(e.src));
    if (both_orientations) {
      rows.push_back({e.src, e.dst, Orientation::ji});
      values.push_back(e.weight / g.strength(e.dst));
    }
  }
  return TieStrengthTarget(TargetKind::normalized_y, std::move(rows), std::move(values));
}

TieStrengthTarget averaged_strength(const WeightedGraph& g) {
  std::vector<TargetRow> rows;
  std::vector<double> values;
  rows.reserve(g.edge_count());
  values.reserve(g.edge_count());
  for (const auto& e : g.edges()) {
    rows.push_back({e.src, e.dst, Orientation::sym});
    values.push_back(0.5 * (e.weight / g.strength(e.src) + e.weight / g.strength(e.dst)));
  }
  return TieStrengthTarget(TargetKind::averaged_z, std::move(rows), std::move(values));
}

TieStrengthTarget apply_log_center(const TieStrengthTarget& t) {
  if (t.log_centered()) throw ValidationError("target is already log-centered");
  std::vector<double> logs(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double v = t.values()[k];
    if (!(v > 0))
      throw ValidationError("log transform requires positive values; row " +
                            std::to_string(k) + " has " + std::to_string(v));
    logs[k] = std::log(v);
  }
  double mean = 0;
  for (double v : logs) mean += v;
  if (!logs.empty()) mean /= static_cast<double>(logs.size());
  for (double& v : logs) v -= mean;

  TieStrengthTarget out(t.kind(), t.rows(), std::move(logs));
  out.set_transform_state(true, mean);
  return out;
}

TieStrengthTarget invert_log_center(const TieStrengthTarget& t) {
  if (!t.log_centered()) throw ValidationError("target carries no log-center transform");
  std::vector<double> values(t.size());
  for (std::size_t k = 0; k < t.size(); ++k)
    values[k] = std::exp(t.values()[k] + t.center());
  TieStrengthTarget out(t.kind(), t.rows(), std::move(values));
  out.set_transform_state(false, 0.0);
  return out;
}

const char* orientation_name(Orientation o) {
  switch (o) {
    case Orientation::ij: return "ij";
    case Orientation::ji: return "ji";
    case Orientation::sym: return "sym";
  }
  return "?";
}

const char* target_kind_name(TargetKind k) {
  switch (k) {
    case TargetKind::multiplex_w: return "w";
    case TargetKind::normalized_y: return "y";
    case TargetKind::averaged_z: return "z";
  }
  return "?";
}

TargetKind target_kind_from_name(const std::string& name) {
  for (TargetKind k : {TargetKind::multiplex_w, TargetKind::normalized_y,
                       TargetKind::averaged_z})
    if (name == target_kind_name(k)) return k;
  throw ValidationError("unknown target kind '" + name + "'");
}

} // namespace bowtie
