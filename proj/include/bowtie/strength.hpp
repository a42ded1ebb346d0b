#ifndef BOWTIE_STRENGTH_HPP
#define BOWTIE_STRENGTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "bowtie/graph.hpp"

namespace bowtie {

enum class TargetKind : std::uint8_t { multiplex_w, normalized_y, averaged_z };

enum class Orientation : std::uint8_t { ij, ji, sym };

struct TargetRow {
  NodeId src;
  NodeId dst;
  Orientation orientation;
};

// A response vector plus the edge orientation of each row. Values may carry a
// log-then-center transform whose center is retained for inversion.
class TieStrengthTarget {
public:
  TieStrengthTarget() = default;
  TieStrengthTarget(TargetKind kind, std::vector<TargetRow> rows, std::vector<double> values)
      : kind_(kind), rows_(std::move(rows)), values_(std::move(values)) {}

  TargetKind kind() const { return kind_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<TargetRow>& rows() const { return rows_; }
  const std::vector<double>& values() const { return values_; }

  bool log_centered() const { return log_centered_; }
  double center() const { return center_; }
  void set_transform_state(bool log_centered, double center) {
    log_centered_ = log_centered;
    center_ = center;
  }

private:
  TargetKind kind_ = TargetKind::multiplex_w;
  std::vector<TargetRow> rows_;
  std::vector<double> values_;
  bool log_centered_ = false;
  double center_ = 0.0;
};

// w_ij per edge; rejects graphs whose weights are not integers in 1..12.
TieStrengthTarget multiplex_strength(const WeightedGraph& g);

// y_ij = w_ij/s_i and y_ji = w_ij/s_j. Two rows per edge by default (both
// orientations share the edge's symmetric features); single-orientation runs
// keep only the ij row.
TieStrengthTarget normalized_strengths(const WeightedGraph& g, bool both_orientations = true);

// z_ij = (y_ij + y_ji)/2, one symmetric row per edge.
TieStrengthTarget averaged_strength(const WeightedGraph& g);

// v <- ln v - mean(ln v); the mean is stored so the transform is invertible.
TieStrengthTarget apply_log_center(const TieStrengthTarget& t);
TieStrengthTarget invert_log_center(const TieStrengthTarget& t);

const char* orientation_name(Orientation o);
const char* target_kind_name(TargetKind k);
TargetKind target_kind_from_name(const std::string& name);

} // namespace bowtie

#endif
