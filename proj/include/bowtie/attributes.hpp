#ifndef BOWTIE_ATTRIBUTES_HPP
#define BOWTIE_ATTRIBUTES_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bowtie/graph.hpp"

namespace bowtie {

enum class Sex : std::uint8_t { male = 0, female = 1 };

// Per-node optional attributes. Missingness is explicit: NaN-free storage with
// sentinel codes, observed values immutable once set.
class AttributeTable {
public:
  AttributeTable() = default;
  explicit AttributeTable(std::size_t node_count)
      : age_(node_count, kMissingAge),
        sex_(node_count, kMissingSex),
        zip_(node_count),
        household_(node_count) {}

  std::size_t size() const { return age_.size(); }

  bool has_age(NodeId i) const { return age_[i] != kMissingAge; }
  double age(NodeId i) const { return age_[i]; }
  void set_age(NodeId i, double years) { age_[i] = years; }

  bool has_sex(NodeId i) const { return sex_[i] != kMissingSex; }
  Sex sex(NodeId i) const { return static_cast<Sex>(sex_[i]); }
  void set_sex(NodeId i, Sex s) { sex_[i] = static_cast<std::int8_t>(s); }

  bool has_zip(NodeId i) const { return !zip_[i].empty(); }
  const std::string& zip(NodeId i) const { return zip_[i]; }
  void set_zip(NodeId i, std::string z) { zip_[i] = std::move(z); }

  bool has_household(NodeId i) const { return !household_[i].empty(); }
  const std::string& household(NodeId i) const { return household_[i]; }
  void set_household(NodeId i, std::string h) { household_[i] = std::move(h); }

  std::size_t observed_age_count() const;
  std::size_t observed_sex_count() const;
  std::size_t observed_zip_count() const;

private:
  static constexpr double kMissingAge = -1.0;
  static constexpr std::int8_t kMissingSex = -1;

  std::vector<double> age_;
  std::vector<std::int8_t> sex_;
  std::vector<std::string> zip_;
  std::vector<std::string> household_;
};

} // namespace bowtie

#endif
