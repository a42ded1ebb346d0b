#ifndef TESTS_SUPPORT_SYNTH_HPP
#define TESTS_SUPPORT_SYNTH_HPP

// Seeded synthetic fixtures: random graphs, attribute tables, multiplex-style
// records, and scratch directories for artifact tests.

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "bowtie/attributes.hpp"
#include "bowtie/graph.hpp"
#include "bowtie/rng.hpp"

namespace testsupport {

inline std::vector<bowtie::WeightedEdge>
random_weighted_edges(std::size_t n, double p, std::uint64_t seed, double w_lo = 0.5,
                      double w_hi = 5.0) {
  bowtie::Rng rng(seed);
  std::vector<bowtie::WeightedEdge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.next_double() < p)
        edges.push_back({static_cast<bowtie::NodeId>(i), static_cast<bowtie::NodeId>(j),
                         rng.uniform(w_lo, w_hi)});
  return edges;
}

inline bowtie::WeightedGraph random_graph(std::size_t n, double p, std::uint64_t seed,
                                          double w_lo = 0.5, double w_hi = 5.0) {
  return bowtie::WeightedGraph::from_edges(random_weighted_edges(n, p, seed, w_lo, w_hi),
                                           n);
}

// integer weights in 1..12, the multiplex strength range
inline bowtie::WeightedGraph random_multiplex_graph(std::size_t n, double p,
                                                    std::uint64_t seed) {
  bowtie::Rng rng(seed);
  std::vector<bowtie::WeightedEdge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.next_double() < p)
        edges.push_back({static_cast<bowtie::NodeId>(i), static_cast<bowtie::NodeId>(j),
                         static_cast<double>(1 + rng.next_below(12))});
  return bowtie::WeightedGraph::from_edges(edges, n);
}

// Attributes over all n nodes with the given observation probabilities.
inline bowtie::AttributeTable random_attributes(std::size_t n, std::uint64_t seed,
                                                double p_age = 1.0, double p_sex = 1.0,
                                                double p_zip = 1.0,
                                                std::size_t zip_count = 5,
                                                std::size_t household_count = 0) {
  bowtie::Rng rng(seed);
  bowtie::AttributeTable attrs(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.next_double() < p_age) attrs.set_age(i, 18.0 + rng.uniform(0.0, 60.0));
    if (rng.next_double() < p_sex)
      attrs.set_sex(i, rng.next_double() < 0.5 ? bowtie::Sex::male : bowtie::Sex::female);
    if (rng.next_double() < p_zip)
      attrs.set_zip(i, "Z" + std::to_string(rng.next_below(zip_count)));
    if (household_count)
      attrs.set_household(i, "H" + std::to_string(rng.next_below(household_count)));
  }
  return attrs;
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string path() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// CSV fixtures in the ingestion formats

inline std::string edges_csv(const std::vector<bowtie::WeightedEdge>& edges) {
  std::string s = "src,dst,weight\n";
  for (const auto& e : edges)
    s += "n" + std::to_string(e.src) + ",n" + std::to_string(e.dst) + "," +
         std::to_string(e.weight) + "\n";
  return s;
}

// one multiplex record line per (edge, layer); layer column is the raw index
inline std::string multiplex_csv(const bowtie::WeightedGraph& g, std::uint64_t seed) {
  bowtie::Rng rng(seed);
  std::string s = "src,dst,layer\n";
  for (const auto& e : g.edges()) {
    const int want = static_cast<int>(e.weight);
    // pick `want` distinct layers, emitting each from a random direction
    std::vector<int> layers{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    rng.shuffle(layers);
    for (int l = 0; l < want; ++l) {
      const bool flip = rng.next_double() < 0.5;
      const auto a = flip ? e.dst : e.src;
      const auto b = flip ? e.src : e.dst;
      s += "n" + std::to_string(a) + ",n" + std::to_string(b) + "," +
           std::to_string(layers[l]) + "\n";
    }
  }
  return s;
}

inline std::string attributes_csv(const bowtie::AttributeTable& attrs) {
  std::string s = "node,age,sex,zip,household\n";
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    s += "n" + std::to_string(i) + ",";
    if (attrs.has_age(i)) s += std::to_string(attrs.age(i));
    s += ",";
    if (attrs.has_sex(i)) s += attrs.sex(i) == bowtie::Sex::female ? "F" : "M";
    s += ",";
    if (attrs.has_zip(i)) s += attrs.zip(i);
    s += ",";
    if (attrs.has_household(i)) s += attrs.household(i);
    s += "\n";
  }
  return s;
}

} // namespace testsupport

#endif
