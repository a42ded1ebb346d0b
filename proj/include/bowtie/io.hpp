#ifndef BOWTIE_IO_HPP
#define BOWTIE_IO_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "bowtie/attributes.hpp"
#include "bowtie/bowtie.hpp"
#include "bowtie/graph.hpp"
#include "bowtie/strength.hpp"

namespace bowtie {

// Dense-index remapping emitted at ingestion. Original ids are opaque strings;
// numeric-looking id sets are ordered numerically, otherwise lexicographically.
struct NodeMap {
  std::vector<std::string> dense_to_orig;
  std::unordered_map<std::string, NodeId> orig_to_dense;

  static NodeMap identity(std::size_t n);
  NodeId require(const std::string& orig) const;
  bool contains(const std::string& orig) const {
    return orig_to_dense.find(orig) != orig_to_dense.end();
  }
};

struct LoadedGraph {
  WeightedGraph graph;
  NodeMap nodemap;
};

// Weighted edge list: `src,dst,weight` with header.
LoadedGraph load_edge_list_csv(const std::string& path);

// Multiplex records: `src,dst,layer`. The optional manifest maps layer names
// to indices 0..11 (`layer,index` with header); without one, the layer field
// must already be an integer index.
LoadedGraph load_multiplex_csv(const std::string& path, const std::string& manifest_path = "");

// CDR daily records: `date,caller,callee,duration_min,calls,sms,mms`. Weight
// is the summed duration; pairs whose total duration is 0 never enter.
LoadedGraph load_cdr_csv(const std::string& path);

// Attributes: `node,age,sex,zip,household`, empty field = missing, sex in
// {M,F}. Node ids are original ids resolved via the map; unknown ids are
// ignored (attribute rows may cover a superset of the graph).
AttributeTable load_attributes_csv(const std::string& path, const NodeMap& map);

void write_nodemap_csv(const NodeMap& map, const std::string& path);
NodeMap load_nodemap_csv(const std::string& path);

// Canonical weighted edge list (dense ids, src<dst sorted). `provenance`, when
// nonempty, is emitted as a leading `# ...` comment; readers skip comments.
void write_edge_list_csv(const WeightedGraph& g, const std::string& path,
                         const std::string& provenance = "");

void write_attributes_csv(const AttributeTable& attrs, const std::string& path,
                          const std::string& provenance = "");
AttributeTable load_attributes_dense_csv(const std::string& path, std::size_t node_count);

// Feature matrix: `src,dst` then the Table-1 columns; missing cells empty.
void write_feature_csv(const FeatureMatrix& fm, const std::string& path,
                       const std::string& schema_path = "",
                       const std::string& provenance = "");
FeatureMatrix load_feature_csv(const std::string& path);

// Target rows: `src,dst,orientation,value`, orientation in {ij,ji,sym}.
void write_target_csv(const TieStrengthTarget& t, const std::string& path,
                      const std::string& provenance = "");
TieStrengthTarget load_target_csv(const std::string& path);

// shortest round-trip decimal form
std::string format_double(double v);

} // namespace bowtie

#endif
