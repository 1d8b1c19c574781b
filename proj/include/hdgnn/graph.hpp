#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hdgnn/errors.hpp"

namespace hdgnn {

using NodeId = std::uint64_t;

enum class NodeKind : std::uint8_t { Paper = 0, Author = 1, Venue = 2 };

enum class EdgeKind : std::uint8_t {
  AuthorWritesPaper = 0,
  AuthorCollabAuthor = 1,
  AuthorPublishesVenue = 2,
  AuthorCitesPaper = 3,
  PaperPublishedInVenue = 4,
  PaperCitesPaper = 5,
  PaperCitesAuthor = 6,
};

inline constexpr int kNodeKinds = 3;
inline constexpr int kEdgeKinds = 7;

const char* to_string(NodeKind k);
const char* to_string(EdgeKind k);
std::optional<NodeKind> node_kind_from(const std::string& s);
std::optional<EdgeKind> edge_kind_from(const std::string& s);
NodeKind edge_src_kind(EdgeKind k);
NodeKind edge_dst_kind(EdgeKind k);

// named feature vectors, kept sorted by name
using FeatureSet = std::vector<std::pair<std::string, std::vector<double>>>;

struct NodeRecord {
  NodeId id = 0;
  NodeKind kind = NodeKind::Paper;
  double birth_time = 0.0;
  std::string external_id;
  FeatureSet features;
};

struct EdgeRecord {
  NodeId src = 0;
  NodeId dst = 0;
  EdgeKind kind = EdgeKind::PaperCitesPaper;
  double weight = 1.0;
  double time = 0.0;
  std::uint64_t seq = 0;  // first-insertion order; drives serialization and byline order

  bool operator==(const EdgeRecord&) const = default;
};

struct Adjacent {
  NodeId other = 0;
  EdgeKind kind = EdgeKind::PaperCitesPaper;
  std::uint32_t edge = 0;  // index into edges()
};

class HeteroGraph {
 public:
  NodeId add_node(std::string external_id, NodeKind kind, double birth_time,
                  FeatureSet features = {});
  void add_edge(NodeId src, NodeId dst, EdgeKind kind, double weight, double time);
  void finalize();
  bool finalized() const { return finalized_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const NodeRecord& node(NodeId n) const;
  const std::vector<EdgeRecord>& edges() const { return edges_; }
  const EdgeRecord& edge(std::uint32_t idx) const { return edges_[idx]; }

  // sorted by (other NodeId, EdgeKind ordinal)
  std::span<const Adjacent> out_edges(NodeId n) const;
  std::span<const Adjacent> in_edges(NodeId n) const;
  std::vector<std::pair<NodeId, EdgeRecord>> neighbors(
      NodeId n, std::optional<NodeKind> kind_filter = {}) const;
  std::size_t in_degree(NodeId n) const;
  std::size_t out_degree(NodeId n) const;

  std::optional<NodeId> find_external(const std::string& id) const;
  std::vector<NodeId> authors_of_paper(NodeId paper) const;
  std::optional<NodeId> venue_of_paper(NodeId paper) const;
  const std::vector<NodeId>& nodes_of_kind(NodeKind k) const;
  double max_edge_time() const { return max_edge_time_; }

 private:
  void check_node(NodeId n) const;
  void check_not_finalized() const;

  std::vector<NodeRecord> nodes_;
  std::vector<EdgeRecord> edges_;
  std::unordered_map<std::string, NodeId> by_external_;
  std::map<std::tuple<NodeId, NodeId, std::uint8_t>, std::uint32_t> dedup_;
  std::vector<std::vector<Adjacent>> out_;
  std::vector<std::vector<Adjacent>> in_;
  std::array<std::vector<NodeId>, kNodeKinds> by_kind_;
  double max_edge_time_ = 0.0;
  bool finalized_ = false;
};

HeteroGraph load_graph(const std::string& nodes_path, const std::string& edges_path);
void save_graph(const HeteroGraph& g, const std::string& nodes_path,
                const std::string& edges_path);

// canonical float formatting shared by every text artifact (9 significant digits)
std::string format_g9(double v);
std::string json_escape(const std::string& s);

}  // namespace hdgnn
