#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hdgnn/graph.hpp"

namespace hdgnn {

struct WalkConfig {
  double q = 0.5;          // restart (backtrack) probability
  int walk_length = 30;
  int walks_per_node = 5;
  double alpha = 1.0;      // paper coefficient
  double beta = 1.0;       // author coefficient
  double gamma = 1.0;      // venue coefficient
  int k_paper = 10;
  int k_author = 10;
  int k_venue = 3;
  std::uint64_t seed = 0;
  int threads = 1;  // sources are independent, so results do not depend on this
};

struct NeighborSets {
  std::vector<NodeId> paper;
  std::vector<NodeId> author;
  std::vector<NodeId> venue;

  bool operator==(const NeighborSets&) const = default;
};

using VisitCounts = std::map<NodeId, std::uint64_t>;

double influence(const HeteroGraph& g, NodeId m, const EdgeRecord& e);

struct TransitionEntry {
  NodeId node;
  double prob;
};

struct Transition {
  std::vector<TransitionEntry> entries;  // ascending by node id
  bool dead_end = false;                 // no out-neighbors: all mass goes back to prev
};

Transition transition_distribution(const HeteroGraph& g, NodeId n, NodeId prev,
                                   const WalkConfig& cfg);

// every walk starts at `source` with prev = source; node sequences include the source
// at position 0 and one entry per step
std::vector<std::vector<NodeId>> walk_sequences(const HeteroGraph& g, NodeId source,
                                                const WalkConfig& cfg);
VisitCounts run_walks(const HeteroGraph& g, NodeId source, const WalkConfig& cfg);

NeighborSets rank_neighbor_sets(const HeteroGraph& g, NodeId source, const VisitCounts& visits,
                                const WalkConfig& cfg);
NeighborSets build_neighbor_sets(const HeteroGraph& g, NodeId source, const WalkConfig& cfg);
std::vector<NeighborSets> build_all_neighbor_sets(const HeteroGraph& g, const WalkConfig& cfg);

void save_neighbor_sets(const std::vector<NeighborSets>& sets, const std::string& path);
std::vector<NeighborSets> load_neighbor_sets(const std::string& path, int k_paper, int k_author,
                                             int k_venue);
void dump_neighbor_sets_jsonl(const std::vector<NeighborSets>& sets, const std::string& path);

}  // namespace hdgnn
