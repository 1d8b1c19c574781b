#pragma once

#include <array>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hdgnn/graph.hpp"
#include "hdgnn/nn.hpp"
#include "hdgnn/sampler.hpp"

namespace hdgnn {

struct EncoderConfig {
  int d_h = 64;   // content hidden size per direction; F(n) has 2*d_h entries
  int d_s = 128;  // per-type neighbor aggregate size (d_s/2 per direction)
  int d_c = 128;  // shared attention dimension
  int d_e = 128;  // output embedding dimension
  int heads = 4;
};

struct AttentionTrace {
  // per head, the softmax weights over {self, paper agg, author agg, venue agg}
  std::vector<std::array<double, 4>> weights;
};

class NodeEncoder {
 public:
  // creates parameters in a fixed order when the store lacks them, otherwise reuses them
  NodeEncoder(const HeteroGraph& g, const EncoderConfig& cfg, ad::ParameterStore& store, Rng& rng);

  // F(n): per-slot MLPs followed by a Bi-GRU over the slot sequence, mean-pooled
  ad::Value content_embedding(ad::Tape& t, NodeId n) const;

  // E(n): per-kind neighbor Bi-GRUs over sampled sets + multi-head attention fusion.
  // `content` supplies F(m) on the same tape (differentiable or cached constant).
  ad::Value fuse(ad::Tape& t, NodeId n, const NeighborSets& sets,
                 const std::function<ad::Value(ad::Tape&, NodeId)>& content,
                 AttentionTrace* trace = nullptr) const;

  // fully differentiable E(n) (memoizes F within the tape)
  ad::Value embed(ad::Tape& t, NodeId n, const NeighborSets& sets,
                  AttentionTrace* trace = nullptr) const;

  // forward-only embedding table for the whole graph
  std::vector<ad::Array> encode_all(const std::vector<NeighborSets>& sets) const;

  const EncoderConfig& config() const { return cfg_; }
  const HeteroGraph& graph() const { return *g_; }

 private:
  ad::Value type_aggregate(ad::Tape& t, const std::vector<NodeId>& members, NodeKind kind,
                           const std::function<ad::Value(ad::Tape&, NodeId)>& content) const;

  const HeteroGraph* g_;
  EncoderConfig cfg_;
  ad::ParameterStore* store_;
  std::array<std::vector<ad::Mlp>, kNodeKinds> slot_mlps_;  // per kind, per feature slot
  ad::BiGru content_gru_;
  std::array<ad::BiGru, kNodeKinds> nbr_gru_;
  int proj_self_ = -1;
  std::array<int, kNodeKinds> proj_kind_{-1, -1, -1};
  std::vector<int> att_u_;
  int out_w_ = -1;
  int out_b_ = -1;
};

void save_embeddings(const std::vector<ad::Array>& emb, const std::string& path);
std::vector<ad::Array> load_embeddings(const std::string& path);

// -log sigmoid(center . context) - sum_m log sigmoid(-center . m)
ad::Value skipgram_pair_loss(ad::Tape& t, ad::Value center, ad::Value context,
                             const std::vector<ad::Value>& negatives);

// draws nodes of a kind proportional to in_degree^0.75 (uniform when all degrees are zero)
class NegativeSampler {
 public:
  explicit NegativeSampler(const HeteroGraph& g);
  NodeId draw(NodeKind kind, Rng& rng) const;

 private:
  std::array<std::vector<NodeId>, kNodeKinds> members_;
  std::array<std::vector<double>, kNodeKinds> cumulative_;
};

struct PretrainConfig {
  int window = 5;
  int negatives = 2;
  int epochs = 1;
  int max_pairs = 2000;  // per-epoch cap; each pair differentiates through the encoder
  double lr = 0.025;
  std::uint64_t seed = 0;
};

// SGD over the skip-gram objective on the walk corpus; returns the mean loss of the last epoch
double pretrain_skipgram(const NodeEncoder& enc, ad::ParameterStore& store,
                         const std::vector<std::vector<NodeId>>& corpus,
                         const std::vector<NeighborSets>& sets, const PretrainConfig& cfg);

}  // namespace hdgnn
