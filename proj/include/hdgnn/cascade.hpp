#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hdgnn/graph.hpp"
#include "hdgnn/nn.hpp"

namespace hdgnn {

struct CitingEvent {
  NodeId paper = 0;
  std::vector<NodeId> authors;  // byline order
  NodeId venue = 0;
  double time = 0.0;  // years since the target's birth
};

enum class Split { Train = 0, Val = 1, Test = 2 };

const char* to_string(Split s);
std::optional<Split> split_from(const std::string& s);

struct Cascade {
  NodeId target = 0;
  NodeKind target_kind = NodeKind::Paper;
  std::vector<CitingEvent> events;  // ascending (time, citing paper id)
  std::uint64_t label = 0;          // citation count at the prediction horizon
  Split split = Split::Train;
};

enum class Aggregator { Rnn = 0, MaxPool = 1, SumPool = 2 };

struct ModelConfig {
  int author_seq_len = 6;
  int units1 = 128;  // first Bi-GRU layer, per direction
  int units2 = 64;   // second Bi-GRU layer, per direction
  int mlp1 = 64;
  int mlp2 = 32;
  Aggregator aggregator = Aggregator::Rnn;
  bool use_author = true;
  bool use_venue = true;
  bool prepend_target = false;  // optional self-signal event at position 0
};

// embedding provider: yields E(node) as a value on the given tape
using EmbedFn = std::function<ad::Value(ad::Tape&, NodeId)>;

EmbedFn table_lookup(const std::vector<ad::Array>& table);

class CascadeModel {
 public:
  CascadeModel(int d_e, const ModelConfig& cfg, ad::ParameterStore& store, Rng& rng);

  ad::Value aggregate_authors(ad::Tape& t, const CitingEvent& ev, const EmbedFn& emb) const;
  ad::Value encode_cascade(ad::Tape& t, const Cascade& c, const EmbedFn& emb) const;
  ad::Value predict_log2(ad::Tape& t, ad::Value rep) const;
  // convenience: 2^(predicted log2 count)
  double predict_count(const Cascade& c, const EmbedFn& emb) const;

  int event_dim() const { return event_dim_; }
  int rep_dim() const { return rep_dim_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  int d_e_ = 0;
  int event_dim_ = 0;
  int rep_dim_ = 0;
  ad::ParameterStore* store_;
  ad::Gru author_gru_;
  ad::BiGru layer1_, layer2_;
  int head_w1_ = -1, head_b1_ = -1, head_w2_ = -1, head_b2_ = -1, head_w3_ = -1, head_b3_ = -1;
};

// mean over the batch of (y_i - log2 c_i)^2, with y_i the predicted log2 count
ad::Value training_loss(ad::Tape& t, const std::vector<ad::Value>& y_log2,
                        const std::vector<double>& labels);

struct TrainConfig {
  double lr = 0.01;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 10;
  std::string optimizer = "adam";  // or "sgd"
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> train_curve;
  std::vector<double> val_curve;
  int best_epoch = -1;
  double best_val = 0.0;
  int epochs_run = 0;
};

// minimizes the log2 MSE on the train split with early stopping on the val split;
// leaves the store at the best-validation parameters
TrainResult train_cascade(const CascadeModel& model, ad::ParameterStore& store,
                          const std::vector<Cascade>& samples, const EmbedFn& emb,
                          const TrainConfig& tcfg);

// (predicted count, label) pairs for every sample in the given split
std::vector<std::pair<double, double>> predict_pairs(const CascadeModel& model,
                                                     const std::vector<Cascade>& samples,
                                                     Split split, const EmbedFn& emb);

}  // namespace hdgnn
