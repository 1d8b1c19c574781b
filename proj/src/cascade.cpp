#include "hdgnn/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "hdgnn/errors.hpp"

namespace hdgnn {

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::optional<Split> split_from(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

EmbedFn table_lookup(const std::vector<ad::Array>& table) {
  auto shared = std::make_shared<std::vector<ad::Array>>(table);
  return [shared](ad::Tape& t, NodeId n) -> ad::Value {
    if (n >= shared->size()) throw DataError("no embedding for node " + std::to_string(n));
    return t.constant((*shared)[n]);
  };
}

CascadeModel::CascadeModel(int d_e, const ModelConfig& cfg, ad::ParameterStore& store, Rng& rng)
    : cfg_(cfg), d_e_(d_e), store_(&store) {
  event_dim_ = d_e * (1 + (cfg.use_author ? 1 : 0) + (cfg.use_venue ? 1 : 0));
  rep_dim_ = cfg.aggregator == Aggregator::Rnn ? 2 * cfg.units2 : event_dim_;
  bool fresh = store.find("cas.head.W1") < 0;
  if (fresh) {
    if (cfg.use_author) author_gru_ = ad::Gru::create(store, "cas.author", d_e, d_e, rng);
    if (cfg.aggregator == Aggregator::Rnn) {
      layer1_ = ad::BiGru::create(store, "cas.l1", event_dim_, cfg.units1, rng);
      layer2_ = ad::BiGru::create(store, "cas.l2", 2 * cfg.units1, cfg.units2, rng);
    }
    auto dim = [](int n) { return static_cast<std::size_t>(n); };
    head_w1_ = store.create_glorot("cas.head.W1", dim(cfg.mlp1), dim(rep_dim_), rng);
    head_b1_ = store.create_zeros("cas.head.b1", {dim(cfg.mlp1)});
    head_w2_ = store.create_glorot("cas.head.W2", dim(cfg.mlp2), dim(cfg.mlp1), rng);
    head_b2_ = store.create_zeros("cas.head.b2", {dim(cfg.mlp2)});
    head_w3_ = store.create_glorot("cas.head.W3", 1, dim(cfg.mlp2), rng);
    head_b3_ = store.create_zeros("cas.head.b3", {1});
  } else {
    if (cfg.use_author) author_gru_ = ad::Gru::find(store, "cas.author");
    if (cfg.aggregator == Aggregator::Rnn) {
      layer1_ = ad::BiGru::find(store, "cas.l1");
      layer2_ = ad::BiGru::find(store, "cas.l2");
    }
    head_w1_ = store.require("cas.head.W1");
    head_b1_ = store.require("cas.head.b1");
    head_w2_ = store.require("cas.head.W2");
    head_b2_ = store.require("cas.head.b2");
    head_w3_ = store.require("cas.head.W3");
    head_b3_ = store.require("cas.head.b3");
  }
}

ad::Value CascadeModel::aggregate_authors(ad::Tape& t, const CitingEvent& ev,
                                          const EmbedFn& emb) const {
  if (!cfg_.use_author) throw ConfigError("author aggregation is disabled in this variant");
  if (ev.authors.empty()) throw DataError("citing event has an empty author list");
  std::size_t n = std::min<std::size_t>(ev.authors.size(),
                                        static_cast<std::size_t>(cfg_.author_seq_len));
  std::vector<ad::Value> xs;
  xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) xs.push_back(emb(t, ev.authors[i]));
  return author_gru_.last_state(t, *store_, xs);
}

ad::Value CascadeModel::encode_cascade(ad::Tape& t, const Cascade& c, const EmbedFn& emb) const {
  if (c.events.empty()) throw DataError("cascade has no citing events");
  std::vector<ad::Value> xs;
  xs.reserve(c.events.size() + 1);
  if (cfg_.prepend_target) {
    std::vector<ad::Value> blocks{emb(t, c.target)};
    ad::Value zero = t.constant(ad::Array::zeros({static_cast<std::size_t>(d_e_)}));
    if (cfg_.use_author) blocks.push_back(zero);
    if (cfg_.use_venue) blocks.push_back(zero);
    xs.push_back(t.concat(blocks));
  }
  for (const CitingEvent& ev : c.events) {
    std::vector<ad::Value> blocks{emb(t, ev.paper)};
    if (cfg_.use_author) blocks.push_back(aggregate_authors(t, ev, emb));
    if (cfg_.use_venue) blocks.push_back(emb(t, ev.venue));
    xs.push_back(blocks.size() == 1 ? blocks[0] : t.concat(blocks));
  }
  switch (cfg_.aggregator) {
    case Aggregator::MaxPool:
      return t.max_pool(xs);
    case Aggregator::SumPool:
      return t.sum_pool(xs);
    case Aggregator::Rnn:
      break;
  }
  std::vector<ad::Value> h1 = layer1_.run(t, *store_, xs);
  std::vector<ad::Value> h2 = layer2_.run(t, *store_, h1);
  std::size_t u2 = static_cast<std::size_t>(cfg_.units2);
  // forward state after the last event, backward state after the first
  return t.concat({t.slice(h2.back(), 0, u2), t.slice(h2.front(), u2, u2)});
}

ad::Value CascadeModel::predict_log2(ad::Tape& t, ad::Value rep) const {
  ad::ParameterStore& s = *store_;
  ad::Value h1 = t.gelu(t.add(t.matmul(t.param(s, head_w1_), rep), t.param(s, head_b1_)));
  ad::Value h2 = t.gelu(t.add(t.matmul(t.param(s, head_w2_), h1), t.param(s, head_b2_)));
  return t.add(t.matmul(t.param(s, head_w3_), h2), t.param(s, head_b3_));
}

double CascadeModel::predict_count(const Cascade& c, const EmbedFn& emb) const {
  ad::Tape t;
  ad::Value y = predict_log2(t, encode_cascade(t, c, emb));
  return std::exp2(t.value(y).data[0]);
}

ad::Value training_loss(ad::Tape& t, const std::vector<ad::Value>& y_log2,
                        const std::vector<double>& labels) {
  if (y_log2.empty() || y_log2.size() != labels.size())
    throw DataError("training loss needs matching, nonempty predictions and labels");
  std::vector<double> target(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!(labels[i] > 0.0)) throw DataError("citation labels must be positive");
    target[i] = std::log2(labels[i]);
  }
  ad::Value pred = y_log2.size() == 1 ? y_log2[0] : t.concat(y_log2);
  return t.reduce_mean(t.square(t.sub(pred, t.constant(ad::Array::vec(std::move(target))))));
}

TrainResult train_cascade(const CascadeModel& model, ad::ParameterStore& store,
                          const std::vector<Cascade>& samples, const EmbedFn& emb,
                          const TrainConfig& tcfg) {
  if (tcfg.optimizer != "adam" && tcfg.optimizer != "sgd")
    throw ConfigError("unknown optimizer: " + tcfg.optimizer);
  if (tcfg.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label == 0) throw DataError("citation labels must be positive");
    if (samples[i].split == Split::Train) train_idx.push_back(i);
    if (samples[i].split == Split::Val) val_idx.push_back(i);
  }
  if (train_idx.empty()) throw DataError("no training samples");
  if (val_idx.empty()) throw DataError("no validation samples");

  auto forward_loss = [&](const Cascade& c) {
    ad::Tape t;
    ad::Value y = model.predict_log2(t, model.encode_cascade(t, c, emb));
    double err = t.value(y).data[0] - std::log2(static_cast<double>(c.label));
    return err * err;
  };

  TrainResult res;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_params = store.snapshot_values();
  int since_best = 0;
  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    Rng shuf = Rng::substream(tcfg.seed, 0x65706f6368ull, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuf.next_below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(tcfg.batch_size)) {
      std::size_t bs = std::min<std::size_t>(tcfg.batch_size, order.size() - b);
      store.zero_grad();
      for (std::size_t i = 0; i < bs; ++i) {
        const Cascade& c = samples[order[b + i]];
        ad::Tape t;
        ad::Value y = model.predict_log2(t, model.encode_cascade(t, c, emb));
        ad::Value loss = training_loss(t, {y}, {static_cast<double>(c.label)});
        double lv = t.value(loss).data[0];
        if (!std::isfinite(lv)) throw NumericError("training loss is not finite");
        epoch_loss += lv;
        t.backward(loss, 1.0 / static_cast<double>(bs));
      }
      if (tcfg.optimizer == "adam")
        store.adam_step(tcfg.lr);
      else
        store.sgd_step(tcfg.lr);
    }
    res.train_curve.push_back(epoch_loss / static_cast<double>(train_idx.size()));

    double val_loss = 0.0;
    for (std::size_t i : val_idx) val_loss += forward_loss(samples[i]);
    val_loss /= static_cast<double>(val_idx.size());
    if (!std::isfinite(val_loss)) throw NumericError("validation loss is not finite");
    res.val_curve.push_back(val_loss);

    if (val_loss < best) {
      best = val_loss;
      res.best_epoch = epoch;
      since_best = 0;
      best_params = store.snapshot_values();
    } else if (++since_best >= tcfg.patience) {
      break;
    }
  }
  res.epochs_run = static_cast<int>(res.train_curve.size());
  res.best_val = best;
  store.restore_values(best_params);
  return res;
}

std::vector<std::pair<double, double>> predict_pairs(const CascadeModel& model,
                                                     const std::vector<Cascade>& samples,
                                                     Split split, const EmbedFn& emb) {
  std::vector<std::pair<double, double>> out;
  for (const Cascade& c : samples) {
    if (c.split != split) continue;
    out.emplace_back(model.predict_count(c, emb), static_cast<double>(c.label));
  }
  return out;
}

}  // namespace hdgnn
