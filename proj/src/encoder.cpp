#include "hdgnn/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hdgnn {

using ad::Array;
using ad::Tape;
using ad::Value;

namespace {

constexpr char kEmbeddingsMagic[9] = {'H', 'D', 'G', 'N', 'N', '-', 'E', 'M', '\x01'};

template <typename T>
void write_le(std::ofstream& f, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  f.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::ifstream& f) {
  T v{};
  char buf[sizeof(T)];
  f.read(buf, sizeof(T));
  if (!f) throw DataError("unexpected end of embedding file");
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

std::string kind_tag(NodeKind k) { return to_string(k); }

}  // namespace

NodeEncoder::NodeEncoder(const HeteroGraph& g, const EncoderConfig& cfg, ad::ParameterStore& store,
                         Rng& rng)
    : g_(&g), cfg_(cfg), store_(&store) {
  if (cfg.d_s % 2 != 0) throw ConfigError("d_s must be even");
  if (cfg.heads < 1) throw ConfigError("attention needs at least one head");
  bool fresh = store.find("enc.att.out.W") < 0;
  for (int k = 0; k < kNodeKinds; ++k) {
    const auto& ids = g.nodes_of_kind(static_cast<NodeKind>(k));
    if (ids.empty()) continue;
    const FeatureSet& layout = g.node(ids.front()).features;
    for (const auto& [name, vec] : layout) {
      std::string prefix = "enc.mlp." + kind_tag(static_cast<NodeKind>(k)) + "." + name;
      slot_mlps_[k].push_back(
          fresh ? ad::Mlp::create(store, prefix, static_cast<int>(vec.size()), cfg.d_h, cfg.d_h, rng)
                : ad::Mlp::find(store, prefix));
    }
  }
  content_gru_ = fresh ? ad::BiGru::create(store, "enc.content", cfg.d_h, cfg.d_h, rng)
                       : ad::BiGru::find(store, "enc.content");
  for (int k = 0; k < kNodeKinds; ++k) {
    std::string prefix = "enc.nbr." + kind_tag(static_cast<NodeKind>(k));
    nbr_gru_[k] = fresh ? ad::BiGru::create(store, prefix, 2 * cfg.d_h, cfg.d_s / 2, rng)
                        : ad::BiGru::find(store, prefix);
  }
  proj_self_ = fresh ? store.create_glorot("enc.att.proj.self.W", cfg.d_c, 2 * cfg.d_h, rng)
                     : store.require("enc.att.proj.self.W");
  for (int k = 0; k < kNodeKinds; ++k) {
    std::string name = "enc.att.proj." + kind_tag(static_cast<NodeKind>(k)) + ".W";
    proj_kind_[k] =
        fresh ? store.create_glorot(name, cfg.d_c, cfg.d_s, rng) : store.require(name);
  }
  att_u_.resize(cfg.heads);
  for (int h = 0; h < cfg.heads; ++h) {
    std::string name = "enc.att.u" + std::to_string(h);
    att_u_[h] = fresh ? store.create_glorot(name, 2 * cfg.d_c, 1, rng) : store.require(name);
    if (fresh) {
      // glorot made a [2*d_c,1] matrix; attention wants a vector
      Array& a = store.value(att_u_[h]);
      a.shape = {static_cast<std::size_t>(2 * cfg.d_c)};
    }
  }
  out_w_ = fresh ? store.create_glorot("enc.att.out.W", cfg.d_e, cfg.d_c, rng)
                 : store.require("enc.att.out.W");
  out_b_ = fresh ? store.create_zeros("enc.att.out.b", {static_cast<std::size_t>(cfg.d_e)})
                 : store.require("enc.att.out.b");
}

Value NodeEncoder::content_embedding(Tape& t, NodeId n) const {
  const NodeRecord& rec = g_->node(n);
  const auto& mlps = slot_mlps_[static_cast<int>(rec.kind)];
  if (rec.features.size() != mlps.size())
    throw DataError("node '" + rec.external_id + "': feature layout changed after encoder setup");
  std::vector<Value> hs(mlps.size());
  for (std::size_t i = 0; i < mlps.size(); ++i) {
    const std::vector<double>& raw = rec.features[i].second;
    if (raw.empty()) throw DataError("node '" + rec.external_id + "': zero-length feature");
    hs[i] = mlps[i].apply(t, *store_, t.constant(Array::vec(raw)));
  }
  std::vector<Value> states = content_gru_.run(t, *store_, hs);
  return t.mean_pool(states);
}

Value NodeEncoder::type_aggregate(Tape& t, const std::vector<NodeId>& members, NodeKind kind,
                                  const std::function<Value(Tape&, NodeId)>& content) const {
  std::vector<Value> xs(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) xs[i] = content(t, members[i]);
  std::vector<Value> states = nbr_gru_[static_cast<int>(kind)].run(t, *store_, xs);
  return t.mean_pool(states);
}

Value NodeEncoder::fuse(Tape& t, NodeId n, const NeighborSets& sets,
                        const std::function<Value(Tape&, NodeId)>& content,
                        AttentionTrace* trace) const {
  Value f_self = content(t, n);
  Value tilde_self = t.matmul(t.param(*store_, proj_self_), f_self);
  std::array<Value, 4> cand;
  cand[0] = tilde_self;
  cand[1] = t.matmul(t.param(*store_, proj_kind_[0]),
                     type_aggregate(t, sets.paper, NodeKind::Paper, content));
  cand[2] = t.matmul(t.param(*store_, proj_kind_[1]),
                     type_aggregate(t, sets.author, NodeKind::Author, content));
  cand[3] = t.matmul(t.param(*store_, proj_kind_[2]),
                     type_aggregate(t, sets.venue, NodeKind::Venue, content));

  if (trace) trace->weights.clear();
  std::vector<Value> head_outs(att_u_.size());
  for (std::size_t h = 0; h < att_u_.size(); ++h) {
    Value u = t.param(*store_, att_u_[h]);
    std::array<Value, 4> scores;
    for (int i = 0; i < 4; ++i)
      scores[i] = t.leaky_relu(t.dot(u, t.concat({tilde_self, cand[i]})));
    Value alpha = t.softmax(t.concat(scores));
    if (trace) {
      const Array& a = t.value(alpha);
      trace->weights.push_back({a.data[0], a.data[1], a.data[2], a.data[3]});
    }
    std::array<Value, 4> weighted;
    for (int i = 0; i < 4; ++i) weighted[i] = t.smul(t.slice(alpha, i, 1), cand[i]);
    head_outs[h] = t.sum_pool(weighted);
  }
  Value fused = t.mean_pool(head_outs);
  return t.add(t.matmul(t.param(*store_, out_w_), fused), t.param(*store_, out_b_));
}

Value NodeEncoder::embed(Tape& t, NodeId n, const NeighborSets& sets,
                         AttentionTrace* trace) const {
  std::unordered_map<NodeId, Value> memo;
  auto content = [&](Tape& tt, NodeId m) {
    auto it = memo.find(m);
    if (it != memo.end()) return it->second;
    Value v = content_embedding(tt, m);
    memo.emplace(m, v);
    return v;
  };
  return fuse(t, n, sets, content, trace);
}

std::vector<Array> NodeEncoder::encode_all(const std::vector<NeighborSets>& sets) const {
  if (sets.size() != g_->node_count())
    throw DataError("neighbor sets do not cover the graph");
  std::vector<Array> f_cache(g_->node_count());
  for (NodeId n = 0; n < g_->node_count(); ++n) {
    Tape t;
    f_cache[n] = t.value(content_embedding(t, n));
  }
  std::vector<Array> out(g_->node_count());
  for (NodeId n = 0; n < g_->node_count(); ++n) {
    Tape t;
    std::unordered_map<NodeId, Value> memo;
    auto content = [&](Tape& tt, NodeId m) {
      auto it = memo.find(m);
      if (it != memo.end()) return it->second;
      Value v = tt.constant(f_cache[m]);
      memo.emplace(m, v);
      return v;
    };
    out[n] = t.value(fuse(t, n, sets[n], content));
  }
  return out;
}

void save_embeddings(const std::vector<Array>& emb, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f.write(kEmbeddingsMagic, sizeof kEmbeddingsMagic);
  write_le<std::uint64_t>(f, emb.size());
  std::uint32_t dim = emb.empty() ? 0 : static_cast<std::uint32_t>(emb.front().size());
  write_le<std::uint32_t>(f, dim);
  for (std::size_t i = 0; i < emb.size(); ++i) {
    if (emb[i].size() != dim) throw DataError("ragged embedding table");
    write_le<std::uint64_t>(f, i);
    for (double v : emb[i].data) write_le<float>(f, static_cast<float>(v));
  }
  if (!f.good()) throw DataError("write failed for " + path);
}

std::vector<Array> load_embeddings(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  char magic[9];
  f.read(magic, sizeof magic);
  if (!f || std::memcmp(magic, kEmbeddingsMagic, sizeof magic) != 0)
    throw DataError(path + ": not an embedding file");
  std::uint64_t count = read_le<std::uint64_t>(f);
  std::uint32_t dim = read_le<std::uint32_t>(f);
  std::vector<Array> out(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t id = read_le<std::uint64_t>(f);
    if (id != i) throw DataError(path + ": embedding ids out of order");
    Array a;
    a.shape = {dim};
    a.data.resize(dim);
    for (std::uint32_t k = 0; k < dim; ++k) a.data[k] = read_le<float>(f);
    out[i] = std::move(a);
  }
  return out;
}

Value skipgram_pair_loss(Tape& t, Value center, Value context,
                         const std::vector<Value>& negatives) {
  Value loss = t.scale(t.log_sigmoid(t.dot(center, context)), -1.0);
  for (Value m : negatives)
    loss = t.sub(loss, t.log_sigmoid(t.scale(t.dot(center, m), -1.0)));
  return loss;
}

NegativeSampler::NegativeSampler(const HeteroGraph& g) {
  for (int k = 0; k < kNodeKinds; ++k) {
    members_[k] = g.nodes_of_kind(static_cast<NodeKind>(k));
    double total = 0.0;
    cumulative_[k].reserve(members_[k].size());
    for (NodeId n : members_[k]) {
      total += std::pow(static_cast<double>(g.in_degree(n)), 0.75);
      cumulative_[k].push_back(total);
    }
    if (total == 0.0 && !members_[k].empty()) {
      for (std::size_t i = 0; i < cumulative_[k].size(); ++i)
        cumulative_[k][i] = static_cast<double>(i + 1);
    }
  }
}

NodeId NegativeSampler::draw(NodeKind kind, Rng& rng) const {
  int k = static_cast<int>(kind);
  if (members_[k].empty()) throw DataError("no nodes of kind to sample negatives from");
  double u = rng.next_double() * cumulative_[k].back();
  auto it = std::upper_bound(cumulative_[k].begin(), cumulative_[k].end(), u);
  std::size_t idx = std::min<std::size_t>(it - cumulative_[k].begin(), members_[k].size() - 1);
  return members_[k][idx];
}

double pretrain_skipgram(const NodeEncoder& enc, ad::ParameterStore& store,
                         const std::vector<std::vector<NodeId>>& corpus,
                         const std::vector<NeighborSets>& sets, const PretrainConfig& cfg) {
  if (corpus.empty()) throw DataError("empty walk corpus");
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      std::size_t lo = i > static_cast<std::size_t>(cfg.window) ? i - cfg.window : 0;
      std::size_t hi = std::min(seq.size() - 1, i + cfg.window);
      for (std::size_t j = lo; j <= hi; ++j)
        if (j != i) pairs.emplace_back(seq[i], seq[j]);
    }
  }
  if (pairs.empty()) throw DataError("walk corpus yields no skip-gram pairs");

  const HeteroGraph& g = enc.graph();
  NegativeSampler sampler(g);
  double mean_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = Rng::substream(cfg.seed, 0x536b6970ull, epoch);
    for (std::size_t i = pairs.size(); i > 1; --i)
      std::swap(pairs[i - 1], pairs[rng.next_below(i)]);
    std::size_t n = pairs.size();
    if (cfg.max_pairs > 0) n = std::min<std::size_t>(n, cfg.max_pairs);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      auto [c, ctx] = pairs[k];
      Tape t;
      std::unordered_map<NodeId, Value> memo;
      auto content = [&](Tape& tt, NodeId m) {
        auto it = memo.find(m);
        if (it != memo.end()) return it->second;
        Value v = enc.content_embedding(tt, m);
        memo.emplace(m, v);
        return v;
      };
      Value ec = enc.fuse(t, c, sets[c], content);
      Value ectx = enc.fuse(t, ctx, sets[ctx], content);
      std::vector<Value> negs;
      negs.reserve(cfg.negatives);
      for (int m = 0; m < cfg.negatives; ++m) {
        NodeId neg = sampler.draw(g.node(ctx).kind, rng);
        negs.push_back(enc.fuse(t, neg, sets[neg], content));
      }
      Value loss = skipgram_pair_loss(t, ec, ectx, negs);
      total += t.scalar_value(loss);
      store.zero_grad();
      t.backward(loss);
      store.sgd_step(cfg.lr);
    }
    mean_loss = total / n;
  }
  return mean_loss;
}

}  // namespace hdgnn
