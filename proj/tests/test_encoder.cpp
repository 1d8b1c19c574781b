#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fd_check.hpp"
#include "hdgnn/encoder.hpp"

using namespace hdgnn;
using ad::Array;
using ad::ParameterStore;
using ad::Tape;
using ad::Value;

namespace {

HeteroGraph tiny_graph() {
  HeteroGraph g;
  g.add_node("p1", NodeKind::Paper, 2000.0, {{"fa", {0.3, 0.1}}, {"fb", {0.7}}});
  g.add_node("p2", NodeKind::Paper, 1999.0, {{"fa", {-0.2, 0.4}}, {"fb", {0.3}}});
  g.add_node("a1", NodeKind::Author, 1995.0, {{"ca", {0.5}}});
  g.add_node("v1", NodeKind::Venue, 1980.0, {{"va", {0.9, -0.3}}});
  g.finalize();
  return g;
}

NeighborSets tiny_sets() {
  NeighborSets s;
  s.paper = {1, 0};
  s.author = {2};
  s.venue = {3};
  return s;
}

EncoderConfig small_cfg() {
  EncoderConfig cfg;
  cfg.d_h = 3;
  cfg.d_s = 4;
  cfg.d_c = 3;
  cfg.d_e = 2;
  cfg.heads = 2;
  return cfg;
}

void zero_all(ParameterStore& s) {
  for (int i = 0; i < static_cast<int>(s.count()); ++i)
    std::fill(s.value(i).data.begin(), s.value(i).data.end(), 0.0);
}

// ---- plain-double reference implementation (no tape) ----

using Vec = std::vector<double>;

const Array& pval(const ParameterStore& s, const std::string& name) {
  return s.value(s.require(name));
}

Vec matvec(const Array& w, const Vec& x) {
  Vec y(w.shape[0], 0.0);
  for (std::size_t i = 0; i < w.shape[0]; ++i)
    for (std::size_t j = 0; j < w.shape[1]; ++j) y[i] += w.data[i * w.shape[1] + j] * x[j];
  return y;
}

Vec vop(const Vec& a, const Vec& b, double sb = 1.0) {
  Vec y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + sb * b[i];
  return y;
}

Vec vsig(Vec a) {
  for (double& x : a) x = 1.0 / (1.0 + std::exp(-x));
  return a;
}

Vec vtanh(Vec a) {
  for (double& x : a) x = std::tanh(x);
  return a;
}

Vec vmul(const Vec& a, const Vec& b) {
  Vec y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
  return y;
}

double gelu_ref(double x) {
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
}

Vec mlp_ref(const ParameterStore& s, const std::string& p, const Vec& x) {
  Vec h = vop(matvec(pval(s, p + ".W1"), x), pval(s, p + ".b1").data);
  for (double& v : h) v = gelu_ref(v);
  return vop(matvec(pval(s, p + ".W2"), h), pval(s, p + ".b2").data);
}

Vec gru_step_ref(const ParameterStore& s, const std::string& p, const Vec& x, const Vec& h) {
  Vec z = vsig(vop(vop(matvec(pval(s, p + ".Wz"), x), matvec(pval(s, p + ".Uz"), h)),
                   pval(s, p + ".bz").data));
  Vec r = vsig(vop(vop(matvec(pval(s, p + ".Wr"), x), matvec(pval(s, p + ".Ur"), h)),
                   pval(s, p + ".br").data));
  Vec hc = vtanh(vop(vop(matvec(pval(s, p + ".Wh"), x), matvec(pval(s, p + ".Uh"), vmul(r, h))),
                     pval(s, p + ".bh").data));
  Vec out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = (1.0 - z[i]) * h[i] + z[i] * hc[i];
  return out;
}

// mean over positions of concat(forward, backward)
Vec bigru_mean_ref(const ParameterStore& s, const std::string& p, const std::vector<Vec>& xs,
                   int hidden) {
  std::vector<Vec> fw(xs.size()), bw(xs.size());
  Vec h(hidden, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) fw[i] = h = gru_step_ref(s, p + ".fw", xs[i], h);
  h.assign(hidden, 0.0);
  for (std::size_t i = xs.size(); i-- > 0;) bw[i] = h = gru_step_ref(s, p + ".bw", xs[i], h);
  Vec mean(2 * hidden, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (int k = 0; k < hidden; ++k) {
      mean[k] += fw[i][k] / xs.size();
      mean[hidden + k] += bw[i][k] / xs.size();
    }
  }
  return mean;
}

Vec content_ref(const HeteroGraph& g, const ParameterStore& s, const EncoderConfig& cfg,
                NodeId n) {
  const NodeRecord& rec = g.node(n);
  std::vector<Vec> hs;
  for (const auto& [name, raw] : rec.features)
    hs.push_back(mlp_ref(s, "enc.mlp." + std::string(to_string(rec.kind)) + "." + name, raw));
  return bigru_mean_ref(s, "enc.content", hs, cfg.d_h);
}

Vec embed_ref(const HeteroGraph& g, const ParameterStore& s, const EncoderConfig& cfg, NodeId n,
              const NeighborSets& sets) {
  Vec f_self = content_ref(g, s, cfg, n);
  Vec tilde_self = matvec(pval(s, "enc.att.proj.self.W"), f_self);
  auto agg = [&](const std::vector<NodeId>& members, const char* kind) {
    std::vector<Vec> xs;
    for (NodeId m : members) xs.push_back(content_ref(g, s, cfg, m));
    return bigru_mean_ref(s, std::string("enc.nbr.") + kind, xs, cfg.d_s / 2);
  };
  std::vector<Vec> cand = {tilde_self,
                           matvec(pval(s, "enc.att.proj.paper.W"), agg(sets.paper, "paper")),
                           matvec(pval(s, "enc.att.proj.author.W"), agg(sets.author, "author")),
                           matvec(pval(s, "enc.att.proj.venue.W"), agg(sets.venue, "venue"))};
  Vec fused(cfg.d_c, 0.0);
  for (int h = 0; h < cfg.heads; ++h) {
    const Vec& u = pval(s, "enc.att.u" + std::to_string(h)).data;
    Vec scores(4);
    for (int i = 0; i < 4; ++i) {
      double dot = 0.0;
      for (int k = 0; k < cfg.d_c; ++k) dot += u[k] * tilde_self[k] + u[cfg.d_c + k] * cand[i][k];
      scores[i] = dot > 0 ? dot : 0.01 * dot;
    }
    double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& v : scores) z += (v = std::exp(v - mx));
    Vec head(cfg.d_c, 0.0);
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < cfg.d_c; ++k) head[k] += scores[i] / z * cand[i][k];
    for (int k = 0; k < cfg.d_c; ++k) fused[k] += head[k] / cfg.heads;
  }
  return vop(matvec(pval(s, "enc.att.out.W"), fused), pval(s, "enc.att.out.b").data);
}

}  // namespace

TEST_CASE("zero parameters give zero content embedding and zero fused embedding") {
  HeteroGraph g = tiny_graph();
  ParameterStore store;
  Rng rng(3);
  NodeEncoder enc(g, small_cfg(), store, rng);
  zero_all(store);
  Tape t;
  const Array& f = t.value(enc.content_embedding(t, 0));
  for (double v : f.data) CHECK(v == 0.0);
  AttentionTrace trace;
  Tape t2;
  const Array& e = t2.value(enc.embed(t2, 0, tiny_sets(), &trace));
  CHECK(e.size() == 2);
  for (double v : e.data) CHECK(v == 0.0);
  // zero attention parameters: uniform weights over the four candidates
  for (const auto& w : trace.weights)
    for (double a : w) CHECK(a == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("content aggregation matches a hand-unrolled recurrence") {
  HeteroGraph g;
  g.add_node("p", NodeKind::Paper, 0.0, {{"a", {9.0}}, {"b", {9.0}}});
  g.finalize();
  EncoderConfig cfg;
  cfg.d_h = 1;
  cfg.d_s = 2;
  cfg.d_c = 2;
  cfg.d_e = 1;
  cfg.heads = 1;
  ParameterStore store;
  Rng rng(1);
  NodeEncoder enc(g, cfg, store, rng);
  zero_all(store);
  // slot MLPs: W1 = 0, so each slot contributes its bias b2 (gelu(0) = 0)
  store.value(store.require("enc.mlp.paper.a.b2")).data = {0.25};
  store.value(store.require("enc.mlp.paper.b.b2")).data = {0.5};
  auto set = [&](const char* n, double v) { store.value(store.require(n)).data = {v}; };
  set("enc.content.fw.Wz", 0.5);
  set("enc.content.fw.Uz", 0.25);
  set("enc.content.fw.bz", 0.1);
  set("enc.content.fw.Wr", 0.3);
  set("enc.content.fw.Ur", 0.2);
  set("enc.content.fw.Wh", 1.0);
  set("enc.content.fw.Uh", 0.5);
  set("enc.content.bw.Wz", 0.4);
  set("enc.content.bw.Uz", 0.1);
  set("enc.content.bw.Wr", 0.25);
  set("enc.content.bw.Ur", 0.15);
  set("enc.content.bw.br", 0.05);
  set("enc.content.bw.Wh", 0.8);
  set("enc.content.bw.Uh", 0.3);
  set("enc.content.bw.bh", 0.1);

  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  auto fwstep = [&](double x, double h) {
    double z = sig(0.5 * x + 0.25 * h + 0.1);
    double r = sig(0.3 * x + 0.2 * h);
    double hc = std::tanh(1.0 * x + 0.5 * (r * h));
    return (1 - z) * h + z * hc;
  };
  auto bwstep = [&](double x, double h) {
    double z = sig(0.4 * x + 0.1 * h);
    double r = sig(0.25 * x + 0.15 * h + 0.05);
    double hc = std::tanh(0.8 * x + 0.3 * (r * h) + 0.1);
    return (1 - z) * h + z * hc;
  };
  double f1 = fwstep(0.25, 0.0);
  double f2 = fwstep(0.5, f1);
  double b2 = bwstep(0.5, 0.0);
  double b1 = bwstep(0.25, b2);

  Tape t;
  const Array& f = t.value(enc.content_embedding(t, 0));
  REQUIRE(f.size() == 2);
  CHECK(f.data[0] == doctest::Approx((f1 + f2) / 2).epsilon(1e-12));
  CHECK(f.data[1] == doctest::Approx((b1 + b2) / 2).epsilon(1e-12));
}

TEST_CASE("full embedding matches an independent plain reimplementation") {
  HeteroGraph g = tiny_graph();
  EncoderConfig cfg = small_cfg();
  ParameterStore store;
  Rng rng(2024);
  NodeEncoder enc(g, cfg, store, rng);
  NeighborSets sets = tiny_sets();

  Vec ref = embed_ref(g, store, cfg, 0, sets);
  Tape t;
  const Array& e = t.value(enc.embed(t, 0, sets));
  REQUIRE(e.size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    CHECK(e.data[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  AttentionTrace trace;
  Tape t2;
  enc.embed(t2, 0, sets, &trace);
  REQUIRE(trace.weights.size() == 2);
  for (const auto& w : trace.weights) {
    double sum = w[0] + w[1] + w[2] + w[3];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("gradients through the whole encoder pass finite differences") {
  HeteroGraph g = tiny_graph();
  EncoderConfig cfg;
  cfg.d_h = 2;
  cfg.d_s = 2;
  cfg.d_c = 2;
  cfg.d_e = 2;
  cfg.heads = 2;
  ParameterStore store;
  Rng rng(5);
  NodeEncoder enc(g, cfg, store, rng);
  NeighborSets sets = tiny_sets();
  auto build = [&](Tape& t) { return t.reduce_sum(t.square(enc.embed(t, 0, sets))); };
  fd::Report rep = fd::check_gradients(store, build, 1e-4, 160);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("tied forward/backward weights: reversing the slot sequence swaps the halves") {
  HeteroGraph g;
  g.add_node("n1", NodeKind::Paper, 0.0, {{"a", {0.25}}, {"b", {0.5}}});
  g.add_node("n2", NodeKind::Paper, 0.0, {{"a", {0.5}}, {"b", {0.25}}});
  g.finalize();
  EncoderConfig cfg;
  cfg.d_h = 2;
  cfg.d_s = 2;
  cfg.d_c = 2;
  cfg.d_e = 2;
  cfg.heads = 1;
  ParameterStore store;
  Rng rng(9);
  NodeEncoder enc(g, cfg, store, rng);
  // tie the two slot MLPs and the two GRU directions
  for (const char* suffix : {".W1", ".b1", ".W2", ".b2"})
    store.value(store.require(std::string("enc.mlp.paper.b") + suffix)) =
        store.value(store.require(std::string("enc.mlp.paper.a") + suffix));
  for (const char* suffix : {".Wz", ".Uz", ".bz", ".Wr", ".Ur", ".br", ".Wh", ".Uh", ".bh"})
    store.value(store.require(std::string("enc.content.bw") + suffix)) =
        store.value(store.require(std::string("enc.content.fw") + suffix));

  Tape t;
  Array fa = t.value(enc.content_embedding(t, 0));  // copy: tape growth invalidates references
  Array fb = t.value(enc.content_embedding(t, 1));
  REQUIRE(fa.size() == 4);
  // n2's slot sequence is n1's reversed: forward and backward means trade places
  CHECK(fb.data[0] == doctest::Approx(fa.data[2]).epsilon(1e-14));
  CHECK(fb.data[1] == doctest::Approx(fa.data[3]).epsilon(1e-14));
  CHECK(fb.data[2] == doctest::Approx(fa.data[0]).epsilon(1e-14));
  CHECK(fb.data[3] == doctest::Approx(fa.data[1]).epsilon(1e-14));
  // the half-sum is reversal invariant
  CHECK(fa.data[0] + fa.data[2] == doctest::Approx(fb.data[0] + fb.data[2]).epsilon(1e-14));
}

TEST_CASE("encode_all agrees with per-node embedding") {
  HeteroGraph g = tiny_graph();
  EncoderConfig cfg = small_cfg();
  ParameterStore store;
  Rng rng(11);
  NodeEncoder enc(g, cfg, store, rng);
  std::vector<NeighborSets> sets(4, tiny_sets());
  std::vector<Array> table = enc.encode_all(sets);
  REQUIRE(table.size() == 4);
  for (NodeId n = 0; n < 4; ++n) {
    Tape t;
    const Array& e = t.value(enc.embed(t, n, sets[n]));
    CHECK(e.data == table[n].data);
  }
}

TEST_CASE("embedding file round trip") {
  std::vector<Array> emb;
  emb.push_back(Array::vec({0.5, -0.25, 1.0}));
  emb.push_back(Array::vec({2.0, 0.125, -8.0}));
  save_embeddings(emb, "emb_test.bin");
  {
    std::ifstream f("emb_test.bin", std::ios::binary);
    char magic[9];
    f.read(magic, 9);
    CHECK(std::string(magic, 9) == std::string("HDGNN-EM\x01", 9));
  }
  auto loaded = load_embeddings("emb_test.bin");
  REQUIRE(loaded.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(loaded[i].size() == 3);
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(loaded[i].data[k] == static_cast<double>(static_cast<float>(emb[i].data[k])));
  }
  std::remove("emb_test.bin");
}

TEST_CASE("skip-gram pair loss fixtures") {
  Tape t;
  Value c = t.constant(Array::vec({1.0, 0.0}));
  Value ctx = t.constant(Array::vec({0.0, 1.0}));  // orthogonal: dot = 0
  Value l0 = skipgram_pair_loss(t, c, ctx, {});
  CHECK(t.scalar_value(l0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  std::vector<Value> negs = {t.constant(Array::vec({0.0, 0.0}))};
  Value l1 = skipgram_pair_loss(t, c, ctx, negs);
  CHECK(t.scalar_value(l1) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  ParameterStore store;
  Rng rng(4);
  store.create("c", Array::vec({0.3, -0.2, 0.5}));
  store.create("x", Array::vec({0.1, 0.4, -0.6}));
  store.create("m", Array::vec({-0.7, 0.2, 0.9}));
  auto build = [&](Tape& tt) {
    std::vector<Value> neg = {tt.param(store, store.require("m"))};
    return skipgram_pair_loss(tt, tt.param(store, store.require("c")),
                              tt.param(store, store.require("x")), neg);
  };
  fd::Report rep = fd::check_gradients(store, build);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("negative sampling follows in-degree weighting") {
  HeteroGraph g;
  NodeId p1 = g.add_node("p1", NodeKind::Paper, 0.0);
  NodeId p2 = g.add_node("p2", NodeKind::Paper, 0.0);
  NodeId p3 = g.add_node("p3", NodeKind::Paper, 0.0);
  NodeId c1 = g.add_node("c1", NodeKind::Paper, 0.0);
  NodeId c2 = g.add_node("c2", NodeKind::Paper, 0.0);
  NodeId c3 = g.add_node("c3", NodeKind::Paper, 0.0);
  g.add_edge(c1, p2, EdgeKind::PaperCitesPaper, 1.0, 1.0);
  g.add_edge(c2, p2, EdgeKind::PaperCitesPaper, 1.0, 1.0);
  g.add_edge(c3, p2, EdgeKind::PaperCitesPaper, 1.0, 1.0);
  g.add_edge(c1, p3, EdgeKind::PaperCitesPaper, 1.0, 1.0);
  g.finalize();
  NegativeSampler sampler(g);
  Rng rng(77);
  int n2 = 0, n3 = 0, n1 = 0;
  for (int i = 0; i < 20000; ++i) {
    NodeId d = sampler.draw(NodeKind::Paper, rng);
    n2 += d == p2;
    n3 += d == p3;
    n1 += d == p1;
  }
  CHECK(n1 == 0);  // zero in-degree never drawn while others have mass
  CHECK(n2 > n3);
  // expected ratio 3^0.75 : 1 = 2.2795:1
  CHECK(static_cast<double>(n2) / n3 == doctest::Approx(std::pow(3.0, 0.75)).epsilon(0.1));
  CHECK_THROWS(sampler.draw(NodeKind::Venue, rng));
}

TEST_CASE("skip-gram pretraining runs deterministically") {
  HeteroGraph g = tiny_graph();
  EncoderConfig cfg;
  cfg.d_h = 2;
  cfg.d_s = 2;
  cfg.d_c = 2;
  cfg.d_e = 2;
  cfg.heads = 1;
  std::vector<std::vector<NodeId>> corpus = {{0, 1, 2, 3, 0}, {1, 0, 3, 2}};
  std::vector<NeighborSets> sets(4, tiny_sets());
  PretrainConfig pcfg;
  pcfg.window = 2;
  pcfg.negatives = 1;
  pcfg.epochs = 2;
  pcfg.max_pairs = 10;
  pcfg.lr = 0.01;
  pcfg.seed = 13;

  auto run = [&] {
    ParameterStore store;
    Rng rng(21);
    NodeEncoder enc(g, cfg, store, rng);
    double loss = pretrain_skipgram(enc, store, corpus, sets, pcfg);
    return std::make_pair(loss, store.value(store.require("enc.att.out.W")).data);
  };
  auto [l1, w1] = run();
  auto [l2, w2] = run();
  CHECK(std::isfinite(l1));
  CHECK(l1 > 0.0);
  CHECK(l1 == l2);
  CHECK(w1 == w2);

  ParameterStore store;
  Rng rng(21);
  NodeEncoder enc(g, cfg, store, rng);
  CHECK_THROWS_AS(pretrain_skipgram(enc, store, {}, sets, pcfg), DataError);
}
