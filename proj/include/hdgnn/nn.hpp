#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "hdgnn/params.hpp"
#include "hdgnn/rng.hpp"
#include "hdgnn/tape.hpp"

namespace hdgnn::ad {

// z = sigmoid(Wz x + Uz h + bz)
// r = sigmoid(Wr x + Ur h + br)
// hcand = tanh(Wh x + Uh (r*h) + bh)
// h' = (1-z)*h + z*hcand
struct Gru {
  int wz = -1, uz = -1, bz = -1;
  int wr = -1, ur = -1, br = -1;
  int wh = -1, uh = -1, bh = -1;
  int in_dim = 0, hidden = 0;

  static Gru create(ParameterStore& s, const std::string& prefix, int in_dim, int hidden,
                    Rng& rng) {
    Gru g;
    g.in_dim = in_dim;
    g.hidden = hidden;
    g.wz = s.create_glorot(prefix + ".Wz", hidden, in_dim, rng);
    g.uz = s.create_glorot(prefix + ".Uz", hidden, hidden, rng);
    g.bz = s.create_zeros(prefix + ".bz", {static_cast<std::size_t>(hidden)});
    g.wr = s.create_glorot(prefix + ".Wr", hidden, in_dim, rng);
    g.ur = s.create_glorot(prefix + ".Ur", hidden, hidden, rng);
    g.br = s.create_zeros(prefix + ".br", {static_cast<std::size_t>(hidden)});
    g.wh = s.create_glorot(prefix + ".Wh", hidden, in_dim, rng);
    g.uh = s.create_glorot(prefix + ".Uh", hidden, hidden, rng);
    g.bh = s.create_zeros(prefix + ".bh", {static_cast<std::size_t>(hidden)});
    return g;
  }

  static Gru find(const ParameterStore& s, const std::string& prefix) {
    Gru g;
    g.wz = s.require(prefix + ".Wz");
    g.uz = s.require(prefix + ".Uz");
    g.bz = s.require(prefix + ".bz");
    g.wr = s.require(prefix + ".Wr");
    g.ur = s.require(prefix + ".Ur");
    g.br = s.require(prefix + ".br");
    g.wh = s.require(prefix + ".Wh");
    g.uh = s.require(prefix + ".Uh");
    g.bh = s.require(prefix + ".bh");
    g.hidden = static_cast<int>(s.value(g.wz).shape[0]);
    g.in_dim = static_cast<int>(s.value(g.wz).shape[1]);
    return g;
  }

  Value zero_state(Tape& t) const {
    return t.constant(Array::zeros({static_cast<std::size_t>(hidden)}));
  }

  Value step(Tape& t, ParameterStore& s, Value x, Value h) const {
    Value z = t.sigmoid(
        t.add(t.add(t.matmul(t.param(s, wz), x), t.matmul(t.param(s, uz), h)), t.param(s, bz)));
    Value r = t.sigmoid(
        t.add(t.add(t.matmul(t.param(s, wr), x), t.matmul(t.param(s, ur), h)), t.param(s, br)));
    Value hc = t.tanh(t.add(
        t.add(t.matmul(t.param(s, wh), x), t.matmul(t.param(s, uh), t.mul(r, h))),
        t.param(s, bh)));
    return t.add(h, t.mul(z, t.sub(hc, h)));
  }

  // states aligned to input positions; reverse=true consumes the sequence right to left.
  // The input projections W{z,r,h} x_t for all steps are hoisted into one matrix
  // product each so the weight matrices stream once per sequence, not once per step;
  // the per-row dot order matches matmul's, so values are unchanged.
  std::vector<Value> run(Tape& t, ParameterStore& s, const std::vector<Value>& xs,
                         bool reverse = false) const {
    const std::size_t T = xs.size();
    std::vector<Value> states(T);
    if (T == 0) return states;
    const std::size_t H = static_cast<std::size_t>(hidden);
    std::vector<Value> ordered(xs);
    if (reverse) std::reverse(ordered.begin(), ordered.end());
    Value X = t.reshape(t.concat(ordered), T, static_cast<std::size_t>(in_dim));
    Value pz = t.matmul_nt(X, t.param(s, wz));
    Value pr = t.matmul_nt(X, t.param(s, wr));
    Value ph = t.matmul_nt(X, t.param(s, wh));
    Value h = zero_state(t);
    for (std::size_t j = 0; j < T; ++j) {
      Value z = t.sigmoid(t.add(
          t.add(t.slice(pz, j * H, H), t.matmul(t.param(s, uz), h)), t.param(s, bz)));
      Value r = t.sigmoid(t.add(
          t.add(t.slice(pr, j * H, H), t.matmul(t.param(s, ur), h)), t.param(s, br)));
      Value hc = t.tanh(t.add(
          t.add(t.slice(ph, j * H, H), t.matmul(t.param(s, uh), t.mul(r, h))),
          t.param(s, bh)));
      h = t.add(h, t.mul(z, t.sub(hc, h)));
      states[reverse ? T - 1 - j : j] = h;
    }
    return states;
  }

  Value last_state(Tape& t, ParameterStore& s, const std::vector<Value>& xs) const {
    if (xs.empty()) return zero_state(t);
    return run(t, s, xs).back();
  }
};

struct BiGru {
  Gru fw, bw;

  static BiGru create(ParameterStore& s, const std::string& prefix, int in_dim, int hidden,
                      Rng& rng) {
    return {Gru::create(s, prefix + ".fw", in_dim, hidden, rng),
            Gru::create(s, prefix + ".bw", in_dim, hidden, rng)};
  }

  static BiGru find(const ParameterStore& s, const std::string& prefix) {
    return {Gru::find(s, prefix + ".fw"), Gru::find(s, prefix + ".bw")};
  }

  // per position i: concat(forward state_i, backward state_i)
  std::vector<Value> run(Tape& t, ParameterStore& s, const std::vector<Value>& xs) const {
    std::vector<Value> f = fw.run(t, s, xs, false);
    std::vector<Value> b = bw.run(t, s, xs, true);
    std::vector<Value> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = t.concat({f[i], b[i]});
    return out;
  }
};

// one hidden GeLU layer: W2 * gelu(W1 x + b1) + b2
struct Mlp {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;

  static Mlp create(ParameterStore& s, const std::string& prefix, int in_dim, int hidden,
                    int out_dim, Rng& rng) {
    Mlp m;
    m.w1 = s.create_glorot(prefix + ".W1", hidden, in_dim, rng);
    m.b1 = s.create_zeros(prefix + ".b1", {static_cast<std::size_t>(hidden)});
    m.w2 = s.create_glorot(prefix + ".W2", out_dim, hidden, rng);
    m.b2 = s.create_zeros(prefix + ".b2", {static_cast<std::size_t>(out_dim)});
    return m;
  }

  static Mlp find(const ParameterStore& s, const std::string& prefix) {
    Mlp m;
    m.w1 = s.require(prefix + ".W1");
    m.b1 = s.require(prefix + ".b1");
    m.w2 = s.require(prefix + ".W2");
    m.b2 = s.require(prefix + ".b2");
    return m;
  }

  Value apply(Tape& t, ParameterStore& s, Value x) const {
    Value h = t.gelu(t.add(t.matmul(t.param(s, w1), x), t.param(s, b1)));
    return t.add(t.matmul(t.param(s, w2), h), t.param(s, b2));
  }
};

}  // namespace hdgnn::ad
