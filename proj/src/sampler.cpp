#include "hdgnn/sampler.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <thread>

#include "hdgnn/rng.hpp"

namespace hdgnn {

namespace {

double type_coeff(NodeKind k, const WalkConfig& cfg) {
  switch (k) {
    case NodeKind::Paper: return cfg.alpha;
    case NodeKind::Author: return cfg.beta;
    case NodeKind::Venue: return cfg.gamma;
  }
  return 1.0;
}

constexpr char kNeighborSetsMagic[9] = {'H', 'D', 'G', 'N', 'N', '-', 'N', 'S', '\x01'};

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
  if (!f) throw DataError("unexpected end of neighbor-set file");
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

double influence(const HeteroGraph& g, NodeId m, const EdgeRecord& e) {
  return (1.0 + static_cast<double>(g.in_degree(m))) * e.weight;
}

Transition transition_distribution(const HeteroGraph& g, NodeId n, NodeId prev,
                                   const WalkConfig& cfg) {
  std::map<NodeId, double> mass;
  double z = 0.0;
  for (const Adjacent& a : g.out_edges(n)) {
    double t = type_coeff(g.node(a.other).kind, cfg) * influence(g, a.other, g.edge(a.edge));
    mass[a.other] += t;
    z += t;
  }
  Transition out;
  if (mass.empty()) {
    out.dead_end = true;
    if (prev != n) out.entries.push_back({prev, 1.0});
    return out;
  }
  for (auto& [node, m] : mass) m = (1.0 - cfg.q) * (m / z);
  if (cfg.q > 0.0) mass[prev] += cfg.q;
  out.entries.reserve(mass.size());
  for (const auto& [node, p] : mass) out.entries.push_back({node, p});
  return out;
}

std::vector<std::vector<NodeId>> walk_sequences(const HeteroGraph& g, NodeId source,
                                                const WalkConfig& cfg) {
  std::vector<std::vector<NodeId>> walks;
  walks.reserve(cfg.walks_per_node);
  for (int w = 0; w < cfg.walks_per_node; ++w) {
    Rng rng = Rng::substream(cfg.seed, source, static_cast<std::uint64_t>(w));
    std::vector<NodeId> seq;
    seq.reserve(cfg.walk_length + 1);
    seq.push_back(source);
    NodeId cur = source;
    NodeId prev = source;
    for (int step = 0; step < cfg.walk_length; ++step) {
      Transition t = transition_distribution(g, cur, prev, cfg);
      if (t.entries.empty()) break;  // isolated start: nowhere to go
      double u = rng.next_double();
      double cum = 0.0;
      NodeId next = t.entries.back().node;
      for (const TransitionEntry& e : t.entries) {
        cum += e.prob;
        if (u < cum) {
          next = e.node;
          break;
        }
      }
      prev = cur;
      cur = next;
      seq.push_back(cur);
    }
    walks.push_back(std::move(seq));
  }
  return walks;
}

VisitCounts run_walks(const HeteroGraph& g, NodeId source, const WalkConfig& cfg) {
  VisitCounts counts;
  for (const auto& seq : walk_sequences(g, source, cfg))
    for (std::size_t i = 1; i < seq.size(); ++i)
      if (seq[i] != source) ++counts[seq[i]];
  return counts;
}

NeighborSets rank_neighbor_sets(const HeteroGraph& g, NodeId source, const VisitCounts& visits,
                                const WalkConfig& cfg) {
  struct Ranked {
    NodeId node;
    std::uint64_t count;
    std::size_t in_deg;
  };
  std::vector<Ranked> per_kind[kNodeKinds];
  for (const auto& [node, count] : visits)
    per_kind[static_cast<int>(g.node(node).kind)].push_back({node, count, g.in_degree(node)});
  for (auto& v : per_kind)
    std::sort(v.begin(), v.end(), [](const Ranked& a, const Ranked& b) {
      if (a.count != b.count) return a.count > b.count;
      if (a.in_deg != b.in_deg) return a.in_deg > b.in_deg;
      return a.node < b.node;
    });

  auto fill = [&](NodeKind kind, int k) {
    std::vector<NodeId> ranked;
    for (const Ranked& r : per_kind[static_cast<int>(kind)]) ranked.push_back(r.node);
    if (ranked.empty()) {
      for (const Adjacent& a : g.out_edges(source))
        if (g.node(a.other).kind == kind &&
            (ranked.empty() || ranked.back() != a.other))
          ranked.push_back(a.other);
    }
    if (ranked.empty()) ranked.push_back(source);
    std::vector<NodeId> out(k);
    for (int i = 0; i < k; ++i) out[i] = ranked[i % ranked.size()];
    return out;
  };

  NeighborSets sets;
  sets.paper = fill(NodeKind::Paper, cfg.k_paper);
  sets.author = fill(NodeKind::Author, cfg.k_author);
  sets.venue = fill(NodeKind::Venue, cfg.k_venue);
  return sets;
}

NeighborSets build_neighbor_sets(const HeteroGraph& g, NodeId source, const WalkConfig& cfg) {
  return rank_neighbor_sets(g, source, run_walks(g, source, cfg), cfg);
}

std::vector<NeighborSets> build_all_neighbor_sets(const HeteroGraph& g, const WalkConfig& cfg) {
  std::vector<NeighborSets> all(g.node_count());
  std::size_t workers = cfg.threads > 1 ? static_cast<std::size_t>(cfg.threads) : 1;
  workers = std::min(workers, g.node_count() ? g.node_count() : std::size_t{1});
  if (workers <= 1) {
    for (NodeId n = 0; n < g.node_count(); ++n) all[n] = build_neighbor_sets(g, n, cfg);
    return all;
  }
  // each source draws from its own substream, so any static partition works
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (NodeId n = w; n < g.node_count(); n += workers)
        all[n] = build_neighbor_sets(g, n, cfg);
    });
  for (std::thread& t : pool) t.join();
  return all;
}

void save_neighbor_sets(const std::vector<NeighborSets>& sets, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f.write(kNeighborSetsMagic, sizeof kNeighborSetsMagic);
  write_le<std::uint64_t>(f, sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    write_le<std::uint64_t>(f, i);
    for (const auto* list : {&sets[i].paper, &sets[i].author, &sets[i].venue})
      for (NodeId n : *list) write_le<std::uint64_t>(f, n);
  }
  if (!f.good()) throw DataError("write failed for " + path);
}

std::vector<NeighborSets> load_neighbor_sets(const std::string& path, int k_paper, int k_author,
                                             int k_venue) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  char magic[9];
  f.read(magic, sizeof magic);
  if (!f || std::memcmp(magic, kNeighborSetsMagic, sizeof magic) != 0)
    throw DataError(path + ": not a neighbor-set file");
  std::uint64_t count = read_le<std::uint64_t>(f);
  std::vector<NeighborSets> sets(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t id = read_le<std::uint64_t>(f);
    if (id != i) throw DataError(path + ": node ids out of order");
    sets[i].paper.resize(k_paper);
    sets[i].author.resize(k_author);
    sets[i].venue.resize(k_venue);
    for (auto* list : {&sets[i].paper, &sets[i].author, &sets[i].venue})
      for (NodeId& n : *list) n = read_le<std::uint64_t>(f);
  }
  return sets;
}

void dump_neighbor_sets_jsonl(const std::vector<NeighborSets>& sets, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  auto list = [&](const std::vector<NodeId>& v) {
    f << '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) f << ',';
      f << v[i];
    }
    f << ']';
  };
  for (std::size_t i = 0; i < sets.size(); ++i) {
    f << "{\"author\":";
    list(sets[i].author);
    f << ",\"id\":" << i << ",\"paper\":";
    list(sets[i].paper);
    f << ",\"venue\":";
    list(sets[i].venue);
    f << "}\n";
  }
  if (!f.good()) throw DataError("write failed for " + path);
}

}  // namespace hdgnn
