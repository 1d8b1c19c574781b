#include "hdgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hdgnn/rng.hpp"

namespace hdgnn {

namespace {
constexpr double kBirthSlack = 1e-9;

const char* kNodeKindNames[kNodeKinds] = {"paper", "author", "venue"};
const char* kEdgeKindNames[kEdgeKinds] = {
    "author_writes_paper",    "author_collab_author", "author_publishes_venue",
    "author_cites_paper",     "paper_published_in_venue",
    "paper_cites_paper",      "paper_cites_author"};
const NodeKind kEdgeSrc[kEdgeKinds] = {NodeKind::Author, NodeKind::Author, NodeKind::Author,
                                       NodeKind::Author, NodeKind::Paper,  NodeKind::Paper,
                                       NodeKind::Paper};
const NodeKind kEdgeDst[kEdgeKinds] = {NodeKind::Paper, NodeKind::Author, NodeKind::Venue,
                                       NodeKind::Paper, NodeKind::Venue,  NodeKind::Paper,
                                       NodeKind::Author};

FeatureSet hashed_fallback(const std::string& external_id) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : external_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  Rng rng(h);
  std::vector<double> v(8);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return {{"hashed", std::move(v)}};
}
}  // namespace

const char* to_string(NodeKind k) { return kNodeKindNames[static_cast<int>(k)]; }
const char* to_string(EdgeKind k) { return kEdgeKindNames[static_cast<int>(k)]; }

std::optional<NodeKind> node_kind_from(const std::string& s) {
  for (int i = 0; i < kNodeKinds; ++i)
    if (s == kNodeKindNames[i]) return static_cast<NodeKind>(i);
  return std::nullopt;
}

std::optional<EdgeKind> edge_kind_from(const std::string& s) {
  for (int i = 0; i < kEdgeKinds; ++i)
    if (s == kEdgeKindNames[i]) return static_cast<EdgeKind>(i);
  return std::nullopt;
}

NodeKind edge_src_kind(EdgeKind k) { return kEdgeSrc[static_cast<int>(k)]; }
NodeKind edge_dst_kind(EdgeKind k) { return kEdgeDst[static_cast<int>(k)]; }

NodeId HeteroGraph::add_node(std::string external_id, NodeKind kind, double birth_time,
                             FeatureSet features) {
  check_not_finalized();
  if (!std::isfinite(birth_time))
    throw DataError("node '" + external_id + "': birth_time not finite");
  if (by_external_.count(external_id))
    throw DataError("duplicate external id '" + external_id + "'");
  for (const auto& [name, vec] : features)
    if (vec.empty())
      throw DataError("node '" + external_id + "': zero-length feature '" + name + "'");
  std::sort(features.begin(), features.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  NodeId id = nodes_.size();
  by_external_.emplace(external_id, id);
  nodes_.push_back(NodeRecord{id, kind, birth_time, std::move(external_id), std::move(features)});
  return id;
}

void HeteroGraph::add_edge(NodeId src, NodeId dst, EdgeKind kind, double weight, double time) {
  check_not_finalized();
  if (src >= nodes_.size() || dst >= nodes_.size())
    throw DataError("edge endpoint out of range");
  const NodeRecord& s = nodes_[src];
  const NodeRecord& d = nodes_[dst];
  if (s.kind != edge_src_kind(kind) || d.kind != edge_dst_kind(kind))
    throw DataError("edge kind '" + std::string(to_string(kind)) + "' does not match node kinds " +
                    to_string(s.kind) + "->" + to_string(d.kind) + " ('" + s.external_id + "'->'" +
                    d.external_id + "')");
  if (!(weight > 0.0) || !std::isfinite(weight))
    throw DataError("edge '" + s.external_id + "'->'" + d.external_id + "': weight must be > 0");
  if (!std::isfinite(time) || time < std::max(s.birth_time, d.birth_time) - kBirthSlack)
    throw DataError("edge '" + s.external_id + "'->'" + d.external_id +
                    "': time precedes endpoint birth");
  auto key = std::make_tuple(src, dst, static_cast<std::uint8_t>(kind));
  auto it = dedup_.find(key);
  if (it != dedup_.end()) {
    // repeated relations accumulate weight; the earliest occurrence dates the edge
    EdgeRecord& e = edges_[it->second];
    e.weight += weight;
    e.time = std::min(e.time, time);
    return;
  }
  dedup_.emplace(key, static_cast<std::uint32_t>(edges_.size()));
  edges_.push_back(EdgeRecord{src, dst, kind, weight, time, edges_.size()});
}

void HeteroGraph::finalize() {
  check_not_finalized();
  out_.assign(nodes_.size(), {});
  in_.assign(nodes_.size(), {});
  max_edge_time_ = 0.0;
  for (std::uint32_t i = 0; i < edges_.size(); ++i) {
    const EdgeRecord& e = edges_[i];
    out_[e.src].push_back(Adjacent{e.dst, e.kind, i});
    in_[e.dst].push_back(Adjacent{e.src, e.kind, i});
    max_edge_time_ = std::max(max_edge_time_, e.time);
  }
  auto order = [](const Adjacent& a, const Adjacent& b) {
    if (a.other != b.other) return a.other < b.other;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  };
  for (auto& v : out_) std::sort(v.begin(), v.end(), order);
  for (auto& v : in_) std::sort(v.begin(), v.end(), order);

  for (NodeRecord& n : nodes_) {
    if (n.features.empty()) n.features = hashed_fallback(n.external_id);
    by_kind_[static_cast<int>(n.kind)].push_back(n.id);
  }
  // all nodes of one kind must share a feature layout so the encoder can reuse one MLP set
  std::array<const NodeRecord*, kNodeKinds> first{};
  for (const NodeRecord& n : nodes_) {
    const NodeRecord*& ref = first[static_cast<int>(n.kind)];
    if (ref == nullptr) {
      ref = &n;
      continue;
    }
    bool ok = ref->features.size() == n.features.size();
    for (std::size_t i = 0; ok && i < n.features.size(); ++i)
      ok = ref->features[i].first == n.features[i].first &&
           ref->features[i].second.size() == n.features[i].second.size();
    if (!ok)
      throw DataError("node '" + n.external_id + "': feature layout differs from '" +
                      ref->external_id + "' of the same kind");
  }
  finalized_ = true;
}

void HeteroGraph::check_node(NodeId n) const {
  if (n >= nodes_.size()) throw DataError("invalid node id " + std::to_string(n));
}

void HeteroGraph::check_not_finalized() const {
  if (finalized_) throw DataError("graph is finalized");
}

const NodeRecord& HeteroGraph::node(NodeId n) const {
  check_node(n);
  return nodes_[n];
}

std::span<const Adjacent> HeteroGraph::out_edges(NodeId n) const {
  check_node(n);
  return out_[n];
}

std::span<const Adjacent> HeteroGraph::in_edges(NodeId n) const {
  check_node(n);
  return in_[n];
}

std::vector<std::pair<NodeId, EdgeRecord>> HeteroGraph::neighbors(
    NodeId n, std::optional<NodeKind> kind_filter) const {
  check_node(n);
  std::vector<std::pair<NodeId, EdgeRecord>> result;
  for (const Adjacent& a : out_[n]) {
    if (kind_filter && nodes_[a.other].kind != *kind_filter) continue;
    result.emplace_back(a.other, edges_[a.edge]);
  }
  return result;
}

std::size_t HeteroGraph::in_degree(NodeId n) const {
  check_node(n);
  return in_[n].size();
}

std::size_t HeteroGraph::out_degree(NodeId n) const {
  check_node(n);
  return out_[n].size();
}

std::optional<NodeId> HeteroGraph::find_external(const std::string& id) const {
  auto it = by_external_.find(id);
  if (it == by_external_.end()) return std::nullopt;
  return it->second;
}

std::vector<NodeId> HeteroGraph::authors_of_paper(NodeId paper) const {
  check_node(paper);
  std::vector<std::pair<std::uint64_t, NodeId>> byline;
  for (const Adjacent& a : in_[paper])
    if (a.kind == EdgeKind::AuthorWritesPaper) byline.emplace_back(edges_[a.edge].seq, a.other);
  std::sort(byline.begin(), byline.end());
  std::vector<NodeId> out;
  out.reserve(byline.size());
  for (const auto& [seq, id] : byline) out.push_back(id);
  return out;
}

std::optional<NodeId> HeteroGraph::venue_of_paper(NodeId paper) const {
  check_node(paper);
  for (const Adjacent& a : out_[paper])
    if (a.kind == EdgeKind::PaperPublishedInVenue) return a.other;
  return std::nullopt;
}

const std::vector<NodeId>& HeteroGraph::nodes_of_kind(NodeKind k) const {
  return by_kind_[static_cast<int>(k)];
}

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

namespace {

using json = nlohmann::json;

json parse_line(const std::string& line, const std::string& path, std::size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw DataError(path + " line " + std::to_string(lineno) + ": malformed JSON object");
  return j;
}

void require_keys(const json& j, std::initializer_list<const char*> keys, const std::string& path,
                  std::size_t lineno) {
  for (const char* k : keys)
    if (!j.contains(k))
      throw DataError(path + " line " + std::to_string(lineno) + ": missing key '" + k + "'");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known)
      throw DataError(path + " line " + std::to_string(lineno) + ": unknown key '" + it.key() +
                      "'");
  }
}

}  // namespace

HeteroGraph load_graph(const std::string& nodes_path, const std::string& edges_path) {
  std::ifstream nf(nodes_path);
  if (!nf) throw DataError("cannot open " + nodes_path);
  HeteroGraph g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(nf, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, nodes_path, lineno);
    require_keys(j, {"id", "kind", "birth_time", "features"}, nodes_path, lineno);
    try {
      std::string ext = j.at("id").get<std::string>();
      auto kind = node_kind_from(j.at("kind").get<std::string>());
      if (!kind)
        throw DataError("unknown node kind '" + j.at("kind").get<std::string>() + "'");
      FeatureSet feats;
      for (auto it = j.at("features").begin(); it != j.at("features").end(); ++it)
        feats.emplace_back(it.key(), it.value().get<std::vector<double>>());
      g.add_node(std::move(ext), *kind, j.at("birth_time").get<double>(), std::move(feats));
    } catch (const json::exception& e) {
      throw DataError(nodes_path + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(nodes_path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }

  std::ifstream ef(edges_path);
  if (!ef) throw DataError("cannot open " + edges_path);
  lineno = 0;
  while (std::getline(ef, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, edges_path, lineno);
    require_keys(j, {"src", "dst", "kind", "weight", "time"}, edges_path, lineno);
    try {
      auto src = g.find_external(j.at("src").get<std::string>());
      auto dst = g.find_external(j.at("dst").get<std::string>());
      if (!src || !dst)
        throw DataError("dangling endpoint '" +
                        j.at(src ? "dst" : "src").get<std::string>() + "'");
      auto kind = edge_kind_from(j.at("kind").get<std::string>());
      if (!kind)
        throw DataError("unknown edge kind '" + j.at("kind").get<std::string>() + "'");
      g.add_edge(*src, *dst, *kind, j.at("weight").get<double>(), j.at("time").get<double>());
    } catch (const json::exception& e) {
      throw DataError(edges_path + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(edges_path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  g.finalize();
  return g;
}

void save_graph(const HeteroGraph& g, const std::string& nodes_path,
                const std::string& edges_path) {
  std::ofstream nf(nodes_path, std::ios::binary);
  if (!nf) throw DataError("cannot write " + nodes_path);
  for (NodeId i = 0; i < g.node_count(); ++i) {
    const NodeRecord& n = g.node(i);
    nf << "{\"birth_time\":" << format_g9(n.birth_time) << ",\"features\":{";
    bool first = true;
    for (const auto& [name, vec] : n.features) {
      if (!first) nf << ',';
      first = false;
      nf << '"' << json_escape(name) << "\":[";
      for (std::size_t k = 0; k < vec.size(); ++k) {
        if (k) nf << ',';
        nf << format_g9(vec[k]);
      }
      nf << ']';
    }
    nf << "},\"id\":\"" << json_escape(n.external_id) << "\",\"kind\":\"" << to_string(n.kind)
       << "\"}\n";
  }
  if (!nf.good()) throw DataError("write failed for " + nodes_path);

  std::ofstream ef(edges_path, std::ios::binary);
  if (!ef) throw DataError("cannot write " + edges_path);
  for (const EdgeRecord& e : g.edges()) {
    ef << "{\"dst\":\"" << json_escape(g.node(e.dst).external_id) << "\",\"kind\":\""
       << to_string(e.kind) << "\",\"src\":\"" << json_escape(g.node(e.src).external_id)
       << "\",\"time\":" << format_g9(e.time) << ",\"weight\":" << format_g9(e.weight) << "}\n";
  }
  if (!ef.good()) throw DataError("write failed for " + edges_path);
}

}  // namespace hdgnn
