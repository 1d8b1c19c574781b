#include "hdgnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "hdgnn/errors.hpp"
#include "hdgnn/rng.hpp"

namespace hdgnn {

namespace {

void validate(const ObservationConfig& cfg) {
  if (!(cfg.t_r > 0.0 && cfg.t_r < cfg.t_p))
    throw ConfigError("observation window requires 0 < t_r < t_p");
  if (cfg.train_frac < 0.0 || cfg.val_frac < 0.0 || cfg.test_frac < 0.0 ||
      std::fabs(cfg.train_frac + cfg.val_frac + cfg.test_frac - 1.0) > 1e-9)
    throw ConfigError("split fractions must be nonnegative and sum to 1");
  if (cfg.max_seq == 0) throw ConfigError("max_seq must be positive");
}

CitingEvent make_event(const HeteroGraph& g, NodeId citing, double t) {
  CitingEvent ev;
  ev.paper = citing;
  ev.authors = g.authors_of_paper(citing);
  if (ev.authors.empty())
    throw DataError("citing paper " + g.node(citing).external_id + " has no authors");
  std::optional<NodeId> venue = g.venue_of_paper(citing);
  if (!venue) throw DataError("citing paper " + g.node(citing).external_id + " has no venue");
  ev.venue = *venue;
  ev.time = t;
  return ev;
}

void collect_citations(const HeteroGraph& g, NodeId paper, double t0,
                       std::vector<std::pair<double, NodeId>>& out) {
  for (const Adjacent& a : g.in_edges(paper))
    if (a.kind == EdgeKind::PaperCitesPaper) out.emplace_back(g.edge(a.edge).time - t0, a.other);
}

std::vector<NodeId> papers_of_author(const HeteroGraph& g, NodeId author) {
  std::vector<NodeId> papers;
  for (const Adjacent& a : g.out_edges(author))
    if (a.kind == EdgeKind::AuthorWritesPaper) papers.push_back(a.other);
  return papers;
}

std::vector<Cascade> assemble(const HeteroGraph& g, const ObservationConfig& cfg, NodeKind kind) {
  validate(cfg);
  double horizon = g.max_edge_time();
  bool any_mature = false;
  std::vector<Cascade> out;
  for (NodeId n : g.nodes_of_kind(kind)) {
    double t0;
    std::vector<std::pair<double, NodeId>> cites;
    if (kind == NodeKind::Paper) {
      t0 = g.node(n).birth_time;
      if (t0 + cfg.t_p > horizon) continue;
      collect_citations(g, n, t0, cites);
    } else {
      std::vector<NodeId> papers = papers_of_author(g, n);
      if (papers.empty()) continue;  // never started a career
      t0 = author_career_start(g, n);
      if (t0 + cfg.t_p > horizon) continue;
      for (NodeId p : papers) collect_citations(g, p, t0, cites);
    }
    any_mature = true;
    std::sort(cites.begin(), cites.end());

    std::size_t observed = 0;
    std::uint64_t label = 0;
    for (const auto& [t, citing] : cites) {
      if (t >= 0.0 && t <= cfg.t_r) ++observed;
      if (t <= cfg.t_p) ++label;
    }
    if (observed < cfg.min_observed) continue;

    Cascade c;
    c.target = n;
    c.target_kind = kind;
    c.label = label;
    for (const auto& [t, citing] : cites) {
      if (c.events.size() == cfg.max_seq) break;
      if (t >= 0.0 && t <= cfg.t_r) c.events.push_back(make_event(g, citing, t));
    }
    out.push_back(std::move(c));
  }
  if (!any_mature)
    throw DataError("prediction horizon t_p reaches past the newest edge for every target");
  if (out.empty()) throw DataError("no targets survive the observation filters");

  std::vector<std::size_t> idx(out.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng shuf = Rng::substream(cfg.seed, 0x73706c6974ull, static_cast<std::uint64_t>(kind));
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[shuf.next_below(i)]);
  std::size_t b1 = static_cast<std::size_t>(static_cast<double>(out.size()) * cfg.train_frac + 0.5);
  std::size_t b2 = static_cast<std::size_t>(
      static_cast<double>(out.size()) * (cfg.train_frac + cfg.val_frac) + 0.5);
  for (std::size_t i = 0; i < idx.size(); ++i)
    out[idx[i]].split = i < b1 ? Split::Train : i < b2 ? Split::Val : Split::Test;
  return out;
}

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw DataError("dataset line " + std::to_string(line) + ": " + what);
}

}  // namespace

double author_career_start(const HeteroGraph& g, NodeId author) {
  if (g.node(author).kind != NodeKind::Author)
    throw DataError("node " + g.node(author).external_id + " is not an author");
  bool found = false;
  double start = 0.0;
  for (const Adjacent& a : g.out_edges(author)) {
    if (a.kind != EdgeKind::AuthorWritesPaper) continue;
    double t = g.edge(a.edge).time;
    if (!found || t < start) start = t;
    found = true;
  }
  if (!found) throw DataError("author " + g.node(author).external_id + " has no papers");
  return start;
}

std::vector<Cascade> build_paper_dataset(const HeteroGraph& g, const ObservationConfig& cfg) {
  return assemble(g, cfg, NodeKind::Paper);
}

std::vector<Cascade> build_author_dataset(const HeteroGraph& g, const ObservationConfig& cfg) {
  return assemble(g, cfg, NodeKind::Author);
}

void save_dataset(const std::vector<Cascade>& samples, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  for (const Cascade& c : samples) {
    nlohmann::json j;
    j["target"] = c.target;
    j["kind"] = to_string(c.target_kind);
    j["split"] = to_string(c.split);
    j["label"] = c.label;
    nlohmann::json events = nlohmann::json::array();
    for (const CitingEvent& ev : c.events)
      events.push_back({{"paper", ev.paper},
                        {"authors", ev.authors},
                        {"venue", ev.venue},
                        {"t", ev.time}});
    j["events"] = std::move(events);
    f << j.dump() << '\n';
  }
  if (!f.good()) throw DataError("failed while writing " + path);
}

std::vector<Cascade> load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path);
  std::vector<Cascade> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail_line(lineno, "invalid JSON object");
    for (const auto& [key, _] : j.items())
      if (key != "target" && key != "kind" && key != "split" && key != "label" &&
          key != "events")
        fail_line(lineno, "unknown key '" + key + "'");
    if (!j.contains("target") || !j.contains("kind") || !j.contains("split") ||
        !j.contains("label") || !j.contains("events"))
      fail_line(lineno, "missing required key");

    Cascade c;
    if (!j["target"].is_number_unsigned()) fail_line(lineno, "target must be an id");
    c.target = j["target"].get<NodeId>();
    if (!j["kind"].is_string()) fail_line(lineno, "kind must be paper or author");
    std::optional<NodeKind> kind = node_kind_from(j["kind"].get<std::string>());
    if (!kind || *kind == NodeKind::Venue) fail_line(lineno, "kind must be paper or author");
    c.target_kind = *kind;
    if (!j["split"].is_string()) fail_line(lineno, "split must be train, val, or test");
    std::optional<Split> split = split_from(j["split"].get<std::string>());
    if (!split) fail_line(lineno, "split must be train, val, or test");
    c.split = *split;
    if (!j["label"].is_number_unsigned()) fail_line(lineno, "label must be a nonnegative count");
    c.label = j["label"].get<std::uint64_t>();
    if (!j["events"].is_array()) fail_line(lineno, "events must be an array");
    for (const auto& e : j["events"]) {
      if (!e.is_object()) fail_line(lineno, "event must be an object");
      for (const auto& [key, _] : e.items())
        if (key != "paper" && key != "authors" && key != "venue" && key != "t")
          fail_line(lineno, "unknown event key '" + key + "'");
      if (!e.contains("paper") || !e.contains("authors") || !e.contains("venue") ||
          !e.contains("t"))
        fail_line(lineno, "event missing required key");
      CitingEvent ev;
      if (!e["paper"].is_number_unsigned()) fail_line(lineno, "event paper must be an id");
      ev.paper = e["paper"].get<NodeId>();
      if (!e["authors"].is_array() || e["authors"].empty())
        fail_line(lineno, "event authors must be a nonempty array");
      for (const auto& a : e["authors"]) {
        if (!a.is_number_unsigned()) fail_line(lineno, "author ids must be unsigned");
        ev.authors.push_back(a.get<NodeId>());
      }
      if (!e["venue"].is_number_unsigned()) fail_line(lineno, "event venue must be an id");
      ev.venue = e["venue"].get<NodeId>();
      if (!e["t"].is_number()) fail_line(lineno, "event t must be a number");
      ev.time = e["t"].get<double>();
      c.events.push_back(std::move(ev));
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace hdgnn
