#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <doctest.h>

#include "hdgnn/dataset.hpp"
#include "hdgnn/errors.hpp"
#include "hdgnn/graph.hpp"
#include "hdgnn/synth.hpp"

using namespace hdgnn;

namespace {

void spit(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  f << content;
}

// venue + single author shared by all papers; papers get written/published at birth
struct MiniGraph {
  HeteroGraph g;
  NodeId v, a;

  MiniGraph() {
    v = g.add_node("v", NodeKind::Venue, 0.0);
    a = g.add_node("a", NodeKind::Author, 0.0);
  }

  NodeId paper(const std::string& id, double birth) {
    NodeId p = g.add_node(id, NodeKind::Paper, birth);
    g.add_edge(a, p, EdgeKind::AuthorWritesPaper, 1.0, birth);
    g.add_edge(p, v, EdgeKind::PaperPublishedInVenue, 1.0, birth);
    return p;
  }

  void cite(NodeId src, NodeId dst, double t) {
    g.add_edge(src, dst, EdgeKind::PaperCitesPaper, 1.0, t);
  }
};

double gini(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  double n = static_cast<double>(xs.size());
  double sum = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sum += xs[i];
    weighted += static_cast<double>(i + 1) * xs[i];
  }
  return 2.0 * weighted / (n * sum) - (n + 1.0) / n;
}

}  // namespace

TEST_CASE("observation window splits citations at t_r") {
  MiniGraph m;
  NodeId p = m.paper("p", 0.0);
  NodeId c1 = m.paper("c1", 0.5);
  NodeId c2 = m.paper("c2", 1.2);
  NodeId c3 = m.paper("c3", 2.5);
  m.cite(c1, p, 0.5);
  m.cite(c2, p, 1.2);
  m.cite(c3, p, 2.5);
  m.paper("z", 25.0);  // pushes the horizon past p's prediction window
  m.g.finalize();

  ObservationConfig cfg;
  cfg.min_observed = 1;
  std::vector<Cascade> ds = build_paper_dataset(m.g, cfg);
  REQUIRE(ds.size() == 1);  // citing papers have zero observed citations
  const Cascade& c = ds[0];
  CHECK(c.target == p);
  CHECK(c.target_kind == NodeKind::Paper);
  CHECK(c.label == 3);  // 2.5 is past t_r but inside t_p
  REQUIRE(c.events.size() == 2);
  CHECK(c.events[0].paper == c1);
  CHECK(c.events[0].time == 0.5);
  CHECK(c.events[0].authors == std::vector<NodeId>{m.a});
  CHECK(c.events[0].venue == m.v);
  CHECK(c.events[1].paper == c2);
  CHECK(c.events[1].time == 1.2);
}

TEST_CASE("window boundaries are inclusive at t_r and t_p") {
  MiniGraph m;
  NodeId p = m.paper("p", 0.0);
  NodeId cr = m.paper("cr", 2.0);
  NodeId cp = m.paper("cp", 20.0);
  NodeId cx = m.paper("cx", 20.0);
  m.cite(cr, p, 2.0);   // exactly t_r: observed
  m.cite(cp, p, 20.0);  // exactly t_p: labelled
  m.cite(cx, p, 20.5);  // past t_p: dropped from the label
  m.g.finalize();

  ObservationConfig cfg;
  cfg.min_observed = 1;
  std::vector<Cascade> ds = build_paper_dataset(m.g, cfg);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].target == p);
  CHECK(ds[0].label == 2);
  REQUIRE(ds[0].events.size() == 1);
  CHECK(ds[0].events[0].paper == cr);
  CHECK(ds[0].events[0].time == 2.0);
}

TEST_CASE("targets need the full prediction window before the horizon") {
  MiniGraph m;
  NodeId p = m.paper("p", 0.0);
  NodeId q = m.paper("q", 5.0);
  NodeId c1 = m.paper("c1", 1.0);
  NodeId cl = m.paper("cl", 20.0);
  NodeId cq = m.paper("cq", 6.0);
  m.cite(c1, p, 1.0);
  m.cite(cl, p, 20.0);  // horizon lands exactly at p's t0 + t_p
  m.cite(cq, q, 6.0);   // q would qualify on observations alone
  m.g.finalize();

  ObservationConfig cfg;
  cfg.min_observed = 1;
  std::vector<Cascade> ds = build_paper_dataset(m.g, cfg);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].target == p);  // q: 5 + 20 > 20, immature
  CHECK(ds[0].label == 2);
}

TEST_CASE("dataset errors distinguish immature graphs from filtered ones") {
  MiniGraph young;
  NodeId p = young.paper("p", 0.0);
  NodeId c1 = young.paper("c1", 1.0);
  young.cite(c1, p, 1.0);
  young.g.finalize();
  ObservationConfig cfg;
  cfg.min_observed = 1;
  CHECK_THROWS_WITH_AS(build_paper_dataset(young.g, cfg),
                       "prediction horizon t_p reaches past the newest edge for every target",
                       DataError);

  MiniGraph sparse;
  NodeId p2 = sparse.paper("p", 0.0);
  NodeId c2 = sparse.paper("c", 0.5);
  sparse.cite(c2, p2, 0.5);
  sparse.paper("z", 25.0);
  sparse.g.finalize();
  ObservationConfig strict;  // default min_observed = 10
  CHECK_THROWS_WITH_AS(build_paper_dataset(sparse.g, strict),
                       "no targets survive the observation filters", DataError);
}

TEST_CASE("observation config is validated") {
  MiniGraph m;
  NodeId p = m.paper("p", 0.0);
  NodeId c1 = m.paper("c1", 0.5);
  m.cite(c1, p, 0.5);
  m.paper("z", 25.0);
  m.g.finalize();

  ObservationConfig bad;
  bad.t_r = 0.0;
  CHECK_THROWS_AS(build_paper_dataset(m.g, bad), ConfigError);
  bad = ObservationConfig{};
  bad.t_r = 25.0;  // t_r must precede t_p
  CHECK_THROWS_AS(build_paper_dataset(m.g, bad), ConfigError);
  bad = ObservationConfig{};
  bad.train_frac = 0.9;  // sums to 1.4
  CHECK_THROWS_AS(build_paper_dataset(m.g, bad), ConfigError);
  bad = ObservationConfig{};
  bad.train_frac = 1.5;
  bad.val_frac = -0.25;
  CHECK_THROWS_AS(build_paper_dataset(m.g, bad), ConfigError);
  bad = ObservationConfig{};
  bad.max_seq = 0;
  CHECK_THROWS_AS(build_paper_dataset(m.g, bad), ConfigError);
}

TEST_CASE("events are sorted by time then citer and truncated at max_seq") {
  MiniGraph m;
  NodeId p = m.paper("p", 0.0);
  m.paper("z", 25.0);
  // pairs share a timestamp; creation order is reversed so the tie-break on
  // node id is visible (the later-created paper of each pair has the lower i)
  std::vector<NodeId> citer(150);
  for (int i = 149; i >= 0; --i) {
    double t = 0.01 * static_cast<double>(i / 2);
    citer[i] = m.paper("c" + std::to_string(i), t);
    m.cite(citer[i], p, t);
  }
  m.g.finalize();

  ObservationConfig cfg;  // max_seq = 100
  std::vector<Cascade> ds = build_paper_dataset(m.g, cfg);
  REQUIRE(ds.size() == 1);
  const Cascade& c = ds[0];
  CHECK(c.label == 150);
  REQUIRE(c.events.size() == 100);
  for (std::size_t k = 1; k < c.events.size(); ++k) {
    bool ordered = c.events[k - 1].time < c.events[k].time ||
                   (c.events[k - 1].time == c.events[k].time &&
                    c.events[k - 1].paper < c.events[k].paper);
    CHECK(ordered);
  }
  for (std::size_t k = 0; k < c.events.size(); ++k) {
    int mpair = static_cast<int>(k) / 2;
    // within a tied pair the smaller node id comes first, i.e. the 2m+1 paper
    NodeId expect = (k % 2 == 0) ? citer[2 * mpair + 1] : citer[2 * mpair];
    CHECK(c.events[k].paper == expect);
    CHECK(c.events[k].time == 0.01 * static_cast<double>(mpair));
  }
}

TEST_CASE("author cascades union citations across the author's papers") {
  HeteroGraph g;
  NodeId v = g.add_node("v", NodeKind::Venue, 0.0);
  NodeId A = g.add_node("A", NodeKind::Author, 0.0);
  NodeId B = g.add_node("B", NodeKind::Author, 0.0);
  NodeId C = g.add_node("C", NodeKind::Author, 0.0);  // never writes anything
  auto paper_by = [&](const std::string& id, double birth, NodeId who, bool pub) {
    NodeId p = g.add_node(id, NodeKind::Paper, birth);
    g.add_edge(who, p, EdgeKind::AuthorWritesPaper, 1.0, birth);
    if (pub) g.add_edge(p, v, EdgeKind::PaperPublishedInVenue, 1.0, birth);
    return p;
  };
  NodeId p1 = paper_by("p1", 1.0, A, false);  // career starts here
  NodeId p2 = paper_by("p2", 3.0, A, false);
  NodeId x1 = paper_by("x1", 1.5, B, true);
  NodeId x2 = paper_by("x2", 2.5, B, true);
  NodeId x3 = paper_by("x3", 3.5, B, true);
  NodeId x5 = paper_by("x5", 21.0, B, true);
  g.add_edge(x1, p1, EdgeKind::PaperCitesPaper, 1.0, 1.5);    // rel 0.5, observed
  g.add_edge(x2, p1, EdgeKind::PaperCitesPaper, 1.0, 2.875);  // rel 1.875, observed
  g.add_edge(x3, p1, EdgeKind::PaperCitesPaper, 1.0, 3.5);    // rel 2.5, labelled only
  g.add_edge(x3, p2, EdgeKind::PaperCitesPaper, 1.0, 3.5);    // same citer, second paper
  g.add_edge(x5, p2, EdgeKind::PaperCitesPaper, 1.0, 21.5);   // rel 20.5, beyond t_p
  g.finalize();

  CHECK(author_career_start(g, A) == 1.0);
  CHECK_THROWS_AS(author_career_start(g, p1), DataError);
  CHECK_THROWS_AS(author_career_start(g, C), DataError);

  ObservationConfig cfg;
  cfg.min_observed = 1;
  std::vector<Cascade> ds = build_author_dataset(g, cfg);
  REQUIRE(ds.size() == 1);  // B sees no citations, C has no career
  const Cascade& c = ds[0];
  CHECK(c.target == A);
  CHECK(c.target_kind == NodeKind::Author);
  CHECK(c.label == 4);
  REQUIRE(c.events.size() == 2);
  CHECK(c.events[0].paper == x1);
  CHECK(c.events[0].time == 0.5);
  CHECK(c.events[1].paper == x2);
  CHECK(c.events[1].time == 1.875);
  CHECK(c.events[0].authors == std::vector<NodeId>{B});
  CHECK(c.events[0].venue == v);

  // independent label oracle: scan every citation edge into A's papers
  std::uint64_t expect = 0;
  for (const EdgeRecord& e : g.edges())
    if (e.kind == EdgeKind::PaperCitesPaper && (e.dst == p1 || e.dst == p2) &&
        e.time - 1.0 <= cfg.t_p)
      ++expect;
  CHECK(c.label == expect);

  // the same graph viewed as a paper task has exactly one mature, cited target
  std::vector<Cascade> pds = build_paper_dataset(g, cfg);
  REQUIRE(pds.size() == 1);
  CHECK(pds[0].target == p1);  // p2 is born too late for the horizon
  CHECK(pds[0].label == 3);
  CHECK(pds[0].events.size() == 2);
}

TEST_CASE("citing papers must carry a byline and a venue") {
  {
    HeteroGraph g;
    NodeId v = g.add_node("v", NodeKind::Venue, 0.0);
    NodeId a = g.add_node("a", NodeKind::Author, 0.0);
    NodeId p = g.add_node("p", NodeKind::Paper, 0.0);
    g.add_edge(a, p, EdgeKind::AuthorWritesPaper, 1.0, 0.0);
    NodeId c = g.add_node("c", NodeKind::Paper, 1.0);
    g.add_edge(c, v, EdgeKind::PaperPublishedInVenue, 1.0, 1.0);
    g.add_edge(c, p, EdgeKind::PaperCitesPaper, 1.0, 1.0);
    NodeId z = g.add_node("z", NodeKind::Paper, 25.0);
    g.add_edge(a, z, EdgeKind::AuthorWritesPaper, 1.0, 25.0);
    g.finalize();
    ObservationConfig cfg;
    cfg.min_observed = 1;
    CHECK_THROWS_WITH_AS(build_paper_dataset(g, cfg), "citing paper c has no authors",
                         DataError);
  }
  {
    HeteroGraph g;
    NodeId a = g.add_node("a", NodeKind::Author, 0.0);
    NodeId p = g.add_node("p", NodeKind::Paper, 0.0);
    g.add_edge(a, p, EdgeKind::AuthorWritesPaper, 1.0, 0.0);
    NodeId c = g.add_node("c", NodeKind::Paper, 1.0);
    g.add_edge(a, c, EdgeKind::AuthorWritesPaper, 1.0, 1.0);
    g.add_edge(c, p, EdgeKind::PaperCitesPaper, 1.0, 1.0);
    NodeId z = g.add_node("z", NodeKind::Paper, 25.0);
    g.add_edge(a, z, EdgeKind::AuthorWritesPaper, 1.0, 25.0);
    g.finalize();
    ObservationConfig cfg;
    cfg.min_observed = 1;
    CHECK_THROWS_WITH_AS(build_paper_dataset(g, cfg), "citing paper c has no venue",
                         DataError);
  }
}

TEST_CASE("splits are deterministic, disjoint, and sized by the fractions") {
  SynthConfig scfg;
  scfg.n_papers = 600;
  scfg.n_authors = 200;
  scfg.n_venues = 5;
  scfg.seed = 3;
  HeteroGraph g = generate_synthetic(scfg);

  ObservationConfig cfg;
  std::vector<Cascade> ds = build_paper_dataset(g, cfg);
  REQUIRE(ds.size() >= 20);

  std::size_t n = ds.size();
  std::size_t b1 = static_cast<std::size_t>(static_cast<double>(n) * 0.5 + 0.5);
  std::size_t b2 = static_cast<std::size_t>(static_cast<double>(n) * 0.75 + 0.5);
  std::size_t tr = 0, va = 0, te = 0;
  for (const Cascade& c : ds) {
    if (c.split == Split::Train) ++tr;
    if (c.split == Split::Val) ++va;
    if (c.split == Split::Test) ++te;
  }
  CHECK(tr == b1);
  CHECK(va == b2 - b1);
  CHECK(te == n - b2);
  CHECK(tr + va + te == n);

  for (const Cascade& c : ds) {
    CHECK(c.label >= c.events.size());
    CHECK(c.events.size() >= cfg.min_observed);
    for (std::size_t k = 0; k < c.events.size(); ++k) {
      CHECK(c.events[k].time >= 0.0);
      CHECK(c.events[k].time <= cfg.t_r);
      if (k > 0) {
        bool ordered = c.events[k - 1].time < c.events[k].time ||
                       (c.events[k - 1].time == c.events[k].time &&
                        c.events[k - 1].paper <= c.events[k].paper);
        CHECK(ordered);
      }
    }
  }

  std::vector<Cascade> again = build_paper_dataset(g, cfg);
  REQUIRE(again.size() == n);
  bool same = true;
  for (std::size_t i = 0; i < n; ++i)
    same = same && again[i].target == ds[i].target && again[i].split == ds[i].split;
  CHECK(same);

  ObservationConfig other = cfg;
  other.seed = 1;
  std::vector<Cascade> shuffled = build_paper_dataset(g, other);
  bool any_moved = false;
  for (std::size_t i = 0; i < n; ++i) any_moved = any_moved || shuffled[i].split != ds[i].split;
  CHECK(any_moved);
}

TEST_CASE("generated graphs keep derived citation edges consistent") {
  SynthConfig scfg;
  scfg.n_papers = 600;
  scfg.n_authors = 200;
  scfg.n_venues = 5;
  scfg.seed = 3;
  HeteroGraph g = generate_synthetic(scfg);

  std::set<std::tuple<NodeId, NodeId, int>> present;
  for (const EdgeRecord& e : g.edges())
    present.emplace(e.src, e.dst, static_cast<int>(e.kind));

  std::size_t pcp = 0, missing = 0;
  for (const EdgeRecord& e : g.edges()) {
    if (e.kind != EdgeKind::PaperCitesPaper) continue;
    ++pcp;
    for (NodeId au : g.authors_of_paper(e.dst))
      if (!present.count({e.src, au, static_cast<int>(EdgeKind::PaperCitesAuthor)})) ++missing;
    for (NodeId au : g.authors_of_paper(e.src))
      if (!present.count({au, e.dst, static_cast<int>(EdgeKind::AuthorCitesPaper)})) ++missing;
  }
  CHECK(pcp > 1000);
  CHECK(missing == 0);
}

TEST_CASE("frozen seed yields a rich, heavy-tailed corpus") {
  SynthConfig scfg;  // defaults are the frozen configuration
  HeteroGraph g = generate_synthetic(scfg);
  ObservationConfig cfg;

  std::vector<Cascade> papers = build_paper_dataset(g, cfg);
  CHECK(papers.size() >= 300);
  std::vector<double> labels;
  labels.reserve(papers.size());
  for (const Cascade& c : papers) labels.push_back(static_cast<double>(c.label));
  CHECK(gini(labels) > 0.5);

  std::vector<Cascade> authors = build_author_dataset(g, cfg);
  CHECK(authors.size() >= 150);

  // author histories aggregate their papers, so they skew larger
  double pmean = 0.0, amean = 0.0;
  for (const Cascade& c : papers) pmean += static_cast<double>(c.label);
  for (const Cascade& c : authors) amean += static_cast<double>(c.label);
  pmean /= static_cast<double>(papers.size());
  amean /= static_cast<double>(authors.size());
  CHECK(amean > pmean);
}

TEST_CASE("dataset jsonl round trip preserves every field") {
  SynthConfig scfg;
  scfg.n_papers = 400;
  scfg.n_authors = 150;
  scfg.n_venues = 4;
  scfg.seed = 11;
  HeteroGraph g = generate_synthetic(scfg);
  ObservationConfig cfg;
  cfg.min_observed = 5;
  std::vector<Cascade> ds = build_paper_dataset(g, cfg);
  REQUIRE(ds.size() >= 10);

  std::string path = "ds_roundtrip.jsonl";
  save_dataset(ds, path);
  std::vector<Cascade> back = load_dataset(path);
  std::remove(path.c_str());

  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back[i].target == ds[i].target);
    CHECK(back[i].target_kind == ds[i].target_kind);
    CHECK(back[i].split == ds[i].split);
    CHECK(back[i].label == ds[i].label);
    REQUIRE(back[i].events.size() == ds[i].events.size());
    for (std::size_t k = 0; k < ds[i].events.size(); ++k) {
      CHECK(back[i].events[k].paper == ds[i].events[k].paper);
      CHECK(back[i].events[k].authors == ds[i].events[k].authors);
      CHECK(back[i].events[k].venue == ds[i].events[k].venue);
      CHECK(back[i].events[k].time == ds[i].events[k].time);
    }
  }
}

TEST_CASE("dataset loader rejects malformed input with line numbers") {
  std::string path = "ds_bad.jsonl";
  auto expect = [&](const std::string& content, const std::string& msg) {
    spit(path, content);
    CHECK_THROWS_WITH_AS(load_dataset(path), msg.c_str(), DataError);
  };
  std::string ok =
      R"({"target":5,"kind":"paper","split":"train","label":7,)"
      R"("events":[{"paper":1,"authors":[2],"venue":3,"t":0.5}]})";

  expect("oops", "dataset line 1: invalid JSON object");
  expect("[1,2]", "dataset line 1: invalid JSON object");
  expect(ok + "\nnope", "dataset line 2: invalid JSON object");
  expect("\n\nnope", "dataset line 3: invalid JSON object");
  expect(R"({"target":5,"kind":"paper","split":"train","label":7})",
         "dataset line 1: missing required key");
  expect(R"({"target":5,"kind":"paper","split":"train","label":7,"events":[],"foo":1})",
         "dataset line 1: unknown key 'foo'");
  expect(R"({"target":-5,"kind":"paper","split":"train","label":7,"events":[]})",
         "dataset line 1: target must be an id");
  expect(R"({"target":5,"kind":"venue","split":"train","label":7,"events":[]})",
         "dataset line 1: kind must be paper or author");
  expect(R"({"target":5,"kind":3,"split":"train","label":7,"events":[]})",
         "dataset line 1: kind must be paper or author");
  expect(R"({"target":5,"kind":"paper","split":"dev","label":7,"events":[]})",
         "dataset line 1: split must be train, val, or test");
  expect(R"({"target":5,"kind":"paper","split":7,"label":7,"events":[]})",
         "dataset line 1: split must be train, val, or test");
  expect(R"({"target":5,"kind":"paper","split":"train","label":-3,"events":[]})",
         "dataset line 1: label must be a nonnegative count");
  expect(R"({"target":5,"kind":"paper","split":"train","label":1.5,"events":[]})",
         "dataset line 1: label must be a nonnegative count");
  expect(R"({"target":5,"kind":"paper","split":"train","label":7,"events":3})",
         "dataset line 1: events must be an array");
  expect(R"({"target":5,"kind":"paper","split":"train","label":7,"events":[3]})",
         "dataset line 1: event must be an object");
  expect(R"({"target":5,"kind":"paper","split":"train","label":7,)"
             R"("events":[{"paper":1,"authors":[2],"venue":3,"t":0.5,"q":1}]})",
         "dataset line 1: unknown event key 'q'");
  expect(R"({"target":5,"kind":"paper","split":"train","label":7,)"
             R"("events":[{"authors":[2],"venue":3,"t":0.5}]})",
         "dataset line 1: event missing required key");
  expect(R"({"target":5,"kind":"paper","split":"train","label":7,)"
             R"("events":[{"paper":-1,"authors":[2],"venue":3,"t":0.5}]})",
         "dataset line 1: event paper must be an id");
  expect(R"({"target":5,"kind":"paper","split":"train","label":7,)"
             R"("events":[{"paper":1,"authors":[],"venue":3,"t":0.5}]})",
         "dataset line 1: event authors must be a nonempty array");
  expect(R"({"target":5,"kind":"paper","split":"train","label":7,)"
             R"("events":[{"paper":1,"authors":[2],"venue":3,"t":"x"}]})",
         "dataset line 1: event t must be a number");
  std::remove(path.c_str());

  // blank lines are skipped, not loaded
  spit(path, ok + "\n\n" + ok + "\n");
  std::vector<Cascade> loaded = load_dataset(path);
  std::remove(path.c_str());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].target == 5);
  CHECK(loaded[0].label == 7);
  REQUIRE(loaded[0].events.size() == 1);
  CHECK(loaded[0].events[0].authors == std::vector<NodeId>{2});

  CHECK_THROWS_WITH_AS(load_dataset("definitely_missing.jsonl"),
                       "cannot read definitely_missing.jsonl", DataError);
}
