#include "hdgnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hdgnn/errors.hpp"
#include "hdgnn/rng.hpp"

namespace hdgnn {

namespace {

constexpr int kTopicDim = 4;

std::vector<double> jittered_topic(const std::vector<double>& base, double sigma, Rng& rng) {
  std::vector<double> t(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) t[i] = base[i] + sigma * rng.gaussian();
  return t;
}

std::vector<double> random_topic(Rng& rng) {
  std::vector<double> t(kTopicDim);
  for (double& x : t) x = rng.uniform(-1.0, 1.0);
  return t;
}

// linear scan over weights, skipping already-picked entries
std::size_t draw_weighted(const std::vector<double>& w, const std::vector<bool>& used, Rng& rng) {
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!used[i]) total += w[i];
  double u = rng.next_double() * total;
  double cum = 0.0;
  std::size_t last = w.size();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (used[i]) continue;
    cum += w[i];
    last = i;
    if (u < cum) return i;
  }
  return last;  // numeric edge: u landed on the trailing rounding gap
}

}  // namespace

HeteroGraph generate_synthetic(const SynthConfig& cfg) {
  if (cfg.n_papers > 0 && (cfg.n_authors == 0 || cfg.n_venues == 0))
    throw ConfigError("generating papers requires at least one author and one venue");
  if (cfg.years <= 0.0 || cfg.pa_exponent <= 0.0 || cfg.pareto_shape <= 0.0 ||
      cfg.venue_spread < 0.0 || cfg.burst < 0.0)
    throw ConfigError("synthetic generator parameters out of range");

  Rng rng = Rng::substream(cfg.seed, 0x73796e7468ull);
  HeteroGraph g;

  // venues: quality sets both prestige features and citation pull
  std::vector<NodeId> venue_ids(cfg.n_venues);
  std::vector<double> venue_quality(cfg.n_venues);
  std::vector<std::vector<double>> venue_topic(cfg.n_venues);
  for (std::size_t v = 0; v < cfg.n_venues; ++v) {
    venue_quality[v] = rng.lognormal(0.0, cfg.venue_spread);
    venue_topic[v] = random_topic(rng);
    FeatureSet feats{{"field", venue_topic[v]},
                     {"prestige", {std::log2(venue_quality[v] + 1.0) + 0.3 * rng.gaussian()}}};
    venue_ids[v] = g.add_node("v" + std::to_string(v), NodeKind::Venue, 0.0, std::move(feats));
  }
  // rank-normalized venue score in [0, 1]
  std::vector<double> venue_score(cfg.n_venues, 0.0);
  {
    std::vector<std::size_t> order(cfg.n_venues);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return venue_quality[a] < venue_quality[b]; });
    for (std::size_t r = 0; r < order.size(); ++r)
      venue_score[order[r]] =
          order.size() > 1 ? static_cast<double>(r) / static_cast<double>(order.size() - 1) : 1.0;
  }

  // authors: staggered entry, Pareto-tailed productivity
  std::vector<NodeId> author_ids(cfg.n_authors);
  std::vector<double> author_entry(cfg.n_authors);
  std::vector<double> author_weight(cfg.n_authors);
  for (std::size_t a = 0; a < cfg.n_authors; ++a)
    author_entry[a] = rng.uniform(0.0, 0.6 * cfg.years);
  if (cfg.n_authors > 0) {
    // someone must be active before the first paper appears
    *std::min_element(author_entry.begin(), author_entry.end()) = 0.0;
  }
  for (std::size_t a = 0; a < cfg.n_authors; ++a) {
    author_weight[a] = std::min(rng.pareto(1.0, cfg.pareto_shape), 60.0);
    const std::vector<double>& base =
        cfg.n_venues > 0 ? venue_topic[rng.next_below(cfg.n_venues)] : random_topic(rng);
    FeatureSet feats{{"drive", {std::log2(author_weight[a]) + 0.3 * rng.gaussian()}},
                     {"field", jittered_topic(base, 0.3, rng)}};
    author_ids[a] =
        g.add_node("a" + std::to_string(a), NodeKind::Author, author_entry[a], std::move(feats));
  }
  // authors ordered by entry; prefix of this order = everyone active at time t
  std::vector<std::size_t> by_entry(cfg.n_authors);
  std::iota(by_entry.begin(), by_entry.end(), 0);
  std::sort(by_entry.begin(), by_entry.end(),
            [&](std::size_t a, std::size_t b) { return author_entry[a] < author_entry[b]; });
  std::vector<double> sorted_entry(cfg.n_authors);
  for (std::size_t i = 0; i < cfg.n_authors; ++i) sorted_entry[i] = author_entry[by_entry[i]];

  // papers arrive in birth order
  std::vector<NodeId> paper_ids(cfg.n_papers);
  std::vector<double> paper_birth(cfg.n_papers);
  std::vector<std::size_t> paper_venue(cfg.n_papers);
  std::vector<double> paper_fitness(cfg.n_papers);
  std::vector<double> paper_pull(cfg.n_papers);  // fitness x venue quality, time-free part
  std::vector<double> paper_z(cfg.n_papers);     // normalized fitness for the elite signal
  std::vector<std::uint64_t> paper_cites(cfg.n_papers, 0);
  std::vector<std::vector<NodeId>> paper_authors(cfg.n_papers);

  std::vector<double> venue_pick(cfg.n_venues);
  for (std::size_t v = 0; v < cfg.n_venues; ++v) venue_pick[v] = std::pow(venue_quality[v], 0.7);

  std::vector<double> ref_weight;
  std::vector<bool> ref_used;
  std::vector<bool> author_used(cfg.n_authors, false);

  for (std::size_t i = 0; i < cfg.n_papers; ++i) {
    double t = cfg.years * (static_cast<double>(i) + rng.next_double()) /
               static_cast<double>(cfg.n_papers);
    paper_birth[i] = t;

    std::vector<bool> no_used(cfg.n_venues, false);
    std::size_t v = draw_weighted(venue_pick, no_used, rng);
    paper_venue[i] = v;
    double fitness = std::min(rng.pareto(1.0, cfg.pa_exponent), 1e4);
    paper_fitness[i] = fitness;
    paper_pull[i] = fitness * std::pow(venue_quality[v], 0.5);
    paper_z[i] = std::min(1.0, std::log1p(fitness) / 6.0);

    // byline from authors active at t, biased by productivity
    std::size_t active = static_cast<std::size_t>(
        std::upper_bound(sorted_entry.begin(), sorted_entry.end(), t) - sorted_entry.begin());
    std::size_t n_auth = 1 + std::min<std::size_t>(4, rng.poisson(1.0));
    std::vector<NodeId> byline;
    if (active == 0) {
      byline.push_back(author_ids[by_entry[0]]);  // earliest entrant bootstraps the field
    } else {
      n_auth = std::min(n_auth, active);
      std::vector<std::size_t> picked;
      for (std::size_t k = 0; k < n_auth; ++k) {
        double total = 0.0;
        for (std::size_t j = 0; j < active; ++j)
          if (!author_used[by_entry[j]]) total += author_weight[by_entry[j]];
        double u = rng.next_double() * total;
        double cum = 0.0;
        std::size_t chosen = by_entry[active - 1];
        for (std::size_t j = 0; j < active; ++j) {
          std::size_t a = by_entry[j];
          if (author_used[a]) continue;
          cum += author_weight[a];
          chosen = a;
          if (u < cum) break;
        }
        author_used[chosen] = true;
        picked.push_back(chosen);
        byline.push_back(author_ids[chosen]);
      }
      for (std::size_t a : picked) author_used[a] = false;
    }
    paper_authors[i] = byline;

    FeatureSet feats{
        {"richness", {std::log2(fitness + 1.0) + 0.8 * rng.gaussian()}},
        {"topic", jittered_topic(venue_topic[v], 0.25, rng)}};
    NodeId pid = g.add_node("p" + std::to_string(i), NodeKind::Paper, t, std::move(feats));
    paper_ids[i] = pid;

    for (NodeId a : byline) {
      g.add_edge(a, pid, EdgeKind::AuthorWritesPaper, 1.0, t);
      g.add_edge(a, venue_ids[v], EdgeKind::AuthorPublishesVenue, 1.0, t);
    }
    g.add_edge(pid, venue_ids[v], EdgeKind::PaperPublishedInVenue, 1.0, t);
    for (std::size_t x = 0; x < byline.size(); ++x)
      for (std::size_t y = x + 1; y < byline.size(); ++y) {
        g.add_edge(byline[x], byline[y], EdgeKind::AuthorCollabAuthor, 1.0, t);
        g.add_edge(byline[y], byline[x], EdgeKind::AuthorCollabAuthor, 1.0, t);
      }

    // references: recency-damped preferential attachment with an elite-early boost
    if (i == 0) continue;
    std::size_t refs = std::min<std::size_t>(i, 6 + rng.poisson(14.0));
    if (refs == 0) continue;
    ref_weight.assign(i, 0.0);
    ref_used.assign(i, false);
    double sv = venue_score[v];
    for (std::size_t j = 0; j < i; ++j) {
      double age = t - paper_birth[j];
      double recency = std::exp(-age / 1.25) + 0.015;
      double elite = std::exp(cfg.burst * sv * paper_z[j] * std::exp(-age));
      ref_weight[j] = paper_pull[j] *
                      std::pow(1.0 + static_cast<double>(paper_cites[j]), 0.25) * recency * elite;
    }
    for (std::size_t k = 0; k < refs; ++k) {
      std::size_t j = draw_weighted(ref_weight, ref_used, rng);
      ref_used[j] = true;
      ++paper_cites[j];
      g.add_edge(pid, paper_ids[j], EdgeKind::PaperCitesPaper, 1.0, t);
      for (NodeId a : paper_authors[j])
        g.add_edge(pid, a, EdgeKind::PaperCitesAuthor, 1.0, t);
      for (NodeId a : byline) g.add_edge(a, paper_ids[j], EdgeKind::AuthorCitesPaper, 1.0, t);
    }
  }

  g.finalize();
  return g;
}

}  // namespace hdgnn
