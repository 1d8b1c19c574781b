#include "hdgnn/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hdgnn/cascade.hpp"
#include "hdgnn/config.hpp"
#include "hdgnn/dataset.hpp"
#include "hdgnn/encoder.hpp"
#include "hdgnn/errors.hpp"
#include "hdgnn/graph.hpp"
#include "hdgnn/metrics.hpp"
#include "hdgnn/sampler.hpp"
#include "hdgnn/synth.hpp"

namespace fs = std::filesystem;

namespace hdgnn {

namespace {

constexpr std::uint64_t kEncoderInit = 0x656e636f64ull;  // "encod"
constexpr std::uint64_t kModelInit = 0x6d6f64656cull;    // "model"

struct Paths {
  fs::path dir;

  explicit Paths(const std::string& d) : dir(d) {}
  std::string nodes() const { return (dir / "nodes.jsonl").string(); }
  std::string edges() const { return (dir / "edges.jsonl").string(); }
  std::string neighbor_sets() const { return (dir / "neighbor_sets.bin").string(); }
  std::string embeddings() const { return (dir / "embeddings.bin").string(); }
  std::string checkpoint() const { return (dir / "checkpoint.bin").string(); }
  std::string history() const { return (dir / "history.json").string(); }
  std::string report() const { return (dir / "report.json").string(); }
  std::string predictions() const { return (dir / "predictions.csv").string(); }
  std::string stats() const { return (dir / "stats.json").string(); }

  void ensure() const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string());
  }
};

int env_threads() {
  const char* s = std::getenv("HDGNN_THREADS");
  if (!s || !*s) return 1;
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != std::strlen(s) || v <= 0) throw std::invalid_argument("range");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("HDGNN_THREADS must be a positive integer");
  }
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f << j.dump(2) << '\n';
  if (!f.good()) throw DataError("failed while writing " + path);
}

ModelConfig with_variant(ModelConfig m, const std::string& v) {
  if (v == "full") return m;
  if (v == "maxp")
    m.aggregator = Aggregator::MaxPool;
  else if (v == "sump")
    m.aggregator = Aggregator::SumPool;
  else if (v == "noauthor")
    m.use_author = false;
  else if (v == "novenue")
    m.use_venue = false;
  else
    throw ConfigError("unknown model variant '" + v + "'");
  return m;
}

HeteroGraph load_pipeline_graph(const Paths& p) { return load_graph(p.nodes(), p.edges()); }

std::vector<Cascade> build_dataset(const HeteroGraph& g, const RunConfig& cfg,
                                   const std::string& task) {
  if (task == "paper") return build_paper_dataset(g, cfg.obs);
  if (task == "author") return build_author_dataset(g, cfg.obs);
  throw ConfigError("task must be paper or author");
}

std::vector<ad::Array> load_embedding_table(const HeteroGraph& g, const RunConfig& cfg,
                                            const Paths& p) {
  std::vector<ad::Array> table = load_embeddings(p.embeddings());
  if (table.size() != g.node_count())
    throw DataError("embedding table covers " + std::to_string(table.size()) + " nodes but the graph has " +
                    std::to_string(g.node_count()));
  if (table.empty() || table[0].shape.size() != 1 ||
      table[0].shape[0] != static_cast<std::size_t>(cfg.enc.d_e))
    throw DataError("embedding dimension does not match encoder d_e");
  return table;
}

std::string venue_key(const HeteroGraph& g, const Cascade& c) {
  if (c.target_kind != NodeKind::Paper) return "";
  std::optional<NodeId> v = g.venue_of_paper(c.target);
  return v ? g.node(*v).external_id : "";
}

std::vector<std::string> venue_keys_for_split(const HeteroGraph& g,
                                              const std::vector<Cascade>& data, Split split) {
  std::vector<std::string> keys;
  for (const Cascade& c : data)
    if (c.split == split) keys.push_back(venue_key(g, c));
  return keys;
}

nlohmann::json curve_json(const TrainResult& r, double lr) {
  return {{"lr", lr},           {"train", r.train_curve},   {"val", r.val_curve},
          {"best_epoch", r.best_epoch}, {"best_val", r.best_val}, {"epochs", r.epochs_run}};
}

int cmd_synth(const RunConfig& cfg, const Paths& p) {
  p.ensure();
  HeteroGraph g = generate_synthetic(cfg.synth);
  save_graph(g, p.nodes(), p.edges());
  std::cout << "wrote " << p.nodes() << " (" << g.node_count() << " nodes) and " << p.edges()
            << " (" << g.edge_count() << " edges)\n";
  return 0;
}

int cmd_ingest(const RunConfig&, const Paths& p, std::string nodes, std::string edges) {
  if (nodes.empty()) nodes = p.nodes();
  if (edges.empty()) edges = p.edges();
  HeteroGraph g = load_graph(nodes, edges);
  nlohmann::json j;
  j["nodes"] = g.node_count();
  j["edges"] = g.edge_count();
  j["papers"] = g.nodes_of_kind(NodeKind::Paper).size();
  j["authors"] = g.nodes_of_kind(NodeKind::Author).size();
  j["venues"] = g.nodes_of_kind(NodeKind::Venue).size();
  j["max_edge_time"] = g.max_edge_time();
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_sample(const RunConfig& cfg, const Paths& p) {
  p.ensure();
  HeteroGraph g = load_pipeline_graph(p);
  std::vector<NeighborSets> sets = build_all_neighbor_sets(g, cfg.walk);
  save_neighbor_sets(sets, p.neighbor_sets());
  std::cout << "wrote " << p.neighbor_sets() << " (" << sets.size() << " neighbor sets)\n";
  return 0;
}

int cmd_pretrain(const RunConfig& cfg, const Paths& p) {
  p.ensure();
  HeteroGraph g = load_pipeline_graph(p);
  std::vector<NeighborSets> sets =
      load_neighbor_sets(p.neighbor_sets(), cfg.walk.k_paper, cfg.walk.k_author, cfg.walk.k_venue);
  if (sets.size() != g.node_count()) throw DataError("neighbor sets do not cover the graph");

  ad::ParameterStore store;
  Rng init = Rng::substream(cfg.seed, kEncoderInit);
  NodeEncoder enc(g, cfg.enc, store, init);

  std::vector<std::vector<NodeId>> corpus;
  corpus.reserve(g.node_count() * static_cast<std::size_t>(cfg.walk.walks_per_node));
  for (NodeId n = 0; n < g.node_count(); ++n)
    for (std::vector<NodeId>& w : walk_sequences(g, n, cfg.walk)) corpus.push_back(std::move(w));

  double loss = pretrain_skipgram(enc, store, corpus, sets, cfg.pretrain);
  std::vector<ad::Array> table = enc.encode_all(sets);
  save_embeddings(table, p.embeddings());
  std::cout << "wrote " << p.embeddings() << " (" << table.size() << " embeddings, skip-gram loss "
            << loss << ")\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const Paths& p, const std::string& task,
              const std::string& variant, bool lr_search) {
  p.ensure();
  HeteroGraph g = load_pipeline_graph(p);
  std::vector<ad::Array> table = load_embedding_table(g, cfg, p);
  EmbedFn emb = table_lookup(table);
  std::vector<Cascade> data = build_dataset(g, cfg, task);
  ModelConfig mc = with_variant(cfg.model, variant);
  int d_e = static_cast<int>(table[0].shape[0]);

  nlohmann::json history;
  if (lr_search) {
    nlohmann::json entries = nlohmann::json::array();
    double best_val = std::numeric_limits<double>::infinity();
    int best = -1;
    ad::ParameterStore best_store;
    for (std::size_t i = 0; i < cfg.lr_grid.size(); ++i) {
      ad::ParameterStore store;
      Rng init = Rng::substream(cfg.seed, kModelInit);
      CascadeModel model(d_e, mc, store, init);
      TrainConfig tc = cfg.train;
      tc.lr = cfg.lr_grid[i];
      try {
        TrainResult r = train_cascade(model, store, data, emb, tc);
        entries.push_back(curve_json(r, tc.lr));
        if (r.best_val < best_val) {
          best_val = r.best_val;
          best = static_cast<int>(i);
          best_store = std::move(store);
        }
      } catch (const NumericError& e) {
        entries.push_back({{"lr", tc.lr}, {"diverged", true}, {"error", e.what()}});
      }
      std::cout << "lr " << cfg.lr_grid[i] << ": "
                << (entries.back().contains("diverged")
                        ? std::string("diverged")
                        : "best val " + std::to_string(entries.back()["best_val"].get<double>()))
                << '\n';
    }
    if (best < 0) throw NumericError("every learning rate in the grid diverged");
    best_store.save(p.checkpoint());
    history = {{"grid", entries}, {"chosen_lr", cfg.lr_grid[static_cast<std::size_t>(best)]}};
  } else {
    ad::ParameterStore store;
    Rng init = Rng::substream(cfg.seed, kModelInit);
    CascadeModel model(d_e, mc, store, init);
    TrainResult r = train_cascade(model, store, data, emb, cfg.train);
    store.save(p.checkpoint());
    history = curve_json(r, cfg.train.lr);
    std::cout << "best val " << r.best_val << " at epoch " << r.best_epoch << " ("
              << r.epochs_run << " epochs)\n";
  }
  write_json(history, p.history());
  std::cout << "wrote " << p.checkpoint() << " and " << p.history() << '\n';
  return 0;
}

std::vector<std::pair<double, double>> model_pairs(const RunConfig& cfg, const Paths& p,
                                                   const HeteroGraph& g,
                                                   const std::vector<Cascade>& data,
                                                   const std::string& variant, Split split) {
  std::vector<ad::Array> table = load_embedding_table(g, cfg, p);
  EmbedFn emb = table_lookup(table);
  ad::ParameterStore store;
  store.load(p.checkpoint());
  Rng unused(0);
  CascadeModel model(static_cast<int>(table[0].shape[0]), with_variant(cfg.model, variant), store,
                     unused);
  return predict_pairs(model, data, split, emb);
}

Split parse_split(const std::string& s) {
  std::optional<Split> sp = split_from(s);
  if (!sp) throw ConfigError("split must be train, val, or test");
  return *sp;
}

int cmd_eval(const RunConfig& cfg, const Paths& p, const std::string& task,
             const std::string& variant, const std::string& baseline,
             const std::string& split_name) {
  p.ensure();
  Split split = parse_split(split_name);
  HeteroGraph g = load_pipeline_graph(p);
  std::vector<Cascade> data = build_dataset(g, cfg, task);

  std::vector<std::pair<double, double>> pairs;
  if (baseline.empty())
    pairs = model_pairs(cfg, p, g, data, variant, split);
  else if (baseline == "uniform")
    pairs = uniform_predictions(data, split);
  else if (baseline == "feature_ctr")
    pairs = feature_predictions(g, cfg.obs, data, FeatureMode::CtrOnly, split);
  else if (baseline == "feature")
    pairs = feature_predictions(g, cfg.obs, data, FeatureMode::Full, split);
  else
    throw ConfigError("baseline must be uniform, feature_ctr, or feature");

  EvalReport rep = make_report(pairs, venue_keys_for_split(g, data, split));
  save_report(rep, p.report());
  std::cout << "msle " << rep.msle << "  acc " << rep.acc << "  n " << rep.n << '\n';
  std::cout << "wrote " << p.report() << '\n';
  return 0;
}

int cmd_predict(const RunConfig& cfg, const Paths& p, const std::string& task,
                const std::string& variant, const std::string& split_name) {
  p.ensure();
  Split split = parse_split(split_name);
  HeteroGraph g = load_pipeline_graph(p);
  std::vector<Cascade> data = build_dataset(g, cfg, task);
  std::vector<std::pair<double, double>> pairs = model_pairs(cfg, p, g, data, variant, split);

  std::ofstream f(p.predictions(), std::ios::binary);
  if (!f) throw DataError("cannot write " + p.predictions());
  f << "target_id,kind,label,prediction\n";
  std::size_t row = 0;
  char buf[64];
  for (const Cascade& c : data) {
    if (c.split != split) continue;
    std::snprintf(buf, sizeof buf, "%.10g", pairs[row].first);
    f << g.node(c.target).external_id << ','
      << (c.target_kind == NodeKind::Paper ? "paper" : "author") << ',' << c.label << ',' << buf
      << '\n';
    ++row;
  }
  if (!f.good()) throw DataError("failed while writing " + p.predictions());
  std::cout << "wrote " << p.predictions() << " (" << row << " rows)\n";
  return 0;
}

int cmd_stats(const RunConfig&, const Paths& p, int years_flag) {
  p.ensure();
  HeteroGraph g = load_pipeline_graph(p);
  std::size_t years = years_flag > 0
                          ? static_cast<std::size_t>(years_flag)
                          : static_cast<std::size_t>(std::floor(g.max_edge_time())) + 1;

  std::vector<std::vector<double>> cum = yearly_cumulative_citations(g, NodeKind::Paper, years);
  std::vector<double> totals;
  totals.reserve(cum.size());
  for (const auto& row : cum) totals.push_back(row.back());

  nlohmann::json j;
  j["years"] = years;
  j["ccdf"] = ccdf(totals);
  std::vector<std::pair<double, double>> tail;
  for (const auto& pt : ccdf(totals))
    if (pt.first >= 10.0) tail.push_back(pt);
  try {
    j["ccdf_tail_slope"] = loglog_slope(tail);
  } catch (const DataError&) {
    j["ccdf_tail_slope"] = nullptr;
  }
  j["pearson"] = pearson_year_matrix(cum);

  std::vector<std::vector<double>> papers, cites;
  author_yearly_activity(g, years, papers, cites);
  nlohmann::json prof = nlohmann::json::array();
  for (const YearStats& ys : productivity_profile(papers, cites))
    prof.push_back({{"papers", ys.mean_papers},
                    {"new_citations", ys.mean_new_citations},
                    {"product", ys.product}});
  j["productivity"] = prof;

  write_json(j, p.stats());
  std::cout << "wrote " << p.stats() << " (" << years << " years)\n";
  return 0;
}

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"hdgnn: heterogeneous dynamic GNN for citation cascade prediction"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed_val = 0;
  std::string out_override;
  app.add_option("--config", config_path, "run configuration file")->check(CLI::ExistingFile);
  CLI::Option* seed_opt = app.add_option("--seed", seed_val, "master seed override");
  CLI::Option* out_opt = app.add_option("--out", out_override, "artifact directory override");

  std::string task, variant = "full", baseline, split_name = "test";
  std::string nodes_path, edges_path;
  bool lr_search = false;
  int years_flag = 0;

  CLI::App* s_synth = app.add_subcommand("synth", "generate a synthetic temporal citation graph");
  CLI::App* s_ingest = app.add_subcommand("ingest", "validate a graph and print a summary");
  s_ingest->add_option("--nodes", nodes_path, "nodes.jsonl path (default: <out>/nodes.jsonl)");
  s_ingest->add_option("--edges", edges_path, "edges.jsonl path (default: <out>/edges.jsonl)");
  CLI::App* s_sample = app.add_subcommand("sample", "build neighbor sets by weighted RWR");
  CLI::App* s_pretrain =
      app.add_subcommand("pretrain", "skip-gram pretraining of node embeddings");
  CLI::App* s_train = app.add_subcommand("train", "train the cascade model");
  CLI::App* s_eval = app.add_subcommand("eval", "evaluate the model or a baseline");
  CLI::App* s_predict = app.add_subcommand("predict", "write per-target predictions");
  CLI::App* s_stats = app.add_subcommand("stats", "graph analytics (ccdf, pearson, productivity)");

  auto add_task = [&](CLI::App* s) {
    s->add_option("--task", task, "paper | author")->check(CLI::IsMember({"paper", "author"}));
  };
  auto add_variant = [&](CLI::App* s) {
    s->add_option("--variant", variant, "full | maxp | sump | noauthor | novenue")
        ->check(CLI::IsMember({"full", "maxp", "sump", "noauthor", "novenue"}));
  };
  auto add_split = [&](CLI::App* s) {
    s->add_option("--split", split_name, "train | val | test")
        ->check(CLI::IsMember({"train", "val", "test"}));
  };
  add_task(s_train);
  add_variant(s_train);
  s_train->add_flag("--lr-search", lr_search, "run the learning-rate grid, keep the best model");
  add_task(s_eval);
  add_variant(s_eval);
  add_split(s_eval);
  s_eval->add_option("--baseline", baseline, "uniform | feature_ctr | feature")
      ->check(CLI::IsMember({"uniform", "feature_ctr", "feature"}));
  add_task(s_predict);
  add_variant(s_predict);
  add_split(s_predict);
  s_stats->add_option("--years", years_flag, "profile length (default: graph span)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (seed_opt->count()) apply_seed(cfg, seed_val);
  if (out_opt->count()) cfg.out_dir = out_override;
  if (task.empty()) task = cfg.task;
  cfg.walk.threads = env_threads();
  Paths paths(cfg.out_dir);

  if (app.got_subcommand(s_synth)) return cmd_synth(cfg, paths);
  if (app.got_subcommand(s_ingest)) return cmd_ingest(cfg, paths, nodes_path, edges_path);
  if (app.got_subcommand(s_sample)) return cmd_sample(cfg, paths);
  if (app.got_subcommand(s_pretrain)) return cmd_pretrain(cfg, paths);
  if (app.got_subcommand(s_train)) return cmd_train(cfg, paths, task, variant, lr_search);
  if (app.got_subcommand(s_eval)) return cmd_eval(cfg, paths, task, variant, baseline, split_name);
  if (app.got_subcommand(s_predict)) return cmd_predict(cfg, paths, task, variant, split_name);
  if (app.got_subcommand(s_stats)) return cmd_stats(cfg, paths, years_flag);
  return 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace hdgnn
