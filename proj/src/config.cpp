#include "hdgnn/config.hpp"

#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hdgnn/errors.hpp"

namespace hdgnn {

namespace {

[[noreturn]] void fail(std::size_t lineno, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(lineno) + ": " + msg);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, std::size_t lineno) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) fail(lineno, "trailing characters after number '" + v + "'");
    return x;
  } catch (const std::invalid_argument&) {
    fail(lineno, "expected a number, got '" + v + "'");
  } catch (const std::out_of_range&) {
    fail(lineno, "number out of range: '" + v + "'");
  }
}

long long parse_int(const std::string& v, std::size_t lineno) {
  try {
    std::size_t used = 0;
    long long x = std::stoll(v, &used);
    if (used != v.size()) fail(lineno, "trailing characters after integer '" + v + "'");
    return x;
  } catch (const std::invalid_argument&) {
    fail(lineno, "expected an integer, got '" + v + "'");
  } catch (const std::out_of_range&) {
    fail(lineno, "integer out of range: '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, std::size_t lineno) {
  long long x = parse_int(v, lineno);
  if (x < 0) fail(lineno, "value must not be negative: '" + v + "'");
  return static_cast<std::uint64_t>(x);
}

std::size_t parse_size(const std::string& v, std::size_t lineno) {
  return static_cast<std::size_t>(parse_u64(v, lineno));
}

int parse_pos_int(const std::string& v, std::size_t lineno) {
  long long x = parse_int(v, lineno);
  if (x <= 0) fail(lineno, "value must be positive: '" + v + "'");
  return static_cast<int>(x);
}

bool parse_bool(const std::string& v, std::size_t lineno) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(lineno, "expected true or false, got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& v, std::size_t lineno) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(lineno, "empty entry in list '" + v + "'");
    out.push_back(parse_double(item, lineno));
  }
  if (out.empty()) fail(lineno, "empty list");
  return out;
}

void set_top(RunConfig& c, const std::string& k, const std::string& v, std::size_t lineno) {
  if (k == "seed")
    c.seed = parse_u64(v, lineno);
  else if (k == "out")
    c.out_dir = v;
  else if (k == "task") {
    if (v != "paper" && v != "author") fail(lineno, "task must be paper or author");
    c.task = v;
  } else
    fail(lineno, "unknown key '" + k + "'");
}

void set_synth(SynthConfig& s, const std::string& k, const std::string& v, std::size_t lineno) {
  if (k == "papers")
    s.n_papers = parse_size(v, lineno);
  else if (k == "authors")
    s.n_authors = parse_size(v, lineno);
  else if (k == "venues")
    s.n_venues = parse_size(v, lineno);
  else if (k == "years")
    s.years = parse_double(v, lineno);
  else if (k == "pa_exponent")
    s.pa_exponent = parse_double(v, lineno);
  else if (k == "venue_spread")
    s.venue_spread = parse_double(v, lineno);
  else if (k == "pareto_shape")
    s.pareto_shape = parse_double(v, lineno);
  else if (k == "burst")
    s.burst = parse_double(v, lineno);
  else
    fail(lineno, "unknown key '" + k + "' in [synth]");
}

void set_walk(WalkConfig& w, const std::string& k, const std::string& v, std::size_t lineno) {
  if (k == "q")
    w.q = parse_double(v, lineno);
  else if (k == "walk_length")
    w.walk_length = parse_pos_int(v, lineno);
  else if (k == "walks_per_node")
    w.walks_per_node = parse_pos_int(v, lineno);
  else if (k == "alpha")
    w.alpha = parse_double(v, lineno);
  else if (k == "beta")
    w.beta = parse_double(v, lineno);
  else if (k == "gamma")
    w.gamma = parse_double(v, lineno);
  else if (k == "k_paper")
    w.k_paper = parse_pos_int(v, lineno);
  else if (k == "k_author")
    w.k_author = parse_pos_int(v, lineno);
  else if (k == "k_venue")
    w.k_venue = parse_pos_int(v, lineno);
  else
    fail(lineno, "unknown key '" + k + "' in [walk]");
}

void set_dataset(ObservationConfig& o, const std::string& k, const std::string& v,
                 std::size_t lineno) {
  if (k == "t_r")
    o.t_r = parse_double(v, lineno);
  else if (k == "t_p")
    o.t_p = parse_double(v, lineno);
  else if (k == "min_observed")
    o.min_observed = parse_size(v, lineno);
  else if (k == "max_seq")
    o.max_seq = parse_size(v, lineno);
  else if (k == "train_frac")
    o.train_frac = parse_double(v, lineno);
  else if (k == "val_frac")
    o.val_frac = parse_double(v, lineno);
  else if (k == "test_frac")
    o.test_frac = parse_double(v, lineno);
  else
    fail(lineno, "unknown key '" + k + "' in [dataset]");
}

void set_encoder(EncoderConfig& e, const std::string& k, const std::string& v,
                 std::size_t lineno) {
  if (k == "d_h")
    e.d_h = parse_pos_int(v, lineno);
  else if (k == "d_s")
    e.d_s = parse_pos_int(v, lineno);
  else if (k == "d_c")
    e.d_c = parse_pos_int(v, lineno);
  else if (k == "d_e")
    e.d_e = parse_pos_int(v, lineno);
  else if (k == "heads")
    e.heads = parse_pos_int(v, lineno);
  else
    fail(lineno, "unknown key '" + k + "' in [encoder]");
}

void set_pretrain(PretrainConfig& p, const std::string& k, const std::string& v,
                  std::size_t lineno) {
  if (k == "window")
    p.window = parse_pos_int(v, lineno);
  else if (k == "negatives")
    p.negatives = parse_pos_int(v, lineno);
  else if (k == "epochs")
    p.epochs = parse_pos_int(v, lineno);
  else if (k == "max_pairs")
    p.max_pairs = parse_pos_int(v, lineno);
  else if (k == "lr")
    p.lr = parse_double(v, lineno);
  else
    fail(lineno, "unknown key '" + k + "' in [pretrain]");
}

void set_model(ModelConfig& m, const std::string& k, const std::string& v, std::size_t lineno) {
  if (k == "author_seq_len")
    m.author_seq_len = parse_pos_int(v, lineno);
  else if (k == "units1")
    m.units1 = parse_pos_int(v, lineno);
  else if (k == "units2")
    m.units2 = parse_pos_int(v, lineno);
  else if (k == "mlp1")
    m.mlp1 = parse_pos_int(v, lineno);
  else if (k == "mlp2")
    m.mlp2 = parse_pos_int(v, lineno);
  else if (k == "aggregator") {
    if (v == "rnn")
      m.aggregator = Aggregator::Rnn;
    else if (v == "maxpool")
      m.aggregator = Aggregator::MaxPool;
    else if (v == "sumpool")
      m.aggregator = Aggregator::SumPool;
    else
      fail(lineno, "aggregator must be rnn, maxpool, or sumpool");
  } else if (k == "use_author")
    m.use_author = parse_bool(v, lineno);
  else if (k == "use_venue")
    m.use_venue = parse_bool(v, lineno);
  else if (k == "prepend_target")
    m.prepend_target = parse_bool(v, lineno);
  else
    fail(lineno, "unknown key '" + k + "' in [model]");
}

void set_train(RunConfig& c, const std::string& k, const std::string& v, std::size_t lineno) {
  TrainConfig& t = c.train;
  if (k == "lr")
    t.lr = parse_double(v, lineno);
  else if (k == "batch_size")
    t.batch_size = parse_pos_int(v, lineno);
  else if (k == "max_epochs")
    t.max_epochs = parse_pos_int(v, lineno);
  else if (k == "patience")
    t.patience = parse_pos_int(v, lineno);
  else if (k == "optimizer") {
    if (v != "adam" && v != "sgd") fail(lineno, "optimizer must be adam or sgd");
    t.optimizer = v;
  } else if (k == "lr_grid")
    c.lr_grid = parse_double_list(v, lineno);
  else
    fail(lineno, "unknown key '" + k + "' in [train]");
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw, section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "synth" && section != "walk" && section != "dataset" &&
          section != "encoder" && section != "pretrain" && section != "model" &&
          section != "train")
        fail(lineno, "unknown section [" + section + "]");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) fail(lineno, "missing key");
    if (val.empty()) fail(lineno, "missing value for '" + key + "'");

    if (section.empty())
      set_top(cfg, key, val, lineno);
    else if (section == "synth")
      set_synth(cfg.synth, key, val, lineno);
    else if (section == "walk")
      set_walk(cfg.walk, key, val, lineno);
    else if (section == "dataset")
      set_dataset(cfg.obs, key, val, lineno);
    else if (section == "encoder")
      set_encoder(cfg.enc, key, val, lineno);
    else if (section == "pretrain")
      set_pretrain(cfg.pretrain, key, val, lineno);
    else if (section == "model")
      set_model(cfg.model, key, val, lineno);
    else
      set_train(cfg, key, val, lineno);
  }
  apply_seed(cfg, cfg.seed);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.synth.seed = seed;
  cfg.walk.seed = seed;
  cfg.obs.seed = seed;
  cfg.pretrain.seed = seed;
  cfg.train.seed = seed;
}

}  // namespace hdgnn
