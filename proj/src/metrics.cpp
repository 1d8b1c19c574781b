#include "hdgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "hdgnn/errors.hpp"

namespace hdgnn {

namespace {

void check_pairs(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.empty()) throw DataError("metric needs a nonempty set of pairs");
  for (const auto& [pred, label] : pairs)
    if (!(pred > 0.0) || !(label > 0.0))
      throw DataError("metric pairs must be positive counts");
}

// Cholesky solve of the symmetric system A x = b; false on a pivot too small
// relative to the diagonal scale (rank deficiency) or on non-finite input.
bool spd_solve(std::vector<double> A, std::vector<double> b, std::size_t n,
               std::vector<double>& out) {
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(A[i * n + i]));
  if (!(scale > 0.0)) return false;
  for (std::size_t j = 0; j < n; ++j) {
    double d = A[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= A[j * n + k] * A[j * n + k];
    if (!(d > scale * 1e-12)) return false;
    double l = std::sqrt(d);
    A[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = A[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= A[i * n + k] * A[j * n + k];
      A[i * n + j] = v / l;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= A[i * n + k] * b[k];
    b[i] = v / A[i * n + i];
  }
  out.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double v = b[i];
    for (std::size_t k = i + 1; k < n; ++k) v -= A[k * n + i] * out[k];
    out[i] = v / A[i * n + i];
  }
  return true;
}

struct Window {
  std::uint64_t count = 0;
  double mean_time = 0.0;
};

Window window_stats(const HeteroGraph& g, const ObservationConfig& cfg, NodeId target,
                    NodeKind kind) {
  double t0;
  std::vector<NodeId> papers;
  if (kind == NodeKind::Paper) {
    t0 = g.node(target).birth_time;
    papers.push_back(target);
  } else if (kind == NodeKind::Author) {
    t0 = author_career_start(g, target);
    for (const Adjacent& a : g.out_edges(target))
      if (a.kind == EdgeKind::AuthorWritesPaper) papers.push_back(a.other);
  } else {
    throw DataError("venues have no citation history");
  }
  Window w;
  double sum = 0.0;
  for (NodeId p : papers)
    for (const Adjacent& a : g.in_edges(p))
      if (a.kind == EdgeKind::PaperCitesPaper) {
        double t = g.edge(a.edge).time - t0;
        if (t >= 0.0 && t <= cfg.t_r) {
          ++w.count;
          sum += t;
        }
      }
  if (w.count > 0) w.mean_time = sum / static_cast<double>(w.count);
  return w;
}

std::vector<double> log2_labels(const std::vector<const Cascade*>& cs) {
  std::vector<double> ys;
  ys.reserve(cs.size());
  for (const Cascade* c : cs) {
    if (c->label == 0) throw DataError("zero label cannot enter log2 metrics");
    ys.push_back(std::log2(static_cast<double>(c->label)));
  }
  return ys;
}

std::vector<const Cascade*> of_split(const std::vector<Cascade>& samples, Split s) {
  std::vector<const Cascade*> out;
  for (const Cascade& c : samples)
    if (c.split == s) out.push_back(&c);
  return out;
}

}  // namespace

double msle(const std::vector<std::pair<double, double>>& pairs) {
  check_pairs(pairs);
  double acc = 0.0;
  for (const auto& [pred, label] : pairs) {
    double d = std::log2(pred) - std::log2(label);
    acc += d * d;
  }
  return acc / static_cast<double>(pairs.size());
}

double acc(const std::vector<std::pair<double, double>>& pairs) {
  check_pairs(pairs);
  std::size_t hit = 0;
  for (const auto& [pred, label] : pairs)
    if (pred >= 0.5 * label && pred <= 1.5 * label) ++hit;
  return static_cast<double>(hit) / static_cast<double>(pairs.size());
}

EvalReport make_report(const std::vector<std::pair<double, double>>& pairs,
                       const std::vector<std::string>& venue_keys) {
  if (!venue_keys.empty() && venue_keys.size() != pairs.size())
    throw DataError("venue keys must align with prediction pairs");
  EvalReport r;
  r.msle = msle(pairs);
  r.acc = acc(pairs);
  r.n = pairs.size();
  if (!venue_keys.empty()) {
    std::map<std::string, std::vector<std::pair<double, double>>> groups;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (!venue_keys[i].empty()) groups[venue_keys[i]].push_back(pairs[i]);
    for (const auto& [key, sub] : groups)
      r.by_venue.emplace(key, VenueStats{msle(sub), acc(sub), sub.size()});
  }
  return r;
}

void save_report(const EvalReport& r, const std::string& path) {
  nlohmann::json j;
  j["msle"] = r.msle;
  j["acc"] = r.acc;
  j["n"] = r.n;
  nlohmann::json bv = nlohmann::json::object();
  for (const auto& [key, v] : r.by_venue)
    bv[key] = {{"msle", v.msle}, {"acc", v.acc}, {"n", v.n}};
  j["by_venue"] = std::move(bv);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f << j.dump(2) << '\n';
  if (!f.good()) throw DataError("failed while writing " + path);
}

double uniform_constant_log2(const std::vector<double>& train_labels) {
  if (train_labels.empty()) throw DataError("uniform baseline needs train labels");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double mean = 0.0;
  for (double c : train_labels) {
    if (!(c > 0.0)) throw DataError("labels must be positive counts");
    double y = std::log2(c);
    lo = std::min(lo, y);
    hi = std::max(hi, y);
    mean += y;
  }
  mean /= static_cast<double>(train_labels.size());
  const double step = 0.001;
  std::size_t grid = static_cast<std::size_t>((hi - lo) / step) + 1;
  double best_y = lo, best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid; ++k) {
    double y = lo + step * static_cast<double>(k);
    double loss = (y - mean) * (y - mean);  // train MSLE minus its variance floor
    if (loss < best) {
      best = loss;
      best_y = y;
    }
  }
  return best_y;
}

std::vector<std::pair<double, double>> uniform_predictions(const std::vector<Cascade>& samples,
                                                           Split eval_split) {
  std::vector<const Cascade*> train = of_split(samples, Split::Train);
  if (train.empty()) throw DataError("uniform baseline needs a nonempty train split");
  std::vector<double> labels;
  labels.reserve(train.size());
  for (const Cascade* c : train) labels.push_back(static_cast<double>(c->label));
  double pred = std::exp2(uniform_constant_log2(labels));
  std::vector<std::pair<double, double>> pairs;
  for (const Cascade& c : samples)
    if (c.split == eval_split) pairs.emplace_back(pred, static_cast<double>(c.label));
  return pairs;
}

EvalReport uniform_baseline(const std::vector<Cascade>& samples, Split eval_split) {
  return make_report(uniform_predictions(samples, eval_split));
}

std::vector<double> ols_fit(const std::vector<std::vector<double>>& rows,
                            const std::vector<double>& targets) {
  if (rows.empty() || rows.size() != targets.size())
    throw DataError("regression needs matching, nonempty rows and targets");
  std::size_t d = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != d) throw DataError("regression rows must share one width");
  std::size_t p = d + 1;
  std::vector<double> A(p * p, 0.0), b(p, 0.0), x(p + 1);
  std::vector<double> xr(p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    xr[0] = 1.0;
    for (std::size_t j = 0; j < d; ++j) xr[j + 1] = rows[i][j];
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = r; c < p; ++c) A[r * p + c] += xr[r] * xr[c];
      b[r] += xr[r] * targets[i];
    }
  }
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < r; ++c) A[r * p + c] = A[c * p + r];

  std::vector<double> coef;
  if (!spd_solve(A, b, p, coef)) {
    for (std::size_t i = 0; i < p; ++i) A[i * p + i] += 1e-8;
    if (!spd_solve(A, b, p, coef))
      throw NumericError("normal equations are rank-deficient beyond the ridge rescue");
  }
  return coef;
}

std::vector<std::vector<double>> feature_rows(const HeteroGraph& g, const ObservationConfig& cfg,
                                              const std::vector<Cascade>& samples,
                                              FeatureMode mode) {
  std::vector<std::vector<double>> rows;
  rows.reserve(samples.size());
  for (const Cascade& c : samples) {
    Window w = window_stats(g, cfg, c.target, c.target_kind);
    if (w.count == 0)
      throw DataError("target " + g.node(c.target).external_id +
                      " has no observed citations; feature baseline undefined");
    std::vector<double> row{std::log2(static_cast<double>(w.count))};
    if (mode == FeatureMode::Full) {
      row.push_back(w.mean_time);
      row.push_back(static_cast<double>(g.in_degree(c.target)));
      row.push_back(static_cast<double>(g.out_degree(c.target)));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::pair<double, double>> feature_predictions(const HeteroGraph& g,
                                                           const ObservationConfig& cfg,
                                                           const std::vector<Cascade>& samples,
                                                           FeatureMode mode, Split eval_split) {
  std::vector<const Cascade*> train = of_split(samples, Split::Train);
  std::vector<const Cascade*> eval = of_split(samples, eval_split);
  if (train.empty()) throw DataError("feature baseline needs a nonempty train split");
  if (eval.empty()) throw DataError("feature baseline needs a nonempty eval split");

  auto deref = [](const std::vector<const Cascade*>& cs) {
    std::vector<Cascade> out;
    out.reserve(cs.size());
    for (const Cascade* c : cs) out.push_back(*c);
    return out;
  };
  std::vector<std::vector<double>> train_rows = feature_rows(g, cfg, deref(train), mode);
  std::vector<std::vector<double>> eval_rows = feature_rows(g, cfg, deref(eval), mode);
  std::vector<double> coef = ols_fit(train_rows, log2_labels(train));

  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) {
    double y = coef[0];
    for (std::size_t j = 0; j < eval_rows[i].size(); ++j) y += coef[j + 1] * eval_rows[i][j];
    pairs.emplace_back(std::exp2(y), static_cast<double>(eval[i]->label));
  }
  return pairs;
}

EvalReport feature_baseline(const HeteroGraph& g, const ObservationConfig& cfg,
                            const std::vector<Cascade>& samples, FeatureMode mode,
                            Split eval_split) {
  return make_report(feature_predictions(g, cfg, samples, mode, eval_split));
}

std::vector<std::pair<double, double>> ccdf(const std::vector<double>& values) {
  if (values.empty()) throw DataError("ccdf needs a nonempty sample");
  std::vector<double> v(values);
  std::sort(v.begin(), v.end());
  double n = static_cast<double>(v.size());
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (i == 0 || v[i] != v[i - 1])
      out.emplace_back(v[i], static_cast<double>(v.size() - i) / n);
  return out;
}

double loglog_slope(const std::vector<std::pair<double, double>>& points) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  double first = 0.0;
  bool varied = false;
  for (const auto& [x, p] : points) {
    if (!(x > 0.0) || !(p > 0.0)) continue;
    double lx = std::log2(x), lp = std::log2(p);
    if (n == 0)
      first = lx;
    else
      varied = varied || lx != first;
    sx += lx;
    sy += lp;
    sxx += lx * lx;
    sxy += lx * lp;
    ++n;
  }
  if (n < 2 || !varied) throw DataError("slope fit needs two distinct positive points");
  double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

std::vector<std::vector<double>> pearson_year_matrix(
    const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) throw DataError("pearson matrix needs at least two entities");
  std::size_t y = rows[0].size();
  if (y < 2) throw DataError("pearson matrix needs at least two years");
  for (const auto& r : rows)
    if (r.size() != y) throw DataError("entities must cover the same years");

  double n = static_cast<double>(rows.size());
  std::vector<double> mean(y, 0.0), ss(y, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < y; ++j) mean[j] += r[j];
  for (std::size_t j = 0; j < y; ++j) mean[j] /= n;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < y; ++j) {
      double d = r[j] - mean[j];
      ss[j] += d * d;
    }

  double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> m(y, std::vector<double>(y, 0.0));
  for (std::size_t i = 0; i < y; ++i) {
    m[i][i] = 1.0;
    for (std::size_t j = i + 1; j < y; ++j) {
      double denom = std::sqrt(ss[i] * ss[j]);
      if (denom == 0.0) {
        m[i][j] = m[j][i] = nan;
        continue;
      }
      double cov = 0.0;
      for (const auto& r : rows) cov += (r[i] - mean[i]) * (r[j] - mean[j]);
      m[i][j] = m[j][i] = cov / denom;
    }
  }
  return m;
}

std::vector<YearStats> productivity_profile(const std::vector<std::vector<double>>& papers,
                                            const std::vector<std::vector<double>>& cites) {
  if (papers.empty() || papers.size() != cites.size())
    throw DataError("productivity profile needs matching author activity");
  std::size_t y = papers[0].size();
  for (std::size_t i = 0; i < papers.size(); ++i)
    if (papers[i].size() != y || cites[i].size() != y)
      throw DataError("author activity must cover the same years");

  double n = static_cast<double>(papers.size());
  std::vector<YearStats> out(y);
  for (std::size_t j = 0; j < y; ++j) {
    double mp = 0.0, mc = 0.0;
    for (std::size_t i = 0; i < papers.size(); ++i) {
      mp += papers[i][j];
      mc += cites[i][j];
    }
    out[j].mean_papers = mp / n;
    out[j].mean_new_citations = mc / n;
    out[j].product = out[j].mean_papers * out[j].mean_new_citations;
  }
  return out;
}

namespace {

std::size_t year_bucket(double t, std::size_t years) {
  double f = std::floor(t);
  if (f < 0.0) f = 0.0;
  std::size_t b = static_cast<std::size_t>(f);
  return b >= years ? years - 1 : b;
}

void add_citation_years(const HeteroGraph& g, NodeId paper, std::size_t years,
                        std::vector<double>& row) {
  for (const Adjacent& a : g.in_edges(paper))
    if (a.kind == EdgeKind::PaperCitesPaper) row[year_bucket(g.edge(a.edge).time, years)] += 1.0;
}

}  // namespace

std::vector<std::vector<double>> yearly_cumulative_citations(const HeteroGraph& g, NodeKind kind,
                                                             std::size_t years) {
  if (years == 0) throw DataError("need at least one year bucket");
  if (kind == NodeKind::Venue) throw DataError("venues have no citation history");
  std::vector<std::vector<double>> rows;
  for (NodeId n : g.nodes_of_kind(kind)) {
    std::vector<double> row(years, 0.0);
    if (kind == NodeKind::Paper) {
      add_citation_years(g, n, years, row);
    } else {
      for (const Adjacent& a : g.out_edges(n))
        if (a.kind == EdgeKind::AuthorWritesPaper) add_citation_years(g, a.other, years, row);
    }
    for (std::size_t j = 1; j < years; ++j) row[j] += row[j - 1];
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("graph has no nodes of the requested kind");
  return rows;
}

void author_yearly_activity(const HeteroGraph& g, std::size_t years,
                            std::vector<std::vector<double>>& papers,
                            std::vector<std::vector<double>>& cites) {
  if (years == 0) throw DataError("need at least one year bucket");
  papers.clear();
  cites.clear();
  for (NodeId n : g.nodes_of_kind(NodeKind::Author)) {
    std::vector<double> prow(years, 0.0), crow(years, 0.0);
    for (const Adjacent& a : g.out_edges(n))
      if (a.kind == EdgeKind::AuthorWritesPaper) {
        prow[year_bucket(g.edge(a.edge).time, years)] += 1.0;
        add_citation_years(g, a.other, years, crow);
      }
    papers.push_back(std::move(prow));
    cites.push_back(std::move(crow));
  }
  if (papers.empty()) throw DataError("graph has no authors");
}

}  // namespace hdgnn
