#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hdgnn/dataset.hpp"
#include "hdgnn/graph.hpp"

namespace hdgnn {

// Pairs are (prediction, label), both positive counts.
double msle(const std::vector<std::pair<double, double>>& pairs);
double acc(const std::vector<std::pair<double, double>>& pairs);

struct VenueStats {
  double msle = 0.0;
  double acc = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  double msle = 0.0;
  double acc = 0.0;
  std::size_t n = 0;
  std::map<std::string, VenueStats> by_venue;
};

// venue_keys, when given, must align with pairs; empty keys are left out of the
// breakdown but still count toward the headline metrics.
EvalReport make_report(const std::vector<std::pair<double, double>>& pairs,
                       const std::vector<std::string>& venue_keys = {});
void save_report(const EvalReport& r, const std::string& path);

// Constant log2 prediction minimizing train MSLE, grid-searched over
// [min, max] of the train log2 labels with step 0.001.
double uniform_constant_log2(const std::vector<double>& train_labels);
std::vector<std::pair<double, double>> uniform_predictions(const std::vector<Cascade>& samples,
                                                           Split eval_split);
EvalReport uniform_baseline(const std::vector<Cascade>& samples, Split eval_split);

// Least squares with intercept; coefficients returned intercept-first. A plain
// normal-equations solve is attempted first and 1e-8 ridge is the rescue path
// for rank-deficient designs.
std::vector<double> ols_fit(const std::vector<std::vector<double>>& rows,
                            const std::vector<double>& targets);

enum class FeatureMode { CtrOnly, Full };

// Raw-feature rows recomputed from the graph: log2 observed citations, and in
// full mode also mean observed arrival time and the target's in/out degree.
std::vector<std::vector<double>> feature_rows(const HeteroGraph& g, const ObservationConfig& cfg,
                                              const std::vector<Cascade>& samples,
                                              FeatureMode mode);
std::vector<std::pair<double, double>> feature_predictions(const HeteroGraph& g,
                                                           const ObservationConfig& cfg,
                                                           const std::vector<Cascade>& samples,
                                                           FeatureMode mode, Split eval_split);
EvalReport feature_baseline(const HeteroGraph& g, const ObservationConfig& cfg,
                            const std::vector<Cascade>& samples, FeatureMode mode,
                            Split eval_split);

// (x, P(X >= x)) at each distinct value, descending probability.
std::vector<std::pair<double, double>> ccdf(const std::vector<double>& values);
// Least-squares slope of log2 p against log2 x over the given points;
// nonpositive coordinates are skipped.
double loglog_slope(const std::vector<std::pair<double, double>>& points);

// rows: one entity per row, Y columns of cumulative counts. Entry (i,j) is the
// Pearson correlation between year i and year j across entities; years with
// zero variance yield NaN off-diagonal entries.
std::vector<std::vector<double>> pearson_year_matrix(const std::vector<std::vector<double>>& rows);

struct YearStats {
  double mean_papers = 0.0;
  double mean_new_citations = 0.0;
  double product = 0.0;
};

// papers / cites: per-author per-year counts, equal shapes.
std::vector<YearStats> productivity_profile(const std::vector<std::vector<double>>& papers,
                                            const std::vector<std::vector<double>>& cites);

// Profile inputs recovered from a graph: per-entity cumulative citation
// counts per whole-year bucket, and per-author yearly activity.
std::vector<std::vector<double>> yearly_cumulative_citations(const HeteroGraph& g, NodeKind kind,
                                                             std::size_t years);
void author_yearly_activity(const HeteroGraph& g, std::size_t years,
                            std::vector<std::vector<double>>& papers,
                            std::vector<std::vector<double>>& cites);

}  // namespace hdgnn
