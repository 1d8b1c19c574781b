#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hdgnn/cascade.hpp"
#include "hdgnn/graph.hpp"

namespace hdgnn {

struct ObservationConfig {
  double t_r = 2.0;   // observation window (years from target birth)
  double t_p = 20.0;  // prediction horizon (years from target birth)
  std::size_t min_observed = 10;
  std::size_t max_seq = 100;
  double train_frac = 0.5;
  double val_frac = 0.25;
  double test_frac = 0.25;
  std::uint64_t seed = 0;
};

// first publication time; throws DataError for authors without papers
double author_career_start(const HeteroGraph& g, NodeId author);

// one cascade per eligible target that clears the min_observed filter, with
// seeded train/val/test assignment
std::vector<Cascade> build_paper_dataset(const HeteroGraph& g, const ObservationConfig& cfg);
std::vector<Cascade> build_author_dataset(const HeteroGraph& g, const ObservationConfig& cfg);

void save_dataset(const std::vector<Cascade>& samples, const std::string& path);
std::vector<Cascade> load_dataset(const std::string& path);

}  // namespace hdgnn
