#pragma once

#include <cstdint>

#include "hdgnn/graph.hpp"

namespace hdgnn {

struct SynthConfig {
  std::size_t n_papers = 3000;
  std::size_t n_authors = 1000;
  std::size_t n_venues = 10;
  double years = 30.0;        // publication span
  double pa_exponent = 1.2;   // tail index of paper fitness; targets the citation CCDF slope
  double venue_spread = 0.8;  // log-normal sigma of venue quality
  double pareto_shape = 1.6;  // author productivity tail
  double burst = 1.0;         // strength of the early elite-adoption signal
  std::uint64_t seed = 0;
};

// temporal citation graph with venues, bylines, and all derived edge kinds
HeteroGraph generate_synthetic(const SynthConfig& cfg);

}  // namespace hdgnn
