#pragma once

// Central finite-difference gradient checker. Independent of the tape's
// backward pass: it only re-runs forward evaluations at perturbed parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "hdgnn/params.hpp"
#include "hdgnn/rng.hpp"
#include "hdgnn/tape.hpp"

namespace fd {

struct Report {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
};

// build must construct a fresh forward pass over `store` and return the
// scalar loss. max_coords < 0 checks every trainable coordinate; otherwise a
// seeded random subset of that size.
inline Report check_gradients(hdgnn::ad::ParameterStore& store,
                              const std::function<hdgnn::ad::Value(hdgnn::ad::Tape&)>& build,
                              double eps = 1e-4, long max_coords = -1,
                              std::uint64_t seed = 17) {
  using hdgnn::ad::Tape;
  using hdgnn::ad::Value;

  store.zero_grad();
  {
    Tape t;
    Value loss = build(t);
    t.backward(loss);
  }
  std::vector<std::pair<int, std::size_t>> coords;
  for (int p = 0; p < static_cast<int>(store.count()); ++p) {
    if (!store.trainable(p)) continue;
    for (std::size_t i = 0; i < store.value(p).size(); ++i) coords.emplace_back(p, i);
  }
  if (max_coords >= 0 && coords.size() > static_cast<std::size_t>(max_coords)) {
    hdgnn::Rng rng(seed);
    for (std::size_t i = 0; i < static_cast<std::size_t>(max_coords); ++i) {
      std::size_t j = i + rng.next_below(coords.size() - i);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(static_cast<std::size_t>(max_coords));
  }

  Report rep;
  for (auto [p, i] : coords) {
    double saved = store.value(p).data[i];
    store.value(p).data[i] = saved + eps;
    double f_plus;
    {
      Tape t;
      f_plus = t.scalar_value(build(t));
    }
    store.value(p).data[i] = saved - eps;
    double f_minus;
    {
      Tape t;
      f_minus = t.scalar_value(build(t));
    }
    store.value(p).data[i] = saved;
    double numeric = (f_plus - f_minus) / (2.0 * eps);
    double analytic = store.grad(p).data[i];
    double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-2});
    rep.max_rel_err = std::max(rep.max_rel_err, std::fabs(numeric - analytic) / denom);
    ++rep.coords_checked;
  }
  return rep;
}

}  // namespace fd
