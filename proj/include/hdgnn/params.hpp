#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hdgnn/array.hpp"
#include "hdgnn/rng.hpp"

namespace hdgnn::ad {

// Named trainable arrays plus per-parameter Adam state. Names are unique;
// shapes are fixed at creation.
class ParameterStore {
 public:
  int create(const std::string& name, Array init, bool trainable = true);
  int create_zeros(const std::string& name, std::vector<std::size_t> shape,
                   bool trainable = true);
  // Glorot-uniform matrix [rows, cols].
  int create_glorot(const std::string& name, std::size_t rows, std::size_t cols,
                    Rng& rng, bool trainable = true);

  int find(const std::string& name) const;  // -1 when absent
  int require(const std::string& name) const;

  std::size_t count() const { return entries_.size(); }
  const std::string& name(int i) const { return entries_[i].name; }
  Array& value(int i) { return entries_[i].value; }
  const Array& value(int i) const { return entries_[i].value; }
  Array& grad(int i) { return entries_[i].grad; }
  const Array& grad(int i) const { return entries_[i].grad; }
  bool trainable(int i) const { return entries_[i].trainable; }
  void set_trainable(int i, bool t) { entries_[i].trainable = t; }

  void zero_grad();
  void scale_grads(double factor);

  void sgd_step(double lr);
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);
  std::uint64_t adam_steps() const { return adam_t_; }
  void reset_optimizer();

  // Checkpoint: "HDGNN-CK\x01", then per parameter (insertion order):
  // name length u32, name bytes, ndim u32, dims u64..., f64 data, all LE.
  void save(const std::string& path) const;
  void load(const std::string& path);

  std::vector<double> snapshot_values() const;
  void restore_values(const std::vector<double>& flat);

 private:
  struct Entry {
    std::string name;
    Array value;
    Array grad;
    Array m, v;  // Adam moments
    bool trainable = true;
  };

  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
  std::uint64_t adam_t_ = 0;
};

}  // namespace hdgnn::ad
