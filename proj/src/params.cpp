#include "hdgnn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hdgnn/errors.hpp"

namespace hdgnn::ad {

int ParameterStore::create(const std::string& name, Array init, bool trainable) {
  if (index_.count(name))
    throw std::invalid_argument("parameter already exists: " + name);
  Entry e;
  e.name = name;
  e.grad = Array::zeros_like(init);
  e.m = Array::zeros_like(init);
  e.v = Array::zeros_like(init);
  e.value = std::move(init);
  e.trainable = trainable;
  entries_.push_back(std::move(e));
  int id = static_cast<int>(entries_.size()) - 1;
  index_.emplace(name, id);
  return id;
}

int ParameterStore::create_zeros(const std::string& name,
                                 std::vector<std::size_t> shape, bool trainable) {
  Array a;
  a.shape = std::move(shape);
  std::size_t n = 1;
  for (std::size_t d : a.shape) n *= d;
  a.data.assign(n, 0.0);
  return create(name, std::move(a), trainable);
}

int ParameterStore::create_glorot(const std::string& name, std::size_t rows,
                                  std::size_t cols, Rng& rng, bool trainable) {
  Array a = Array::matrix(rows, cols);
  double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : a.data) v = rng.uniform(-bound, bound);
  return create(name, std::move(a), trainable);
}

int ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

int ParameterStore::require(const std::string& name) const {
  int id = find(name);
  if (id < 0) throw std::invalid_argument("unknown parameter: " + name);
  return id;
}

void ParameterStore::zero_grad() {
  for (Entry& e : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

void ParameterStore::scale_grads(double factor) {
  for (Entry& e : entries_)
    for (double& g : e.grad.data) g *= factor;
}

void ParameterStore::sgd_step(double lr) {
  if (lr <= 0.0) throw std::invalid_argument("sgd_step: lr must be positive");
  for (Entry& e : entries_) {
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.value.size(); ++i)
      e.value.data[i] -= lr * e.grad.data[i];
  }
}

void ParameterStore::adam_step(double lr, double beta1, double beta2, double eps) {
  if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive");
  ++adam_t_;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
  for (Entry& e : entries_) {
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      double g = e.grad.data[i];
      e.m.data[i] = beta1 * e.m.data[i] + (1.0 - beta1) * g;
      e.v.data[i] = beta2 * e.v.data[i] + (1.0 - beta2) * g * g;
      double mhat = e.m.data[i] / c1;
      double vhat = e.v.data[i] / c2;
      e.value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void ParameterStore::reset_optimizer() {
  adam_t_ = 0;
  for (Entry& e : entries_) {
    std::fill(e.m.data.begin(), e.m.data.end(), 0.0);
    std::fill(e.v.data.begin(), e.v.data.end(), 0.0);
  }
}

namespace {
template <typename T>
void write_le(std::ostream& out, T v) {
  // little-endian host assumed; format is defined as LE
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

constexpr char kCheckpointMagic[9] = {'H', 'D', 'G', 'N', 'N', '-', 'C', 'K', '\x01'};
}  // namespace

void ParameterStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  for (const Entry& e : entries_) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.shape.size()));
    for (std::size_t d : e.value.shape) write_le<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(e.value.data.data()),
              static_cast<std::streamsize>(e.value.size() * sizeof(double)));
  }
  if (!out) throw DataError("short write on checkpoint: " + path);
}

void ParameterStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw DataError("bad checkpoint magic: " + path);
  entries_.clear();
  index_.clear();
  adam_t_ = 0;
  while (true) {
    auto name_len = read_le<std::uint32_t>(in);
    if (in.eof()) break;
    if (!in) throw DataError("truncated checkpoint: " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    auto ndim = read_le<std::uint32_t>(in);
    Array a;
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      auto d = static_cast<std::size_t>(read_le<std::uint64_t>(in));
      a.shape.push_back(d);
      total *= d;
    }
    if (ndim == 0) total = 1;
    a.data.resize(total);
    in.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint: " + path);
    create(name, std::move(a));
  }
}

std::vector<double> ParameterStore::snapshot_values() const {
  std::vector<double> flat;
  for (const Entry& e : entries_)
    flat.insert(flat.end(), e.value.data.begin(), e.value.data.end());
  return flat;
}

void ParameterStore::restore_values(const std::vector<double>& flat) {
  std::size_t off = 0;
  for (Entry& e : entries_) {
    if (off + e.value.size() > flat.size())
      throw std::invalid_argument("restore_values: size mismatch");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + e.value.size()),
              e.value.data.begin());
    off += e.value.size();
  }
  if (off != flat.size()) throw std::invalid_argument("restore_values: size mismatch");
}

}  // namespace hdgnn::ad
