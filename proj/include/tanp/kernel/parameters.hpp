#pragma once

#include <Eigen/Dense>

#include <map>
#include <random>
#include <stdexcept>
#include <string>

namespace tanp {

/// Row-major dense matrix; every tensor in the model is at most 2-D.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
std::string shape_string(const MatrixX<Scalar>& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

/// Named parameter tensors. Names are unique and shapes fixed once added.
/// Iteration order is lexicographic by name.
template <typename Scalar>
class ParameterStore {
 public:
  struct Entry {
    MatrixX<Scalar> value;
    bool trainable = true;
  };

  void add(const std::string& name, MatrixX<Scalar> value, bool trainable = true) {
    if (entries_.count(name) != 0) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
    entries_.emplace(name, Entry{std::move(value), trainable});
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  const MatrixX<Scalar>& value(const std::string& name) const { return entry(name).value; }

  /// Overwrite a parameter; the new value must keep the registered shape.
  void assign(const std::string& name, const MatrixX<Scalar>& value) {
    auto& e = entry(name);
    if (e.value.rows() != value.rows() || e.value.cols() != value.cols()) {
      throw std::invalid_argument("shape change for parameter " + name + ": " +
                                  shape_string(e.value) + " -> " + shape_string(value));
    }
    e.value = value;
  }

  bool trainable(const std::string& name) const { return entry(name).trainable; }
  void set_trainable(const std::string& name, bool flag) { entry(name).trainable = flag; }

  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Mutable access for the optimizer; shapes must not be changed by callers.
  MatrixX<Scalar>& mutable_value(const std::string& name) { return entry(name).value; }

 private:
  Entry& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }

  std::map<std::string, Entry> entries_;
};

template <typename Scalar>
using GradientSet = std::map<std::string, MatrixX<Scalar>>;

/// Uniform Glorot initialization in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
template <typename Scalar, typename Rng>
MatrixX<Scalar> glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const Scalar limit = std::sqrt(Scalar(6) / Scalar(fan_in + fan_out));
  std::uniform_real_distribution<Scalar> dist(-limit, limit);
  MatrixX<Scalar> w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

}  // namespace tanp
