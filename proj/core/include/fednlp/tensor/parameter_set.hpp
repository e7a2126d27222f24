#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fednlp/tensor/tensor.hpp"

namespace fednlp {

/// Ordered, named collection of dense tensors; the unit exchanged between
/// clients and the server. Insertion order is the canonical manifest order
/// used for serialization and aggregation alignment.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);

  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }
  bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }
  Tensor& tensor(std::size_t i) { return tensors_[i]; }

  const std::vector<std::string>& names() const { return names_; }

  /// Same names, in the same order, with the same shapes.
  bool same_manifest(const ParameterSet& other) const;

  std::size_t total_numel() const;

  /// Bitwise equality (names, order, shapes, data).
  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Rounds every value to the nearest 32-bit float (the wire precision).
ParameterSet quantize_to_f32(const ParameterSet& params);

/// Parameters whose names start with one of `prefixes`, in manifest order.
ParameterSet select_prefixed(const ParameterSet& params, const std::vector<std::string>& prefixes);

}  // namespace fednlp
