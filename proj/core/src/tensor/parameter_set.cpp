#include "fednlp/tensor/parameter_set.hpp"

#include "fednlp/tensor/errors.hpp"

namespace fednlp {

void ParameterSet::add(std::string name, Tensor value) {
  if (index_.count(name)) throw UsageError("duplicate parameter name '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

const Tensor& ParameterSet::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw UsageError("unknown parameter '" + std::string(name) + "'");
  return tensors_[it->second];
}

Tensor& ParameterSet::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw UsageError("unknown parameter '" + std::string(name) + "'");
  return tensors_[it->second];
}

bool ParameterSet::same_manifest(const ParameterSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (names_[i] != other.names_[i] || tensors_[i].shape() != other.tensors_[i].shape()) return false;
  }
  return true;
}

std::size_t ParameterSet::total_numel() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  return a.names_ == b.names_ && a.tensors_ == b.tensors_;
}

ParameterSet quantize_to_f32(const ParameterSet& params) {
  ParameterSet out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params.tensor(i);
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
    out.add(params.name(i), std::move(t));
  }
  return out;
}

ParameterSet select_prefixed(const ParameterSet& params, const std::vector<std::string>& prefixes) {
  ParameterSet out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (const auto& prefix : prefixes) {
      if (params.name(i).rfind(prefix, 0) == 0) {
        out.add(params.name(i), params.tensor(i));
        break;
      }
    }
  }
  return out;
}

}  // namespace fednlp
