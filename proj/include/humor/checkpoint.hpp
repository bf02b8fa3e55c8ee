#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "humor/tensor.hpp"

namespace humor::numcore {

// Insertion-ordered named tensor collection. The order is part of the
// serialized form, so identical construction order gives identical bytes.
class NamedTensors {
 public:
  void add(std::string name, Tensor tensor);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::vector<Tensor> tensors() const;
  std::int64_t parameter_count() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Binary checkpoint: little-endian, magic + version + tensor count, then per
// tensor (name length, name, rank, dims, float64 payload). Round-trips are
// bit-exact.
void serialize(const NamedTensors& tensors, std::ostream& out);
NamedTensors deserialize(std::istream& in, bool requires_grad);

void save_checkpoint(const NamedTensors& tensors, const std::string& path);
NamedTensors load_checkpoint(const std::string& path, bool requires_grad = false);

// FNV-1a digest of the serialized bytes, as 16 hex characters.
std::string parameter_digest(const NamedTensors& tensors);

}  // namespace humor::numcore
