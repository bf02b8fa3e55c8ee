#include "humor/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "humor/manifest.hpp"

namespace humor::numcore {

namespace {

constexpr char kMagic[8] = {'H', 'U', 'M', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated stream");
  return value;
}

}  // namespace

void NamedTensors::add(std::string name, Tensor tensor) {
  if (index_.contains(name)) {
    throw std::invalid_argument("duplicate tensor name: " + name);
  }
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool NamedTensors::contains(const std::string& name) const {
  return index_.contains(name);
}

const Tensor& NamedTensors::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no tensor named " + name);
  return entries_[it->second].second;
}

Tensor& NamedTensors::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no tensor named " + name);
  return entries_[it->second].second;
}

std::vector<Tensor> NamedTensors::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(t);
  return out;
}

std::int64_t NamedTensors::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

void serialize(const NamedTensors& tensors, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors.entries()) {
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) write_pod(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * t.values().size()));
  }
}

NamedTensors deserialize(std::istream& in, bool requires_grad) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  }
  const auto count = read_pod<std::uint32_t>(in);
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("checkpoint: truncated name");
    const auto rank = read_pod<std::uint32_t>(in);
    std::vector<int> shape;
    std::int64_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = read_pod<std::uint64_t>(in);
      shape.push_back(static_cast<int>(dim));
      total *= static_cast<std::int64_t>(dim);
    }
    std::vector<double> values(static_cast<std::size_t>(total));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(sizeof(double) * values.size()));
    if (!in) throw std::runtime_error("checkpoint: truncated payload for " + name);
    out.add(std::move(name),
            Tensor::from_values(std::move(shape), std::move(values), requires_grad));
  }
  return out;
}

void save_checkpoint(const NamedTensors& tensors, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  serialize(tensors, out);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

NamedTensors load_checkpoint(const std::string& path, bool requires_grad) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return deserialize(in, requires_grad);
}

std::string parameter_digest(const NamedTensors& tensors) {
  std::ostringstream buf(std::ios::binary);
  serialize(tensors, buf);
  const std::string bytes = buf.str();
  return digest_bytes(bytes);
}

}  // namespace humor::numcore
