// Copyright 2026 The lipscert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "model/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace lipscert {

namespace {

constexpr char kMagic[4] = {'L', 'I', 'P', 'S'};
constexpr std::uint32_t kMaxRank = 16;

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw std::runtime_error("weights: truncated file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_weights(const std::vector<NamedTensor>& tensors, std::ostream& out) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kWeightFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put_le<std::uint64_t>(out, e);
    for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("weights: write failed");
}

std::vector<NamedTensor> read_weights(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("weights: bad magic");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kWeightFormatVersion) {
    throw std::runtime_error("weights: unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in);
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw std::runtime_error("weights: truncated name");
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > kMaxRank) throw std::runtime_error("weights: rank too large in '" + name + "'");
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(get_le<std::uint64_t>(in));
    Tensor t(shape);
    for (double& v : t.values()) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

std::vector<NamedTensor> model_weights(Model& model) {
  std::vector<NamedTensor> out;
  for (const ParamRef& p : model.parameters()) {
    out.emplace_back(p.name, p.tensor ? *p.tensor : Tensor(Shape{}, *p.scalar));
  }
  return out;
}

void assign_weights(Model& model, const std::vector<NamedTensor>& tensors) {
  std::vector<ParamRef> params = model.parameters();
  if (tensors.size() != params.size()) {
    throw DimensionError("weights: expected " + std::to_string(params.size()) + " tensors, got " +
                         std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = tensors[i];
    if (name != params[i].name) throw DimensionError("weights: expected '" + params[i].name + "', got '" + name + "'");
    const Shape want = params[i].tensor ? params[i].tensor->shape() : Shape{};
    if (t.shape() != want) throw DimensionError("weights: shape mismatch for '" + name + "'");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].tensor) *params[i].tensor = tensors[i].second;
    else *params[i].scalar = tensors[i].second[0];
  }
}

void save_weights(Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_weights(model_weights(model), out);
}

void load_weights(Model& model, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  assign_weights(model, read_weights(in));
}

}  // namespace lipscert
