#include "i8t/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace i8t {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written little-endian via raw memory");

namespace {

constexpr char kMagic[4] = {'I', '8', 'F', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_string(std::ofstream& f, const std::string& s) {
  put<uint32_t>(f, static_cast<uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& f) {
  const uint32_t len = get<uint32_t>(f);
  if (len > (1u << 20)) throw std::runtime_error("checkpoint: unreasonable name length");
  std::string s(len, '\0');
  f.read(s.data(), len);
  if (!f) throw std::runtime_error("checkpoint: truncated name");
  return s;
}

struct Entry {
  Tensor* tensor;
};

std::map<std::string, Tensor*> collect_tensors(Model& model) {
  std::map<std::string, Tensor*> out;
  for (auto& [path, layer] : model.leaves()) {
    for (ParamRef p : layer->params()) out[path + "." + p.name] = p.value;
    for (ParamRef p : layer->buffers()) out[path + "." + p.name] = p.value;
  }
  return out;
}

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  auto tensors = collect_tensors(model);
  std::vector<std::pair<std::string, QuantState*>> clip_states;
  for (auto& [lpath, layer] : model.leaves())
    if (QuantState* qs = layer->quant_state()) clip_states.emplace_back(lpath, qs);

  f.write(kMagic, 4);
  put<uint32_t>(f, kVersion);
  put<uint32_t>(f, static_cast<uint32_t>(tensors.size()));
  put<uint32_t>(f, static_cast<uint32_t>(clip_states.size()));
  for (auto& [name, tensor] : tensors) {
    put_string(f, name);
    put<uint32_t>(f, static_cast<uint32_t>(tensor->shape().rank()));
    for (int i = 0; i < tensor->shape().rank(); ++i)
      put<uint32_t>(f, static_cast<uint32_t>(tensor->shape()[i]));
    f.write(reinterpret_cast<const char*>(tensor->data()),
            static_cast<std::streamsize>(tensor->numel() * sizeof(float)));
  }
  for (auto& [name, qs] : clip_states) {
    put_string(f, name);
    put<float>(f, qs->clip_state.clip);
    put<double>(f, qs->clip_state.last_dc);
    put<int64_t>(f, qs->clip_state.iter_of_last_update);
    put<int64_t>(f, qs->clip_state.period);
    put<float>(f, qs->clip_w);
    put<float>(f, qs->clip_a);
  }
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

void load_checkpoint(Model& model, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("checkpoint: bad magic");
  const uint32_t version = get<uint32_t>(f);
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  const uint32_t n_tensors = get<uint32_t>(f);
  const uint32_t n_clip = get<uint32_t>(f);

  auto tensors = collect_tensors(model);
  std::map<std::string, QuantState*> clip_states;
  for (auto& [lpath, layer] : model.leaves())
    if (QuantState* qs = layer->quant_state()) clip_states[lpath] = qs;

  for (uint32_t t = 0; t < n_tensors; ++t) {
    const std::string name = get_string(f);
    const uint32_t rank = get<uint32_t>(f);
    std::vector<int64_t> dims(rank);
    for (uint32_t i = 0; i < rank; ++i) dims[i] = get<uint32_t>(f);
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("checkpoint: unknown tensor " + name);
    if (!(Shape(dims) == it->second->shape()))
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    f.read(reinterpret_cast<char*>(it->second->data()),
           static_cast<std::streamsize>(it->second->numel() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint: truncated payload for " + name);
  }
  for (uint32_t t = 0; t < n_clip; ++t) {
    const std::string name = get_string(f);
    auto it = clip_states.find(name);
    if (it == clip_states.end()) throw std::runtime_error("checkpoint: unknown clip state " + name);
    QuantState* qs = it->second;
    qs->clip_state.layer_id = name;
    qs->clip_state.clip = get<float>(f);
    qs->clip_state.last_dc = get<double>(f);
    qs->clip_state.iter_of_last_update = get<int64_t>(f);
    qs->clip_state.period = get<int64_t>(f);
    qs->clip_w = get<float>(f);
    qs->clip_a = get<float>(f);
  }
}

}  // namespace i8t
