#include "wafer/zoo/weights.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <type_traits>

namespace wafer::zoo {
namespace {

static_assert(std::endian::native == std::endian::little, "weight IO assumes a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  bool done() const { return pos_ == bytes_.size(); }

  void take(void* dst, std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw PayloadError(path_ + ": truncated while reading " + what + " at byte " +
                         std::to_string(pos_));
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    take(&v, sizeof v, what);
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::vector<char> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::size_t record_bytes(const std::string& name, const Shape& shape) {
  return 4 + name.size() + 4 + 4 * shape.size() + 4 * shape_size(shape);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  out.write(kWeightMagic, sizeof kWeightMagic);
  out.put(static_cast<char>(kWeightVersion));
  return out;
}

void put_header(std::ofstream& out, const std::string& name, const Shape& shape) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u32(out, static_cast<std::uint32_t>(d));
}

template <typename T>
void put_tensor(std::ofstream& out, const std::string& name, const Tensor<T>& t) {
  put_header(out, name, t.shape());
  if constexpr (std::is_same_v<T, float>) {
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 4));
  } else {
    std::vector<float> tmp(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) tmp[i] = static_cast<float>(t[i]);
    out.write(reinterpret_cast<const char*>(tmp.data()), static_cast<std::streamsize>(tmp.size() * 4));
  }
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  if (!out.flush()) throw FileError("write failed for " + path.string());
}

}  // namespace

void write_weight_file(const std::filesystem::path& path, const std::vector<WeightRecord>& records) {
  std::ofstream out = open_for_write(path);
  for (const auto& r : records) {
    put_header(out, r.name, r.shape);
    out.write(reinterpret_cast<const char*>(r.data.data()),
              static_cast<std::streamsize>(r.data.size() * sizeof(float)));
  }
  finish(out, path);
}

template <typename T>
void save_weights(const Model<T>& model, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  for (const auto* p : model.parameters()) put_tensor(out, p->name, p->value);
  for (const auto& b : model.buffers()) put_tensor(out, b.name, *b.tensor);
  finish(out, path);
}

std::vector<WeightRecord> read_weight_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open weight file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());

  char magic[sizeof kWeightMagic];
  if (r.remaining() < sizeof magic + 1) throw MagicError(path.string() + ": too short for a header");
  r.take(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kWeightMagic, sizeof magic) != 0) {
    throw MagicError(path.string() + ": not a WVML1 weight file");
  }
  unsigned char version;
  r.take(&version, 1, "version");
  if (version != kWeightVersion) {
    throw MagicError(path.string() + ": unsupported version " + std::to_string(version));
  }

  std::vector<WeightRecord> records;
  while (!r.done()) {
    WeightRecord rec;
    const std::uint32_t len = r.u32("name length");
    if (len > r.remaining()) throw PayloadError(path.string() + ": name length exceeds file");
    rec.name.resize(len);
    r.take(rec.name.data(), len, "name");
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 8) {
      throw PayloadError(path.string() + ": tensor '" + rec.name + "' has rank " + std::to_string(rank));
    }
    for (std::uint32_t i = 0; i < rank; ++i) rec.shape.push_back(r.u32("dims"));
    const std::size_t n = shape_size(rec.shape);
    if (n == 0 || n > r.remaining() / sizeof(float)) {
      throw PayloadError(path.string() + ": payload of '" + rec.name + "' is truncated");
    }
    rec.data.resize(n);
    r.take(rec.data.data(), n * sizeof(float), "payload");
    records.push_back(std::move(rec));
  }
  return records;
}

template <typename T>
std::vector<WeightRecord> export_weights(const Model<T>& model) {
  std::vector<WeightRecord> out;
  auto add = [&out](const std::string& name, const Tensor<T>& t) {
    std::vector<float> data(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) data[i] = static_cast<float>(t[i]);
    out.push_back({name, t.shape(), std::move(data)});
  };
  for (const auto* p : model.parameters()) add(p->name, p->value);
  for (const auto& b : model.buffers()) add(b.name, *b.tensor);
  return out;
}

template <typename T>
void import_weights(Model<T>& model, const std::vector<WeightRecord>& records) {
  std::map<std::string, const WeightRecord*> by_name;
  for (const auto& r : records) {
    if (!by_name.emplace(r.name, &r).second) {
      throw UnexpectedTensorError("tensor '" + r.name + "' appears twice");
    }
  }
  std::vector<std::pair<Tensor<T>*, const WeightRecord*>> plan;
  auto stage = [&](const std::string& name, Tensor<T>& dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw MissingTensorError("weight file lacks tensor '" + name + "'");
    if (it->second->shape != dst.shape()) {
      throw ShapeMismatchError("tensor '" + name + "' has shape " + shape_str(it->second->shape) +
                               ", model expects " + shape_str(dst.shape()));
    }
    plan.emplace_back(&dst, it->second);
    by_name.erase(it);
  };
  for (auto* p : model.parameters()) stage(p->name, p->value);
  for (const auto& b : model.buffers()) stage(b.name, *b.tensor);
  if (!by_name.empty()) {
    throw UnexpectedTensorError("weight file has tensor '" + by_name.begin()->first +
                                "' that the model does not");
  }
  for (auto& [dst, rec] : plan) {
    for (std::size_t i = 0; i < rec->data.size(); ++i) (*dst)[i] = static_cast<T>(rec->data[i]);
  }
}

template <typename T>
std::size_t serialized_size(const Model<T>& model) {
  std::size_t n = sizeof kWeightMagic + 1;
  for (const auto* p : model.parameters()) n += record_bytes(p->name, p->value.shape());
  for (const auto& b : model.buffers()) n += record_bytes(b.name, b.tensor->shape());
  return n;
}

template std::vector<WeightRecord> export_weights(const Model<float>&);
template std::vector<WeightRecord> export_weights(const Model<double>&);
template void import_weights(Model<float>&, const std::vector<WeightRecord>&);
template void import_weights(Model<double>&, const std::vector<WeightRecord>&);
template void save_weights(const Model<float>&, const std::filesystem::path&);
template void save_weights(const Model<double>&, const std::filesystem::path&);
template std::size_t serialized_size(const Model<float>&);
template std::size_t serialized_size(const Model<double>&);

}  // namespace wafer::zoo
