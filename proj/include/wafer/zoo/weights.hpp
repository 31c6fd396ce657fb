#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wafer/zoo/model.hpp"

namespace wafer::zoo {

/// File layout: "WVML1", version byte, then records until EOF. Each record is
/// u32 name length, UTF-8 name, u32 rank, u32 dims, f32 payload (all LE).
inline constexpr char kWeightMagic[5] = {'W', 'V', 'M', 'L', '1'};
inline constexpr unsigned char kWeightVersion = 1;

struct WeightRecord {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

void write_weight_file(const std::filesystem::path& path, const std::vector<WeightRecord>& records);
std::vector<WeightRecord> read_weight_file(const std::filesystem::path& path);

/// Parameters first, then buffers (batchnorm running stats).
template <typename T>
std::vector<WeightRecord> export_weights(const Model<T>& model);

/// All-or-nothing: on any error the model is left untouched.
template <typename T>
void import_weights(Model<T>& model, const std::vector<WeightRecord>& records);

/// Streams tensors straight to disk (no intermediate float copy).
template <typename T>
void save_weights(const Model<T>& model, const std::filesystem::path& path);

template <typename T>
void load_weights(Model<T>& model, const std::filesystem::path& path) {
  import_weights(model, read_weight_file(path));
}

/// Bytes a model occupies on disk in this format.
template <typename T>
std::size_t serialized_size(const Model<T>& model);

}  // namespace wafer::zoo
