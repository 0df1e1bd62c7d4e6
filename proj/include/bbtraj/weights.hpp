#pragma once

// Versioned little-endian weight file.
//
//   offset  type      field
//   0       char[8]   magic "BBTRAJWT"
//   8       u32       format version (1)
//   12      u32       k
//   16      u32       p
//   20      u32       hidden
//   24      u32       latent
//   28      char[4]   gate order tag "IFGO" (input, forget, cell, output)
//   32      u32       bias convention: 2 = input and recurrent bias per LSTM
//   36      u32       float width in bytes (4)
//   40      u32       decoder init: 0 = hidden+cell, 1 = hidden only
//   44      u32       latent activation: 0 = linear
//   48      u64       parameter count
//   56      u32       config echo length n
//   60      u8[n]     config echo (key=value lines)
//   60+n    f32[...]  tensors in ModelParams::for_each_tensor order, row-major
//   end-8   u64       FNV-1a 64 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bbtraj/model.hpp"

namespace bbtraj {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

struct LoadedModel {
  ModelParams<float> params;
  std::string config_echo;
};

std::vector<std::uint8_t> serialize_model(const ModelParams<float>& params,
                                          const std::string& config_echo);

/// Throws FormatError on bad magic, version, tags or checksum, and on
/// truncation. When `expected` is given, a differing k/p/hidden/latent is a
/// DimensionError.
LoadedModel deserialize_model(const std::vector<std::uint8_t>& bytes,
                              const std::optional<ModelConfig>& expected = std::nullopt);

void save_model(const ModelParams<float>& params, const std::string& config_echo,
                const std::filesystem::path& path);
void save_model(const ModelParams<double>& params, const std::string& config_echo,
                const std::filesystem::path& path);

LoadedModel load_model(const std::filesystem::path& path,
                       const std::optional<ModelConfig>& expected = std::nullopt);

/// Exact size in bytes of a weight file for this configuration and echo length.
std::size_t weight_file_size(const ModelConfig& cfg, std::size_t echo_length);

}  // namespace bbtraj
