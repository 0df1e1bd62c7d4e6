#include "bbtraj/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace bbtraj {

namespace {

constexpr char kMagic[8] = {'B', 'B', 'T', 'R', 'A', 'J', 'W', 'T'};
constexpr char kGateOrder[4] = {'I', 'F', 'G', 'O'};
constexpr std::uint32_t kDualBias = 2;
constexpr std::uint32_t kFloatWidth = 4;
constexpr std::uint32_t kLinearLatent = 0;
constexpr std::size_t kFixedHeader = 60;

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void bytes(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& in, std::size_t limit) : in_(in), limit_(limit) {}
  void need(std::size_t n) const {
    if (pos_ + n > limit_) {
      throw FormatError("weight file truncated at byte " + std::to_string(pos_));
    }
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t position() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t weight_file_size(const ModelConfig& cfg, std::size_t echo_length) {
  return kFixedHeader + echo_length + kFloatWidth * parameter_count(cfg) + 8;
}

std::vector<std::uint8_t> serialize_model(const ModelParams<float>& params,
                                          const std::string& config_echo) {
  const ModelConfig& cfg = params.config;
  Writer w;
  w.buffer().reserve(weight_file_size(cfg, config_echo.size()));
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kWeightFormatVersion);
  w.u32(static_cast<std::uint32_t>(cfg.k));
  w.u32(static_cast<std::uint32_t>(cfg.p));
  w.u32(static_cast<std::uint32_t>(cfg.hidden));
  w.u32(static_cast<std::uint32_t>(cfg.latent));
  w.bytes(kGateOrder, sizeof kGateOrder);
  w.u32(kDualBias);
  w.u32(kFloatWidth);
  w.u32(static_cast<std::uint32_t>(cfg.decoder_init));
  w.u32(kLinearLatent);
  w.u64(params.size());
  w.u32(static_cast<std::uint32_t>(config_echo.size()));
  w.bytes(config_echo.data(), config_echo.size());
  params.for_each_tensor([&w](const std::string&, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) w.f32(t.data()[i]);
  });
  w.u64(fnv1a(w.buffer().data(), w.buffer().size()));
  return std::move(w.buffer());
}

LoadedModel deserialize_model(const std::vector<std::uint8_t>& bytes,
                              const std::optional<ModelConfig>& expected) {
  if (bytes.size() < kFixedHeader + 8) {
    throw FormatError("weight file truncated: " + std::to_string(bytes.size()) + " bytes");
  }
  Reader r(bytes, bytes.size() - 8);
  if (r.bytes(8) != std::string(kMagic, 8)) {
    throw FormatError("not a weight file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight format version " + std::to_string(version) +
                      " (expected " + std::to_string(kWeightFormatVersion) + ")");
  }
  ModelConfig cfg;
  cfg.k = static_cast<int>(r.u32());
  cfg.p = static_cast<int>(r.u32());
  cfg.hidden = static_cast<int>(r.u32());
  cfg.latent = static_cast<int>(r.u32());
  if (r.bytes(4) != std::string(kGateOrder, 4)) {
    throw FormatError("unsupported gate order tag");
  }
  if (r.u32() != kDualBias) throw FormatError("unsupported bias convention");
  if (r.u32() != kFloatWidth) throw FormatError("unsupported float width");
  const std::uint32_t init = r.u32();
  if (init > 1) throw FormatError("unknown decoder init tag " + std::to_string(init));
  cfg.decoder_init = static_cast<DecoderInit>(init);
  if (r.u32() != kLinearLatent) throw FormatError("unsupported latent activation");
  const std::uint64_t count = r.u64();

  if (expected && (expected->k != cfg.k || expected->p != cfg.p ||
                   expected->hidden != cfg.hidden || expected->latent != cfg.latent)) {
    throw DimensionError("weight file dims k=" + std::to_string(cfg.k) + " p=" +
                         std::to_string(cfg.p) + " hidden=" + std::to_string(cfg.hidden) +
                         " latent=" + std::to_string(cfg.latent) + " do not match expected k=" +
                         std::to_string(expected->k) + " p=" + std::to_string(expected->p) +
                         " hidden=" + std::to_string(expected->hidden) +
                         " latent=" + std::to_string(expected->latent));
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("weight file header: ") + e.what());
  }
  if (count != parameter_count(cfg)) {
    throw FormatError("weight file declares " + std::to_string(count) +
                      " parameters, dims imply " + std::to_string(parameter_count(cfg)));
  }

  LoadedModel out;
  const std::uint32_t echo_len = r.u32();
  out.config_echo = r.bytes(echo_len);
  if (bytes.size() != weight_file_size(cfg, echo_len)) {
    throw FormatError("weight file has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(weight_file_size(cfg, echo_len)));
  }
  const std::size_t body_end = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body_end + i]) << (8 * i);
  if (stored != fnv1a(bytes.data(), body_end)) {
    throw FormatError("weight file checksum mismatch");
  }

  out.params = ModelParams<float>::zeros(cfg);
  out.params.for_each_tensor([&r](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = r.f32();
  });
  return out;
}

void save_model(const ModelParams<float>& params, const std::string& config_echo,
                const std::filesystem::path& path) {
  const auto bytes = serialize_model(params, config_echo);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

void save_model(const ModelParams<double>& params, const std::string& config_echo,
                const std::filesystem::path& path) {
  save_model(params.cast<float>(), config_echo, path);
}

LoadedModel load_model(const std::filesystem::path& path,
                       const std::optional<ModelConfig>& expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot open weight file '" + path.string() + "'");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return deserialize_model(bytes, expected);
}

}  // namespace bbtraj
