#include "senh/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace senh {

namespace {

constexpr int kFormatVersion = 1;

void fail(const std::string& why) { throw std::runtime_error("checkpoint: " + why); }

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) fail("truncated file");
  if constexpr (std::endian::native == std::endian::big) {
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

void write_array(std::ostream& os, const std::string& name, const Tensor& t) {
  write_le<uint32_t>(os, static_cast<uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_le<uint32_t>(os, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) write_le<uint64_t>(os, static_cast<uint64_t>(t.extent(i)));
  for (double v : t.data()) write_le<double>(os, v);
}

NamedArray read_array(std::istream& is) {
  const uint32_t name_len = read_le<uint32_t>(is);
  if (name_len == 0 || name_len > 4096) fail("implausible array name length");
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  if (!is) fail("truncated file");
  const uint32_t rank = read_le<uint32_t>(is);
  if (rank == 0 || rank > 5) fail("array " + name + " has invalid rank");
  Shape shape(rank);
  for (uint32_t i = 0; i < rank; ++i)
    shape[i] = static_cast<int64_t>(read_le<uint64_t>(is));
  Tensor t(shape);
  for (double& v : t.data()) v = read_le<double>(is);
  return {std::move(name), std::move(t)};
}

nlohmann::ordered_json config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["base_channels"] = cfg.base_channels;
  j["depths"] = cfg.depths;
  j["kernel"] = cfg.kernel;
  j["expansion"] = cfg.expansion;
  j["ca_reduction"] = cfg.ca_reduction;
  j["no_cross_view"] = cfg.no_cross_view;
  j["no_cross_scale"] = cfg.no_cross_scale;
  j["no_spatial"] = cfg.no_spatial;
  j["no_channel"] = cfg.no_channel;
  j["softmax_attention"] = cfg.softmax_attention;
  j["seed"] = cfg.seed;
  return j;
}

ModelConfig config_from_json(const nlohmann::ordered_json& j) {
  ModelConfig cfg;
  try {
    cfg.base_channels = j.at("base_channels").get<int64_t>();
    cfg.depths = j.at("depths").get<std::array<int, 5>>();
    cfg.kernel = j.at("kernel").get<int>();
    cfg.expansion = j.at("expansion").get<int>();
    cfg.ca_reduction = j.at("ca_reduction").get<int>();
    cfg.no_cross_view = j.at("no_cross_view").get<bool>();
    cfg.no_cross_scale = j.at("no_cross_scale").get<bool>();
    cfg.no_spatial = j.at("no_spatial").get<bool>();
    cfg.no_channel = j.at("no_channel").get<bool>();
    cfg.softmax_attention = j.at("softmax_attention").get<bool>();
    cfg.seed = j.at("seed").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("bad config in header: ") + e.what());
  }
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const CheckpointMeta& meta,
                     const std::vector<NamedArray>& optimizer_arrays) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail("cannot open " + path + " for writing");

  nlohmann::ordered_json header;
  header["format_version"] = kFormatVersion;
  header["config"] = config_to_json(model.cfg);
  header["step"] = meta.step;
  header["epoch"] = meta.epoch;
  header["optimizer"] = !optimizer_arrays.empty();
  const std::string header_bytes = header.dump();

  write_le<uint64_t>(os, static_cast<uint64_t>(header_bytes.size()));
  os.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  visit_params(model, [&](const std::string& name, Tensor& t) { write_array(os, name, t); });
  for (const NamedArray& a : optimizer_arrays) write_array(os, a.name, a.tensor);
  os.flush();
  if (!os) fail("write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open " + path);

  const uint64_t header_len = read_le<uint64_t>(is);
  if (header_len == 0 || header_len > (1u << 20)) fail("implausible header length");
  std::string header_bytes(header_len, '\0');
  is.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
  if (!is) fail("truncated file");

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(header_bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("unparseable header: ") + e.what());
  }
  if (!header.contains("format_version") || header["format_version"].get<int>() != kFormatVersion)
    fail("unsupported format_version (expected " + std::to_string(kFormatVersion) + ")");
  if (!header.contains("config")) fail("header missing config");

  LoadedCheckpoint out;
  out.model = build_model(config_from_json(header["config"]));
  out.meta.step = header.at("step").get<int64_t>();
  out.meta.epoch = header.at("epoch").get<int64_t>();
  const bool has_optimizer = header.at("optimizer").get<bool>();

  visit_params(out.model, [&](const std::string& name, Tensor& t) {
    NamedArray a = read_array(is);
    if (a.name != name)
      fail("array order mismatch: expected " + name + ", found " + a.name);
    if (a.tensor.shape() != t.shape())
      fail("array " + name + " has shape " + shape_str(a.tensor.shape()) + ", model expects " +
           shape_str(t.shape()));
    t.data() = a.tensor.data();
  });
  if (has_optimizer) {
    while (is.peek() != std::char_traits<char>::eof())
      out.optimizer_arrays.push_back(read_array(is));
  } else {
    if (is.peek() != std::char_traits<char>::eof()) fail("trailing bytes after parameters");
  }
  return out;
}

}  // namespace senh
