#include "iekm/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "iekm/errors.hpp"

namespace iekm {
namespace {

using nlohmann::json;

constexpr std::string_view kFormat = "iekm-checkpoint";

template <typename T>
void put(std::string& out, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

template <typename T>
T get(const char* in) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), in, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

std::size_t width(StorageType t) { return t == StorageType::float64 ? 8 : 4; }

}  // namespace

std::string_view to_string(StorageType type) {
  return type == StorageType::float64 ? "float64" : "float32";
}

StorageType parse_storage_type(std::string_view text) {
  if (text == "float64") return StorageType::float64;
  if (text == "float32") return StorageType::float32;
  throw ValidationError("unknown storage type '" + std::string(text) + "' (expected float64 or float32)");
}

json config_to_json(const ModelConfig& c) {
  return {{"heads", c.heads},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"vocab_size", c.vocab_size},
          {"max_len", c.max_len},
          {"ffn_multiplier", c.ffn_multiplier},
          {"layer_norm_eps", c.layer_norm_eps},
          {"init_std", c.init_std},
          {"ablation", to_string(c.ablation)},
          {"gate", to_string(c.gate)},
          {"task", to_string(c.task)}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.heads = j.at("heads").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.layers = j.at("layers").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.ffn_multiplier = j.at("ffn_multiplier").get<int>();
  c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
  c.init_std = j.at("init_std").get<double>();
  c.ablation = parse_ablation_mode(j.at("ablation").get<std::string>());
  c.gate = parse_gate_activation(j.at("gate").get<std::string>());
  c.task = parse_task_mode(j.at("task").get<std::string>());
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& manifest, const Model& model, StorageType storage) {
  std::filesystem::path blob_path = manifest;
  blob_path.replace_extension(".bin");

  std::string blob;
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& t : model.params.tensors()) {
    const auto count = static_cast<std::size_t>(t.value.size());
    tensors.push_back({{"name", t.name},
                       {"shape", {t.value.rows(), t.value.cols()}},
                       {"offset", offset},
                       {"count", count}});
    for (std::size_t i = 0; i < count; ++i) {
      const double v = t.value.data()[i];
      if (storage == StorageType::float64) {
        put(blob, v);
      } else {
        put(blob, static_cast<float>(v));
      }
    }
    offset += count * width(storage);
  }

  const json doc = {{"format", kFormat},
                    {"format_version", kCheckpointVersion},
                    {"dtype", to_string(storage)},
                    {"byte_order", "little"},
                    {"config", config_to_json(model.config)},
                    {"vocabulary", model.vocab.tokens()},
                    {"tensors", tensors},
                    {"data_file", blob_path.filename().string()}};

  std::ofstream bin(blob_path, std::ios::binary);
  if (!bin.write(blob.data(), static_cast<std::streamsize>(blob.size()))) {
    throw std::runtime_error("cannot write " + blob_path.string());
  }
  std::ofstream out(manifest);
  if (!(out << doc.dump(2) << '\n')) throw std::runtime_error("cannot write " + manifest.string());
}

Model load_checkpoint(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open checkpoint " + manifest.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(manifest.string(), 0, e.what());
  }

  try {
    if (doc.at("format").get<std::string>() != kFormat) {
      throw ValidationError(manifest.string() + ": not an iekm checkpoint");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw ValidationError(manifest.string() + ": unsupported format_version " + std::to_string(version));
    }
    if (doc.at("byte_order").get<std::string>() != "little") {
      throw ValidationError(manifest.string() + ": unsupported byte order");
    }
    const StorageType storage = parse_storage_type(doc.at("dtype").get<std::string>());

    Model model;
    model.config = config_from_json(doc.at("config"));
    model.vocab = Vocabulary(doc.at("vocabulary").get<std::vector<std::string>>());
    if (model.vocab.size() != model.config.vocab_size) {
      throw ValidationError(manifest.string() + ": vocabulary size does not match config");
    }

    const std::filesystem::path blob_path = manifest.parent_path() / doc.at("data_file").get<std::string>();
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open " + blob_path.string());
    const std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    // the layout comes from the config; the table must match it exactly
    model.params = ModelParams::init(model.config, 0);
    const auto& table = doc.at("tensors");
    if (table.size() != model.params.size()) {
      throw ValidationError(manifest.string() + ": expected " + std::to_string(model.params.size()) +
                            " tensors, found " + std::to_string(table.size()));
    }
    const std::size_t w = width(storage);
    std::size_t expected_offset = 0;
    for (std::size_t k = 0; k < table.size(); ++k) {
      auto& t = model.params.tensors()[k];
      const auto& entry = table[k];
      const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      if (entry.at("name").get<std::string>() != t.name || shape.size() != 2 ||
          shape[0] != t.value.rows() || shape[1] != t.value.cols()) {
        throw ValidationError(manifest.string() + ": tensor " + std::to_string(k) + " should be " + t.name +
                              " " + shape_string(t.value.rows(), t.value.cols()));
      }
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto count = entry.at("count").get<std::size_t>();
      if (offset != expected_offset || count != static_cast<std::size_t>(t.value.size()) ||
          offset + count * w > blob.size()) {
        throw ValidationError(manifest.string() + ": bad offset or count for " + t.name);
      }
      for (std::size_t i = 0; i < count; ++i) {
        const char* at = blob.data() + offset + i * w;
        t.value.data()[i] = storage == StorageType::float64 ? get<double>(at) : get<float>(at);
      }
      expected_offset = offset + count * w;
    }
    if (expected_offset != blob.size()) {
      throw ValidationError(blob_path.string() + ": trailing bytes after the last tensor");
    }
    if (!model.params.all_finite()) throw ValidationError(manifest.string() + ": non-finite parameter");
    return model;
  } catch (const json::exception& e) {
    throw ParseError(manifest.string(), 0, e.what());
  }
}

}  // namespace iekm
