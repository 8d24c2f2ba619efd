#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vulaste/error.hpp"
#include "vulaste/model.hpp"

namespace vulaste::model {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u64(std::string& out, uint64_t v) {
  char bytes[8];
  std::memcpy(bytes, &v, 8);
  out.append(bytes, 8);
}

uint64_t get_u64(std::string_view in) {
  uint64_t v = 0;
  std::memcpy(&v, in.data(), 8);
  return v;
}

[[noreturn]] void corrupt(const std::string& path, const std::string& why) {
  fail(ErrorCode::kIncompatibleArtifact, path + ": " + why);
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  nlohmann::json manifest;
  manifest["config"] = model.config;
  manifest["vocab_hash"] = model.vocab_hash;
  manifest["vocab_size"] = model.vocab_size;
  manifest["step"] = model.step;
  manifest["node_kind_vocab"] = model.node_kinds.labels();
  nlohmann::json tensors = nlohmann::json::array();
  std::string data;
  for (const auto& [name, m] : model.params.named()) {
    tensors.push_back({{"name", name},
                       {"shape", {m->rows(), m->cols()}},
                       {"offset", data.size()}});
    data.append(reinterpret_cast<const char*>(m->data()),
                static_cast<size_t>(m->size()) * sizeof(float));
  }
  manifest["tensors"] = std::move(tensors);

  const std::string text = manifest.dump();
  std::string out(kCheckpointMagic);
  put_u64(out, text.size());
  out += text;
  out += data;
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file || !file.write(out.data(), static_cast<std::streamsize>(out.size()))) {
    fail(ErrorCode::kIo, "cannot write checkpoint " + path);
  }
}

Model load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail(ErrorCode::kIo, "cannot read checkpoint " + path);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  const std::string bytes = buffer.str();
  const std::string_view view(bytes);

  if (!view.starts_with(kCheckpointMagic)) corrupt(path, "not a checkpoint");
  size_t pos = kCheckpointMagic.size();
  if (view.size() < pos + 8) corrupt(path, "truncated header");
  const uint64_t manifest_len = get_u64(view.substr(pos, 8));
  pos += 8;
  if (view.size() - pos < manifest_len) corrupt(path, "truncated manifest");

  Model model;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(view.substr(pos, manifest_len));
    model.config = manifest.at("config").get<ModelConfig>();
    model.vocab_hash = manifest.at("vocab_hash").get<std::string>();
    model.vocab_size = manifest.at("vocab_size").get<size_t>();
    model.step = manifest.at("step").get<uint64_t>();
    const auto labels = manifest.at("node_kind_vocab").get<std::vector<std::string>>();
    if (labels.empty() || labels.front() != embedding::NodeKindVocab::kUnknownLabel) {
      corrupt(path, "node-kind vocabulary lacks the unknown row");
    }
    model.node_kinds = embedding::NodeKindVocab(labels);
    model.params = Parameters<float>::initialize(model.config, model.vocab_size,
                                                 model.node_kinds, 0);
  } catch (const nlohmann::json::exception& e) {
    corrupt(path, std::string("bad manifest: ") + e.what());
  } catch (const Error& e) {
    corrupt(path, e.what());
  }
  const std::string_view data = view.substr(pos + manifest_len);

  auto named = model.params.named();
  const auto& table = manifest.at("tensors");
  if (!table.is_array() || table.size() != named.size()) {
    corrupt(path, "tensor table does not match the configuration");
  }
  for (size_t i = 0; i < named.size(); ++i) {
    const auto& entry = table[i];
    Matrix<float>& m = *named[i].second;
    try {
      const auto shape = entry.at("shape").get<std::vector<int64_t>>();
      const auto offset = entry.at("offset").get<uint64_t>();
      if (entry.at("name").get<std::string>() != named[i].first || shape.size() != 2 ||
          shape[0] != m.rows() || shape[1] != m.cols()) {
        corrupt(path, "unexpected tensor '" + entry.at("name").get<std::string>() + "'");
      }
      const size_t n = static_cast<size_t>(m.size()) * sizeof(float);
      if (offset > data.size() || data.size() - offset < n) {
        corrupt(path, "tensor data out of bounds");
      }
      std::memcpy(m.data(), data.data() + offset, n);
    } catch (const nlohmann::json::exception& e) {
      corrupt(path, std::string("bad tensor entry: ") + e.what());
    }
  }
  return model;
}

}  // namespace vulaste::model
