#include "savir/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "savir/error.hpp"

namespace savir::model {

namespace {

constexpr char kMagic[4] = {'S', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

template <typename V>
void put(std::ofstream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

class Input {
 public:
  explicit Input(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw FormatError("cannot open checkpoint " + path.string(), 0);
  }

  void read(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(std::string("truncated checkpoint while reading ") + what, offset_ + in_.gcount());
    }
    offset_ += n;
  }

  template <typename V>
  V get(const char* what) {
    V v;
    read(&v, sizeof(V), what);
    return v;
  }

  std::uint64_t offset() const { return offset_; }

 private:
  std::ifstream in_;
  std::uint64_t offset_ = 0;
};

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const SavirModel<float>& model, const CheckpointMeta& meta) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    const auto params = model.parameters();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) {
      put<std::uint16_t>(out, static_cast<std::uint16_t>(p->name.size()));
      out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
      out.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    }
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
  }
  nlohmann::ordered_json j;
  j["model"] = nlohmann::json::parse(meta.model.to_json());
  j["run_config_hash"] = meta.run_config_hash;
  j["epoch"] = meta.epoch;
  j["val_accuracy"] = meta.val_accuracy;
  j["seed"] = meta.seed;
  j["dataset_layout"] = meta.dataset_layout;
  j["dataset_mode"] = meta.dataset_mode;
  std::ofstream side(sidecar_path(path));
  if (!side) throw ConfigError("cannot write checkpoint metadata " + sidecar_path(path).string());
  side << j.dump(2) << "\n";
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw ConfigError("missing checkpoint metadata " + sidecar_path(path).string());
  CheckpointMeta meta;
  try {
    const auto j = nlohmann::json::parse(in);
    meta.model = ModelConfig::from_json(j.at("model").dump());
    meta.run_config_hash = j.at("run_config_hash").get<std::string>();
    meta.epoch = j.at("epoch").get<int>();
    meta.val_accuracy = j.at("val_accuracy").get<double>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.dataset_layout = j.value("dataset_layout", "");
    meta.dataset_mode = j.value("dataset_mode", "");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad checkpoint metadata " + sidecar_path(path).string() + ": " + e.what());
  }
  return meta;
}

SavirModel<float> load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta_out) {
  const CheckpointMeta meta = read_checkpoint_meta(path);
  SavirModel<float> model(meta.model);
  Input in(path);
  char magic[4];
  in.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a checkpoint file", 0);
  if (const auto v = in.get<std::uint32_t>("version"); v != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(v), 4);
  }
  auto params = model.parameters();
  const auto count = in.get<std::uint32_t>("parameter count");
  if (count != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model expects " + std::to_string(params.size()), 8);
  }
  for (auto* p : params) {
    const auto at = in.offset();
    std::string name(in.get<std::uint16_t>("name length"), '\0');
    in.read(name.data(), name.size(), "name");
    const auto rows = in.get<std::uint32_t>("rows");
    const auto cols = in.get<std::uint32_t>("cols");
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
      throw FormatError("tensor " + name + " does not match model tensor " + p->name, at);
    }
    in.read(p->value.data(), static_cast<std::size_t>(p->value.size()) * sizeof(float), "tensor data");
  }
  if (meta_out != nullptr) *meta_out = meta;
  return model;
}

}  // namespace savir::model
