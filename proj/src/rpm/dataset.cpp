#include "savir/rpm/dataset.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

#include "savir/error.hpp"
#include "savir/rng.hpp"

namespace savir::rpm {

namespace {

using nlohmann::json;

json panel_to_json(const PanelSymbolic& p) {
  json objs = json::array();
  for (const auto& o : p.objects) objs.push_back({o.cell, o.type, o.size, o.color});
  return {{"layout", to_string(p.layout)}, {"objects", objs}};
}

PanelSymbolic panel_from_json(const json& j) {
  PanelSymbolic p;
  p.layout = parse_layout(j.at("layout").get<std::string>());
  for (const auto& o : j.at("objects")) {
    p.objects.push_back({o.at(0).get<int>(), o.at(1).get<int>(), o.at(2).get<int>(), o.at(3).get<int>()});
  }
  return p;
}

template <typename T>
void put(std::ofstream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& file) : in_(file, std::ios::binary) {
    if (!in_) throw FormatError("cannot open " + file.string(), 0);
  }

  void bytes(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(std::string("truncated file while reading ") + what, offset_ + static_cast<std::uint64_t>(in_.gcount()));
    }
    offset_ += n;
  }

  template <typename T>
  T get(const char* what) {
    unsigned char b[sizeof(T)];
    bytes(b, sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v = static_cast<T>(v | (static_cast<T>(b[i]) << (8 * i)));
    return v;
  }

  std::uint64_t offset() const { return offset_; }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  std::uint64_t offset_ = 0;
};

}  // namespace

std::size_t Manifest::total() const {
  std::size_t n = 0;
  for (const auto& [name, c] : counts) n += c;
  return n;
}

std::string serialize_symbolic(const PuzzleSymbolic& p) {
  json ctx = json::array(), ch = json::array(), rules = json::array();
  for (const auto& panel : p.context) ctx.push_back(panel_to_json(panel));
  for (const auto& panel : p.choices) ch.push_back(panel_to_json(panel));
  for (const auto& r : p.rules) {
    rules.push_back({{"rule", to_string(r.rule)},
                     {"attribute", to_string(r.attribute)},
                     {"parameter", r.parameter},
                     {"value_set", r.value_set}});
  }
  json j = {{"layout", to_string(p.layout)},     {"context", ctx},
            {"choices", ch},                     {"correct_index", p.correct_index},
            {"rules", rules},                    {"distractor_mode", to_string(p.distractor_mode)},
            {"column_rules", p.column_rules},    {"seed", p.seed}};
  return j.dump();
}

PuzzleSymbolic deserialize_symbolic(const std::string& text) {
  const json j = json::parse(text);
  PuzzleSymbolic p;
  p.layout = parse_layout(j.at("layout").get<std::string>());
  const auto& ctx = j.at("context");
  const auto& ch = j.at("choices");
  if (ctx.size() != 8 || ch.size() != 8) throw std::runtime_error("symbolic payload needs 8 context and 8 choice panels");
  for (std::size_t i = 0; i < 8; ++i) {
    p.context[i] = panel_from_json(ctx[i]);
    p.choices[i] = panel_from_json(ch[i]);
  }
  p.correct_index = j.at("correct_index").get<int>();
  for (const auto& r : j.at("rules")) {
    RuleInstance ri;
    ri.rule = parse_rule_kind(r.at("rule").get<std::string>());
    ri.attribute = parse_attr_kind(r.at("attribute").get<std::string>());
    ri.parameter = r.at("parameter").get<int>();
    ri.value_set = r.at("value_set").get<std::array<int, 3>>();
    p.rules.push_back(ri);
  }
  p.distractor_mode = parse_distractor_mode(j.at("distractor_mode").get<std::string>());
  p.column_rules = j.at("column_rules").get<bool>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

void write_split(const std::filesystem::path& file, const DatasetSplit& split) {
  if (split.puzzles.empty()) throw ConfigError("refusing to write an empty split to " + file.string());
  if (split.rasters.size() != split.puzzles.size()) throw ConfigError("puzzle and raster counts differ");
  for (const auto& r : split.rasters) {
    if (r.image_size != split.image_size) throw ConfigError("rasters in one split must share an image size");
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.write(kDatasetMagic, 4);
  put<std::uint16_t>(out, kDatasetVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(split.puzzles.size()));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(split.image_size));
  for (std::size_t i = 0; i < split.puzzles.size(); ++i) {
    const auto& r = split.rasters[i];
    out.write(reinterpret_cast<const char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.label));
    const std::string payload = serialize_symbolic(split.puzzles[i]);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(payload.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  if (!out) throw ConfigError("write failed for " + file.string());
}

DatasetSplit read_split(const std::filesystem::path& file) {
  Reader in(file);
  char magic[4];
  in.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kDatasetMagic, 4) != 0) throw FormatError("bad magic in " + file.string(), 0);
  const auto version = in.get<std::uint16_t>("version");
  if (version != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version), 4);
  }
  const auto count = in.get<std::uint32_t>("puzzle count");
  const std::uint64_t size_offset = in.offset();
  const auto image_size = in.get<std::uint16_t>("image size");
  if (!valid_image_size(image_size)) {
    throw FormatError("invalid image size " + std::to_string(image_size), size_offset);
  }
  DatasetSplit split;
  split.image_size = image_size;
  split.puzzles.reserve(count);
  split.rasters.reserve(count);
  const std::size_t n_pixels = static_cast<std::size_t>(kPanelsPerPuzzle) * image_size * image_size;
  for (std::uint32_t i = 0; i < count; ++i) {
    PuzzleRaster r;
    r.image_size = image_size;
    r.pixels.resize(n_pixels);
    in.bytes(r.pixels.data(), n_pixels, "images");
    const std::uint64_t label_offset = in.offset();
    r.label = in.get<std::uint8_t>("label");
    if (r.label > 7) throw FormatError("label out of range", label_offset);
    const auto len = in.get<std::uint32_t>("symbolic length");
    const std::uint64_t payload_offset = in.offset();
    std::string payload(len, '\0');
    in.bytes(payload.data(), len, "symbolic payload");
    PuzzleSymbolic p;
    try {
      p = deserialize_symbolic(payload);
    } catch (const std::exception& e) {
      throw FormatError(std::string("malformed symbolic payload: ") + e.what(), payload_offset);
    }
    if (p.correct_index != r.label) throw FormatError("label disagrees with symbolic payload", label_offset);
    split.puzzles.push_back(std::move(p));
    split.rasters.push_back(std::move(r));
  }
  if (!in.at_end()) throw FormatError("trailing bytes after last puzzle", in.offset());
  return split;
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  json counts = json::object();
  for (const auto& [name, c] : m.counts) counts[name] = c;
  const json j = {{"layout", to_string(m.layout)},
                  {"distractor_mode", to_string(m.distractor_mode)},
                  {"image_size", m.image_size},
                  {"column_rules", m.column_rules},
                  {"counts", counts},
                  {"seed", m.seed},
                  {"format_version", m.format_version}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw ConfigError("cannot write manifest in " + dir.string());
  out << j.dump(2) << "\n";
}

Manifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("missing manifest.json in " + dir.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest.json: ") + e.what());
  }
  Manifest m;
  try {
    m.layout = parse_layout(j.at("layout").get<std::string>());
    m.distractor_mode = parse_distractor_mode(j.at("distractor_mode").get<std::string>());
    m.image_size = j.at("image_size").get<int>();
    m.column_rules = j.value("column_rules", false);
    for (const auto& [name, c] : j.at("counts").items()) m.counts[name] = c.get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.format_version = j.at("format_version").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest.json: ") + e.what());
  }
  if (m.format_version != kDatasetVersion) {
    throw ConfigError("unsupported manifest format_version " + std::to_string(m.format_version));
  }
  return m;
}

std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& split) {
  return dir / (split + ".rpmd");
}

void write_dataset(const std::filesystem::path& dir, const Manifest& manifest,
                   const std::map<std::string, DatasetSplit>& splits) {
  std::filesystem::create_directories(dir);
  Manifest m = manifest;
  m.counts.clear();
  for (const auto& [name, split] : splits) {
    if (split.image_size != manifest.image_size) throw ConfigError("split " + name + " image size disagrees with manifest");
    write_split(split_path(dir, name), split);
    m.counts[name] = split.size();
  }
  write_manifest(dir, m);
}

DatasetSplit read_dataset(const std::filesystem::path& dir, const std::string& split) {
  const Manifest m = read_manifest(dir);
  DatasetSplit s = read_split(split_path(dir, split));
  if (s.image_size != m.image_size) {
    throw FormatError("split image size " + std::to_string(s.image_size) + " disagrees with manifest", 10);
  }
  if (auto it = m.counts.find(split); it != m.counts.end() && it->second != s.size()) {
    throw FormatError("split " + split + " holds " + std::to_string(s.size()) + " puzzles, manifest says " +
                          std::to_string(it->second),
                      6);
  }
  return s;
}

std::uint64_t split_seed(std::uint64_t seed, const std::string& split) {
  std::uint64_t stream = 0;
  for (char c : split) stream = stream * 131 + static_cast<unsigned char>(c);
  return mix_seed(seed, stream);
}

DatasetSplit generate_split(const GeneratorConfig& config, int image_size, std::uint64_t seed, std::size_t count) {
  DatasetSplit s;
  s.image_size = image_size;
  s.puzzles = sample_puzzles(config, seed, count);
  s.rasters.reserve(count);
  for (const auto& p : s.puzzles) s.rasters.push_back(rasterize(p, image_size));
  return s;
}

Manifest generate_dataset(const DatasetRecipe& recipe, const std::filesystem::path& dir) {
  if (!valid_image_size(recipe.image_size)) {
    throw ConfigError("image size " + std::to_string(recipe.image_size) + " is not a multiple of 32 in [32, 224]");
  }
  std::filesystem::create_directories(dir);
  Manifest m;
  m.layout = recipe.generator.layout;
  m.distractor_mode = recipe.generator.mode;
  m.image_size = recipe.image_size;
  m.column_rules = recipe.generator.column_rules;
  m.seed = recipe.seed;
  for (const auto& [name, count] : recipe.counts) {
    if (count == 0) continue;
    write_split(split_path(dir, name), generate_split(recipe.generator, recipe.image_size, split_seed(recipe.seed, name), count));
    m.counts[name] = count;
  }
  write_manifest(dir, m);
  return m;
}

}  // namespace savir::rpm
