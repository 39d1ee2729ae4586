#include "savir/cli/settings.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "savir/error.hpp"

namespace savir::cli {

namespace {

const std::vector<std::pair<std::string, std::string>> kDefaults = {
    {"seed", "0"},
    {"data.layout", "center"},
    {"data.mode", "iraven"},
    {"data.image_size", "96"},
    {"data.column_rules", "false"},
    {"data.rules", "constant,progression,arithmetic,distribute_three"},
    {"data.train", "5000"},
    {"data.val", "500"},
    {"data.test", "1000"},
    {"model.d_model", "64"},
    {"model.heads", "3"},
    {"model.head_dim", "0"},
    {"model.depth", "1"},
    {"model.mlp_hidden", "0"},
    {"model.relation_dim", "0"},
    {"model.phi_hidden", "0"},
    {"model.psi_hidden", "0"},
    {"model.blind_hidden", "0"},
    {"model.dropout", "0.5"},
    {"model.use_columns", "false"},
    {"model.context_blind", "false"},
    {"model.joint_attention", "false"},
    {"model.backbone_channels", "32,64,96,128"},
    {"train.dataset", ""},
    {"train.epochs", "30"},
    {"train.batch_size", "32"},
    {"train.learning_rate", "0.0001"},
    {"train.adam_beta1", "0.9"},
    {"train.adam_beta2", "0.999"},
    {"train.adam_epsilon", "1e-08"},
    {"train.row_col_shuffle", "true"},
    {"train.choice_shuffle", "true"},
    {"train.train_limit", "0"},
    {"eval.checkpoint", ""},
    {"eval.dataset", ""},
    {"eval.split", "test"},
    {"eval.cross_mode", "false"},
    {"eval.margin_bins", "20"},
    {"eval.margin_threshold", "1.0"},
    {"ablate.name", ""},
    {"ablate.sizes", "32,96"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key " + key + ": expected " + expected + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value, expected);
  return out;
}

}  // namespace

Settings::Settings() : entries_(kDefaults) {}

std::size_t Settings::index(const std::string& key) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first == key) return i;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void Settings::merge_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw NotFoundError("config file not found: " + file.string());
  std::stringstream text;
  text << in.rdbuf();
  merge_text(text.str(), file.string());
}

void Settings::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string section;
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find_first_of("#;")));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    try {
      set(full, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void Settings::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Settings::set(const std::string& key, const std::string& value) { entries_[index(key)].second = value; }

const std::string& Settings::get(const std::string& key) const { return entries_[index(key)].second; }

int Settings::get_int(const std::string& key) const { return parse_number<int>(key, get(key), "an integer"); }

std::uint64_t Settings::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key), "a non-negative integer");
}

double Settings::get_double(const std::string& key) const { return parse_number<double>(key, get(key), "a number"); }

bool Settings::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> Settings::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> Settings::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : get_list(key)) out.push_back(parse_number<int>(key, item, "a comma-separated list of integers"));
  return out;
}

std::string Settings::to_ini() const {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, value] : entries_) {
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << (dot == std::string::npos ? key : key.substr(dot + 1)) << " = " << value << "\n";
  }
  return os.str();
}

rpm::DatasetRecipe recipe_from(const Settings& s) {
  rpm::DatasetRecipe r;
  try {
    r.generator.layout = rpm::parse_layout(s.get("data.layout"));
  } catch (const std::exception&) {
    bad_value("data.layout", s.get("data.layout"), "center or grid2x2");
  }
  try {
    r.generator.mode = rpm::parse_distractor_mode(s.get("data.mode"));
  } catch (const std::exception&) {
    bad_value("data.mode", s.get("data.mode"), "raven or iraven");
  }
  r.generator.column_rules = s.get_bool("data.column_rules");
  r.generator.palette.allowed.clear();
  for (const auto& name : s.get_list("data.rules")) {
    try {
      r.generator.palette.allowed.push_back(rpm::parse_rule_kind(name));
    } catch (const std::exception&) {
      bad_value("data.rules", name, "a rule name");
    }
  }
  if (r.generator.palette.allowed.empty()) throw ConfigError("config key data.rules: at least one rule is required");
  r.image_size = s.get_int("data.image_size");
  r.counts = {{"train", static_cast<std::size_t>(s.get_u64("data.train"))},
              {"val", static_cast<std::size_t>(s.get_u64("data.val"))},
              {"test", static_cast<std::size_t>(s.get_u64("data.test"))}};
  r.seed = s.get_u64("seed");
  return r;
}

model::ModelConfig model_from(const Settings& s) {
  model::ModelConfig m;
  m.image_size = s.get_int("data.image_size");
  m.d_model = s.get_int("model.d_model");
  m.heads = s.get_int("model.heads");
  m.head_dim = s.get_int("model.head_dim");
  m.depth = s.get_int("model.depth");
  m.mlp_hidden = s.get_int("model.mlp_hidden");
  m.relation_dim = s.get_int("model.relation_dim");
  m.phi_hidden = s.get_int("model.phi_hidden");
  m.psi_hidden = s.get_int("model.psi_hidden");
  m.blind_hidden = s.get_int("model.blind_hidden");
  m.dropout = s.get_double("model.dropout");
  m.use_columns = s.get_bool("model.use_columns");
  m.context_blind = s.get_bool("model.context_blind");
  m.joint_attention = s.get_bool("model.joint_attention");
  m.backbone_channels = s.get_int_list("model.backbone_channels");
  m.validate();
  return m;
}

train::RunConfig run_from(const Settings& s) {
  train::RunConfig r;
  r.dataset = s.get("train.dataset");
  r.epochs = s.get_int("train.epochs");
  r.batch_size = s.get_int("train.batch_size");
  r.learning_rate = s.get_double("train.learning_rate");
  r.adam_beta1 = s.get_double("train.adam_beta1");
  r.adam_beta2 = s.get_double("train.adam_beta2");
  r.adam_epsilon = s.get_double("train.adam_epsilon");
  r.row_col_shuffle = s.get_bool("train.row_col_shuffle");
  r.choice_shuffle = s.get_bool("train.choice_shuffle");
  r.train_limit = static_cast<std::size_t>(s.get_u64("train.train_limit"));
  r.seed = s.get_u64("seed");
  r.model = model_from(s);
  r.validate();
  return r;
}

}  // namespace savir::cli
