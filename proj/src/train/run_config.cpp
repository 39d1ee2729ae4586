#include "savir/train/run_config.hpp"

#include <cstdio>
#include <sstream>

#include "savir/error.hpp"

namespace savir::train {

void RunConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  model.validate();
}

std::string RunConfig::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "dataset = " << dataset.generic_string() << "\n"
     << "epochs = " << epochs << "\n"
     << "batch_size = " << batch_size << "\n"
     << "learning_rate = " << learning_rate << "\n"
     << "adam_beta1 = " << adam_beta1 << "\n"
     << "adam_beta2 = " << adam_beta2 << "\n"
     << "adam_epsilon = " << adam_epsilon << "\n"
     << "row_col_shuffle = " << row_col_shuffle << "\n"
     << "choice_shuffle = " << choice_shuffle << "\n"
     << "seed = " << seed << "\n"
     << "train_limit = " << train_limit << "\n"
     << "model = " << model.to_json() << "\n";
  return os.str();
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : describe()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace savir::train
