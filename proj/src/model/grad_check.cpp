#include "savir/model/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace savir::model {

std::string GradCheckReport::failure(double tolerance) const {
  if (max_relative_error < tolerance) return {};
  std::ostringstream os;
  os << "gradient mismatch at " << worst_path << ": relative error " << max_relative_error << " exceeds " << tolerance;
  return os.str();
}

GradCheckReport grad_check(SavirModel<double>& model, std::span<const std::uint8_t> pixels, int label,
                           const GradCheckOptions& options) {
  model.zero_grad();
  ForwardTape<double> tape;
  const auto scores = model.forward(pixels, tape);
  model.backward(tape, cross_entropy_grad(scores, label));

  auto params = model.parameters();
  Rng rng(options.seed);
  std::vector<std::pair<std::size_t, Eigen::Index>> picks;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (int s = 0; s < options.samples_per_tensor; ++s) {
      picks.emplace_back(p, rng.uniform_int(0, static_cast<int>(params[p]->value.size()) - 1));
    }
  }
  while (static_cast<int>(picks.size()) < options.min_probes) {
    const auto p = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(params.size()) - 1));
    picks.emplace_back(p, rng.uniform_int(0, static_cast<int>(params[p]->value.size()) - 1));
  }

  auto loss = [&] { return cross_entropy(model.forward(pixels), label); };
  GradCheckReport report;
  for (const auto& [p, flat] : picks) {
    Param<double>& param = *params[p];
    const Eigen::Index row = flat / param.value.cols();
    const Eigen::Index col = flat % param.value.cols();
    const double original = param.value(row, col);
    param.value(row, col) = original + options.epsilon;
    const double up = loss();
    param.value(row, col) = original - options.epsilon;
    const double down = loss();
    param.value(row, col) = original;

    GradProbe probe;
    probe.path = param.name + "[" + std::to_string(row) + "," + std::to_string(col) + "]";
    probe.analytic = param.grad(row, col);
    probe.numeric = (up - down) / (2.0 * options.epsilon);
    const double scale = std::max({std::abs(probe.analytic), std::abs(probe.numeric), options.denominator_floor});
    probe.relative_error = std::abs(probe.analytic - probe.numeric) / scale;
    if (report.probes.empty() || probe.relative_error > report.max_relative_error) {
      report.max_relative_error = probe.relative_error;
      report.worst_path = probe.path;
    }
    report.probes.push_back(std::move(probe));
  }
  return report;
}

}  // namespace savir::model
