#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "savir/model/savirt.hpp"

namespace savir::model {

struct GradCheckOptions {
  double epsilon = 1e-5;
  int samples_per_tensor = 1;  // entries probed in every parameter tensor
  int min_probes = 20;         // extra random entries are drawn until reached
  double denominator_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradProbe {
  std::string path;  // "name[row,col]"
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradProbe> probes;
  double max_relative_error = 0.0;
  std::string worst_path;

  /// Empty when every probe is within tolerance, else a message naming the
  /// worst parameter entry.
  std::string failure(double tolerance) const;
};

/// Compares backprop against central differences of the cross-entropy loss,
/// with dropout off. Leaves the model's parameter values unchanged.
GradCheckReport grad_check(SavirModel<double>& model, std::span<const std::uint8_t> pixels, int label,
                           const GradCheckOptions& options = {});

}  // namespace savir::model
