#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "savir/rpm/types.hpp"

namespace savir::rpm {

/// A rule pinned to an attribute. Without a parameter one is drawn from the
/// grammar.
struct RuleChoice {
  RuleKind rule = RuleKind::Constant;
  std::optional<int> parameter;
};

/// Which rules the generator may draw. Pinned entries override `allowed` for
/// their attribute.
struct RulePalette {
  std::vector<RuleKind> allowed = {kAllRuleKinds.begin(), kAllRuleKinds.end()};
  std::map<AttrKind, RuleChoice> pinned;
};

struct GeneratorConfig {
  Layout layout = Layout::Center;
  RulePalette palette;
  DistractorMode mode = DistractorMode::IRaven;
  bool column_rules = false;
};

/// Context plus the answer panel, before distractors are attached.
struct PuzzleBase {
  Layout layout = Layout::Center;
  std::array<PanelSymbolic, 8> context;
  PanelSymbolic answer;
  std::vector<RuleInstance> rules;
  bool column_rules = false;
};

struct ChoiceSet {
  std::array<PanelSymbolic, 8> choices;
  int correct_index = 0;
};

inline constexpr int kResampleBudget = 1000;

/// Samples rules and a 3x3 matrix satisfying them. Constant attributes take a
/// single value for the whole matrix; other rules draw fresh values per line
/// and rejection-resample lines that leave the attribute domain.
/// Throws GenerationError naming the rule when the budget runs out.
PuzzleBase sample_base(const GeneratorConfig& config, std::uint64_t seed);

/// RAVEN mode: each distractor changes exactly one attribute of the answer.
/// IRAVEN mode: choices are the answer shifted by the codewords of a
/// translation-invariant code over three attributes, so every distractor
/// differs in at least two attributes and no attribute value is a unique mode.
ChoiceSet gen_distractors(const PuzzleBase& base, DistractorMode mode, std::uint64_t seed);

/// Full pipeline: rules, matrix, distractors, then oracle validation. Draws
/// that fail validation are resampled from a derived seed.
PuzzleSymbolic sample_puzzle(const GeneratorConfig& config, std::uint64_t seed);

/// `count` puzzles whose seeds are derived from `seed`.
std::vector<PuzzleSymbolic> sample_puzzles(const GeneratorConfig& config, std::uint64_t seed, std::size_t count);

}  // namespace savir::rpm
