#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "savir/rpm/types.hpp"

// Brute-force symbolic solver. It reads the attribute payload of a puzzle,
// enumerates the finite rule grammar on the two complete lines, and scores
// every choice by how many of those hypotheses it keeps alive.
namespace savir::oracle {

/// One (rule, parameter) entry of the grammar. distribute_three carries no
/// parameter here: its value set is bound from the first line.
struct GrammarEntry {
  rpm::RuleKind rule;
  int parameter;
};

/// Every (rule, parameter) the generator can emit.
std::vector<GrammarEntry> full_grammar();

struct RuleHypothesisSet {
  std::array<std::vector<rpm::RuleInstance>, rpm::kNumAttrKinds> per_attribute;

  std::size_t size() const;
  /// Membership test that ignores the distribute_three cyclic shift (a
  /// permutation rule does not observe it).
  bool contains(const rpm::RuleInstance& rule) const;
};

/// Values of one attribute along line `line` (0..2) of the rule axis. Line 2
/// ends in choice `choice`.
std::array<rpm::AttributeValue, 3> line_values(const rpm::PuzzleSymbolic& p, rpm::AttrKind kind, int line, int choice);

RuleHypothesisSet induce_rules(const rpm::PuzzleSymbolic& p);
RuleHypothesisSet induce_rules(const rpm::PuzzleSymbolic& p, const std::vector<GrammarEntry>& grammar);

struct Solution {
  int predicted = 0;
  std::array<int, 8> scores{};
  bool tie = false;  // another choice shares the top score
};

/// Number of hypotheses that also hold on the completed third line.
int score_choice(const rpm::PuzzleSymbolic& p, const RuleHypothesisSet& hypotheses, int choice);

Solution solve(const rpm::PuzzleSymbolic& p);
Solution solve(const rpm::PuzzleSymbolic& p, const RuleHypothesisSet& hypotheses);

/// Tie-free and agreeing with the stored label.
bool validate_puzzle(const rpm::PuzzleSymbolic& p);

}  // namespace savir::oracle
