#include "savir/oracle/oracle.hpp"

#include <algorithm>

#include "savir/rpm/rules.hpp"

namespace savir::oracle {

using rpm::AttrKind;
using rpm::AttributeValue;
using rpm::PuzzleSymbolic;
using rpm::RuleInstance;
using rpm::RuleKind;

std::vector<GrammarEntry> full_grammar() {
  std::vector<GrammarEntry> g;
  for (RuleKind r : rpm::kAllRuleKinds) {
    if (r == RuleKind::DistributeThree) {
      g.push_back({r, 0});
      continue;
    }
    for (int param : rpm::rule_parameters(r)) g.push_back({r, param});
  }
  return g;
}

std::size_t RuleHypothesisSet::size() const {
  std::size_t n = 0;
  for (const auto& v : per_attribute) n += v.size();
  return n;
}

bool RuleHypothesisSet::contains(const RuleInstance& rule) const {
  const auto& list = per_attribute[static_cast<std::size_t>(rule.attribute)];
  return std::ranges::any_of(list, [&](const RuleInstance& h) {
    if (h.rule != rule.rule) return false;
    if (h.rule == RuleKind::DistributeThree) {
      auto a = h.value_set, b = rule.value_set;
      std::ranges::sort(a);
      std::ranges::sort(b);
      return a == b;
    }
    return h.parameter == rule.parameter;
  });
}

std::array<AttributeValue, 3> line_values(const PuzzleSymbolic& p, AttrKind kind, int line, int choice) {
  std::array<AttributeValue, 3> out;
  for (int i = 0; i < 3; ++i) {
    const int row = p.column_rules ? i : line;
    const int col = p.column_rules ? line : i;
    out[static_cast<std::size_t>(i)] = {kind, p.cell(row, col, choice).attribute(kind)};
  }
  return out;
}

RuleHypothesisSet induce_rules(const PuzzleSymbolic& p) { return induce_rules(p, full_grammar()); }

RuleHypothesisSet induce_rules(const PuzzleSymbolic& p, const std::vector<GrammarEntry>& grammar) {
  RuleHypothesisSet out;
  for (AttrKind kind : rpm::kAllAttrKinds) {
    const auto line0 = line_values(p, kind, 0, 0);
    const auto line1 = line_values(p, kind, 1, 0);
    for (const GrammarEntry& entry : grammar) {
      if (!rpm::rule_supported(entry.rule, kind)) continue;
      RuleInstance h{entry.rule, kind, entry.parameter, {}};
      if (entry.rule == RuleKind::DistributeThree) {
        h.value_set = {line0[0].value, line0[1].value, line0[2].value};
        std::ranges::sort(h.value_set);
      }
      if (rpm::rule_holds(h, line0) && rpm::rule_holds(h, line1)) {
        out.per_attribute[static_cast<std::size_t>(kind)].push_back(h);
      }
    }
  }
  return out;
}

int score_choice(const PuzzleSymbolic& p, const RuleHypothesisSet& hypotheses, int choice) {
  int score = 0;
  for (AttrKind kind : rpm::kAllAttrKinds) {
    const auto& list = hypotheses.per_attribute[static_cast<std::size_t>(kind)];
    if (list.empty()) continue;
    const auto line2 = line_values(p, kind, 2, choice);
    for (const RuleInstance& h : list) {
      if (rpm::rule_holds(h, line2)) ++score;
    }
  }
  return score;
}

Solution solve(const PuzzleSymbolic& p) { return solve(p, induce_rules(p)); }

Solution solve(const PuzzleSymbolic& p, const RuleHypothesisSet& hypotheses) {
  Solution s;
  for (int a = 0; a < 8; ++a) s.scores[static_cast<std::size_t>(a)] = score_choice(p, hypotheses, a);
  const auto best = std::ranges::max_element(s.scores);
  s.predicted = static_cast<int>(best - s.scores.begin());
  s.tie = std::ranges::count(s.scores, *best) > 1;
  return s;
}

bool validate_puzzle(const PuzzleSymbolic& p) {
  for (const auto& panel : p.context) {
    if (panel.objects.empty()) return false;
  }
  for (const auto& panel : p.choices) {
    if (panel.objects.empty()) return false;
  }
  const Solution s = solve(p);
  return !s.tie && s.predicted == p.correct_index;
}

}  // namespace savir::oracle
