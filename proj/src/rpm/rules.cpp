#include "savir/rpm/rules.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "savir/error.hpp"

namespace savir::rpm {

namespace {

constexpr std::array<int, 1> kConstantParams = {0};
constexpr std::array<int, 4> kProgressionParams = {-2, -1, 1, 2};
constexpr std::array<int, 2> kArithmeticParams = {1, -1};
constexpr std::array<int, 2> kDistributeParams = {1, 2};

bool is_subset(std::uint32_t a, std::uint32_t b) { return (a & ~b) == 0; }

bool position_progression(int step, std::uint32_t v1, std::uint32_t v2, std::uint32_t v3) {
  const int n1 = std::popcount(v1), n2 = std::popcount(v2), n3 = std::popcount(v3);
  if (n2 != n1 + step || n3 != n2 + step) return false;
  if (step > 0) return is_subset(v1, v2) && is_subset(v2, v3);
  return is_subset(v2, v1) && is_subset(v3, v2);
}

}  // namespace

bool rule_supported(RuleKind rule, AttrKind attribute) {
  return !(rule == RuleKind::Arithmetic && attribute == AttrKind::Type);
}

std::span<const int> rule_parameters(RuleKind rule) {
  switch (rule) {
    case RuleKind::Constant: return kConstantParams;
    case RuleKind::Progression: return kProgressionParams;
    case RuleKind::Arithmetic: return kArithmeticParams;
    case RuleKind::DistributeThree: return kDistributeParams;
  }
  return {};
}

bool rule_holds(const RuleInstance& rule, const std::array<AttributeValue, 3>& triple) {
  if (!rule_supported(rule.rule, rule.attribute)) {
    throw InvalidRuleError("rule " + std::string(to_string(rule.rule)) + " is not defined on attribute " +
                           std::string(to_string(rule.attribute)));
  }
  for (const auto& v : triple) {
    if (v.kind != rule.attribute) {
      throw InvalidRuleError("value of kind " + std::string(to_string(v.kind)) + " checked against a rule on " +
                             std::string(to_string(rule.attribute)));
    }
  }
  const int v1 = triple[0].value, v2 = triple[1].value, v3 = triple[2].value;
  const bool position = rule.attribute == AttrKind::Position;

  switch (rule.rule) {
    case RuleKind::Constant: return v1 == v2 && v2 == v3;
    case RuleKind::Progression: {
      if (rule.parameter == 0) return false;
      if (position) {
        return position_progression(rule.parameter, static_cast<std::uint32_t>(v1), static_cast<std::uint32_t>(v2),
                                    static_cast<std::uint32_t>(v3));
      }
      return v2 == v1 + rule.parameter && v3 == v2 + rule.parameter;
    }
    case RuleKind::Arithmetic: {
      if (position) {
        const auto m1 = static_cast<std::uint32_t>(v1), m2 = static_cast<std::uint32_t>(v2);
        const auto m3 = static_cast<std::uint32_t>(v3);
        if (rule.parameter > 0) return m3 == (m1 | m2);
        return m3 == (m1 & ~m2);
      }
      return v3 == v1 + (rule.parameter > 0 ? v2 : -v2);
    }
    case RuleKind::DistributeThree: {
      const auto& set = rule.value_set;
      if (set[0] == set[1] || set[1] == set[2] || set[0] == set[2]) return false;
      std::array<int, 3> sorted = {v1, v2, v3};
      std::ranges::sort(sorted);
      std::array<int, 3> expected = set;
      std::ranges::sort(expected);
      return sorted == expected;
    }
  }
  return false;
}

}  // namespace savir::rpm
