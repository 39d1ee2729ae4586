#pragma once

#include <array>
#include <span>

#include "savir/rpm/types.hpp"

namespace savir::rpm {

/// False only for (arithmetic, type): the shape list has no additive structure.
bool rule_supported(RuleKind rule, AttrKind attribute);

/// Parameters the rule grammar enumerates for a rule kind. distribute_three
/// takes its cyclic shift {1, 2}; its value set is bound separately.
std::span<const int> rule_parameters(RuleKind rule);

/// Checks a three-panel line (row or column) against a rule.
///
///   constant          v1 = v2 = v3
///   progression(s)    v2 = v1 + s, v3 = v2 + s; for position the masks form a
///                     nested chain whose popcount moves by s each step
///   arithmetic(+/-)   v3 = v1 +/- v2; for position, union / set difference
///   distribute_three  the triple is a permutation of rule.value_set, whose
///                     three values are distinct
///
/// Throws InvalidRuleError for unsupported pairings or mismatched kinds.
bool rule_holds(const RuleInstance& rule, const std::array<AttributeValue, 3>& triple);

}  // namespace savir::rpm
