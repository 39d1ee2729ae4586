#include "savir/rpm/types.hpp"

#include <algorithm>
#include <bit>

#include "savir/error.hpp"

namespace savir::rpm {

namespace {

constexpr std::array<std::string_view, kNumAttrKinds> kAttrNames = {"number", "position", "type", "size", "color"};
constexpr std::array<std::string_view, kNumRuleKinds> kRuleNames = {"constant", "progression", "arithmetic",
                                                                     "distribute_three"};
constexpr std::array<std::string_view, 3> kLayoutNames = {"center", "grid2x2", "grid3x3"};
constexpr std::array<std::string_view, 2> kModeNames = {"raven", "iraven"};

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names, std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(AttrKind k) { return kAttrNames[static_cast<int>(k)]; }
std::string_view to_string(RuleKind k) { return kRuleNames[static_cast<int>(k)]; }
std::string_view to_string(Layout l) { return kLayoutNames[static_cast<int>(l)]; }
std::string_view to_string(DistractorMode m) { return kModeNames[static_cast<int>(m)]; }

AttrKind parse_attr_kind(std::string_view s) { return parse_enum<AttrKind>(s, kAttrNames, "attribute"); }
RuleKind parse_rule_kind(std::string_view s) { return parse_enum<RuleKind>(s, kRuleNames, "rule"); }
Layout parse_layout(std::string_view s) { return parse_enum<Layout>(s, kLayoutNames, "layout"); }
DistractorMode parse_distractor_mode(std::string_view s) {
  return parse_enum<DistractorMode>(s, kModeNames, "distractor mode");
}

int cell_count(Layout l) {
  switch (l) {
    case Layout::Center: return 1;
    case Layout::Grid2x2: return 4;
    case Layout::Grid3x3: return 9;
  }
  return 1;
}

Domain attr_domain(AttrKind k, Layout l) {
  switch (k) {
    case AttrKind::Number: return {1, cell_count(l)};
    case AttrKind::Position: return {1, (1 << cell_count(l)) - 1};
    case AttrKind::Type: return {0, kNumTypes - 1};
    case AttrKind::Size: return {0, kNumSizes - 1};
    case AttrKind::Color: return {0, kNumColors - 1};
  }
  return {0, 0};
}

bool in_domain(const AttributeValue& v, Layout l) {
  const Domain d = attr_domain(v.kind, l);
  return v.value >= d.lo && v.value <= d.hi;
}

int PanelSymbolic::attribute(AttrKind k) const {
  switch (k) {
    case AttrKind::Number: return static_cast<int>(objects.size());
    case AttrKind::Position: return static_cast<int>(position_mask());
    case AttrKind::Type: return objects.empty() ? -1 : objects.front().type;
    case AttrKind::Size: return objects.empty() ? -1 : objects.front().size;
    case AttrKind::Color: return objects.empty() ? -1 : objects.front().color;
  }
  return -1;
}

std::uint32_t PanelSymbolic::position_mask() const {
  std::uint32_t mask = 0;
  for (const auto& o : objects) mask |= 1u << o.cell;
  return mask;
}

PanelSymbolic make_panel(Layout layout, std::uint32_t position_mask, int type, int size, int color) {
  PanelSymbolic p;
  p.layout = layout;
  for (int c = 0; c < cell_count(layout); ++c) {
    if (position_mask & (1u << c)) p.objects.push_back({c, type, size, color});
  }
  return p;
}

PanelSymbolic with_attribute(const PanelSymbolic& p, AttrKind k, int value) {
  const int type = p.attribute(AttrKind::Type);
  const int size = p.attribute(AttrKind::Size);
  const int color = p.attribute(AttrKind::Color);
  switch (k) {
    case AttrKind::Position: return make_panel(p.layout, static_cast<std::uint32_t>(value), type, size, color);
    case AttrKind::Type: return make_panel(p.layout, p.position_mask(), value, size, color);
    case AttrKind::Size: return make_panel(p.layout, p.position_mask(), type, value, color);
    case AttrKind::Color: return make_panel(p.layout, p.position_mask(), type, size, value);
    case AttrKind::Number: break;
  }
  throw InvalidRuleError("number cannot be replaced independently of position");
}

std::vector<AttrKind> differing_attributes(const PanelSymbolic& a, const PanelSymbolic& b) {
  std::vector<AttrKind> out;
  for (AttrKind k : kAllAttrKinds) {
    if (a.attribute(k) != b.attribute(k)) out.push_back(k);
  }
  return out;
}

int attribute_hamming(const PanelSymbolic& a, const PanelSymbolic& b) {
  return static_cast<int>(differing_attributes(a, b).size());
}

const PanelSymbolic& PuzzleSymbolic::cell(int row, int col, int choice) const {
  if (row == 2 && col == 2) return choices[static_cast<std::size_t>(choice)];
  return context[static_cast<std::size_t>(row * 3 + col)];
}

}  // namespace savir::rpm
