#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace savir::rpm {

// Attribute kinds in a fixed order; the order is used to index per-kind tables.
enum class AttrKind : std::uint8_t { Number = 0, Position = 1, Type = 2, Size = 3, Color = 4 };
inline constexpr int kNumAttrKinds = 5;
inline constexpr std::array<AttrKind, kNumAttrKinds> kAllAttrKinds = {
    AttrKind::Number, AttrKind::Position, AttrKind::Type, AttrKind::Size, AttrKind::Color};

enum class RuleKind : std::uint8_t { Constant = 0, Progression = 1, Arithmetic = 2, DistributeThree = 3 };
inline constexpr int kNumRuleKinds = 4;
inline constexpr std::array<RuleKind, kNumRuleKinds> kAllRuleKinds = {
    RuleKind::Constant, RuleKind::Progression, RuleKind::Arithmetic, RuleKind::DistributeThree};

enum class Layout : std::uint8_t { Center = 0, Grid2x2 = 1, Grid3x3 = 2 };

enum class DistractorMode : std::uint8_t { Raven = 0, IRaven = 1 };

// Shape list, indexed by the type attribute.
enum class Shape : std::uint8_t { Triangle = 0, Square = 1, Pentagon = 2, Hexagon = 3, Circle = 4 };

inline constexpr int kNumTypes = 5;
inline constexpr int kNumSizes = 6;
inline constexpr int kNumColors = 10;

std::string_view to_string(AttrKind k);
std::string_view to_string(RuleKind k);
std::string_view to_string(Layout l);
std::string_view to_string(DistractorMode m);

AttrKind parse_attr_kind(std::string_view s);
RuleKind parse_rule_kind(std::string_view s);
Layout parse_layout(std::string_view s);
DistractorMode parse_distractor_mode(std::string_view s);

/// Number of object cells for a layout (1, 4 or 9).
int cell_count(Layout l);

/// Closed integer domain of an attribute kind under a layout. Position values
/// are bitmasks over the layout's cells.
struct Domain {
  int lo = 0;
  int hi = 0;
};
Domain attr_domain(AttrKind k, Layout l);

struct AttributeValue {
  AttrKind kind = AttrKind::Number;
  int value = 0;

  friend bool operator==(const AttributeValue&, const AttributeValue&) = default;
};

/// True when the value lies in its kind's domain for the layout; position
/// masks additionally need a non-zero popcount.
bool in_domain(const AttributeValue& v, Layout l);

struct RuleInstance {
  RuleKind rule = RuleKind::Constant;
  AttrKind attribute = AttrKind::Number;
  // Progression step in {-2,-1,1,2}; arithmetic sign in {+1,-1};
  // distribute_three cyclic shift in {1,2}; 0 for constant.
  int parameter = 0;
  // distribute_three only: the designated three values, ascending.
  std::array<int, 3> value_set{};

  friend bool operator==(const RuleInstance&, const RuleInstance&) = default;
};

struct ObjectSymbolic {
  int cell = 0;
  int type = 0;
  int size = 0;
  int color = 0;

  friend bool operator==(const ObjectSymbolic&, const ObjectSymbolic&) = default;
};

struct PanelSymbolic {
  Layout layout = Layout::Center;
  std::vector<ObjectSymbolic> objects;  // sorted by cell

  friend bool operator==(const PanelSymbolic&, const PanelSymbolic&) = default;

  /// Attribute value of the panel. Type/size/color are shared by every
  /// object, so the first object's value is reported.
  int attribute(AttrKind k) const;
  std::uint32_t position_mask() const;
};

/// Builds a panel from panel-level attribute values. Objects occupy the cells
/// set in `position_mask` and share type, size and color.
PanelSymbolic make_panel(Layout layout, std::uint32_t position_mask, int type, int size, int color);

/// Returns `p` with one attribute replaced. Replacing Number is not supported
/// (the count follows from the position mask).
PanelSymbolic with_attribute(const PanelSymbolic& p, AttrKind k, int value);

/// Number of attribute kinds whose values differ between two panels.
int attribute_hamming(const PanelSymbolic& a, const PanelSymbolic& b);

/// Attribute kinds whose values differ between two panels.
std::vector<AttrKind> differing_attributes(const PanelSymbolic& a, const PanelSymbolic& b);

struct PuzzleSymbolic {
  Layout layout = Layout::Center;
  // Context panels in reading order; the missing (3,3) slot is absent.
  std::array<PanelSymbolic, 8> context;
  std::array<PanelSymbolic, 8> choices;
  int correct_index = 0;
  std::vector<RuleInstance> rules;  // one per attribute kind
  DistractorMode distractor_mode = DistractorMode::IRaven;
  bool column_rules = false;  // rules hold down columns instead of along rows
  std::uint64_t seed = 0;

  friend bool operator==(const PuzzleSymbolic&, const PuzzleSymbolic&) = default;

  /// Panel at (row, col) in 0..2 with the bottom-right slot filled by `choice`.
  const PanelSymbolic& cell(int row, int col, int choice) const;
};

}  // namespace savir::rpm
