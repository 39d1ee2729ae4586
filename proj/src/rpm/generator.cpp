#include "savir/rpm/generator.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <string>

#include "savir/error.hpp"
#include "savir/oracle/oracle.hpp"
#include "savir/rng.hpp"
#include "savir/rpm/rules.hpp"

namespace savir::rpm {

namespace {

// values[line][slot]; line is a row (or a column for column-rule puzzles).
using ValueGrid = std::array<std::array<int, 3>, 3>;

std::string describe(const RuleInstance& r) {
  std::string s = std::string(to_string(r.rule)) + " on " + std::string(to_string(r.attribute));
  if (r.rule != RuleKind::Constant) s += " (parameter " + std::to_string(r.parameter) + ")";
  return s;
}

[[noreturn]] void budget_exhausted(const RuleInstance& r) {
  throw GenerationError("resample budget of " + std::to_string(kResampleBudget) + " exhausted for rule " +
                        describe(r));
}

bool scalar_feasible(RuleKind rule, int parameter, Domain d) {
  const int width = d.hi - d.lo;
  switch (rule) {
    case RuleKind::Constant: return true;
    case RuleKind::Progression: return std::abs(2 * parameter) <= width;
    case RuleKind::Arithmetic: {
      const int min_b = std::max(d.lo, 1);
      return parameter > 0 ? d.lo + min_b <= d.hi : d.hi - min_b >= d.lo;
    }
    case RuleKind::DistributeThree: return width >= 2;
  }
  return false;
}

int random_parameter(RuleKind rule, Rng& rng) {
  const auto params = rule_parameters(rule);
  return params[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(params.size()) - 1))];
}

// Fills each line of `grid` by rejection sampling; `draw` writes one
// candidate line and returns whether it is in-domain.
template <typename Draw>
void sample_lines(ValueGrid& grid, const RuleInstance& rule, Draw&& draw) {
  for (auto& line : grid) {
    int attempt = 0;
    while (!draw(line)) {
      if (++attempt >= kResampleBudget) budget_exhausted(rule);
    }
  }
}

std::array<int, 3> distribute_order(const std::array<int, 3>& base, int shift, int line) {
  std::array<int, 3> out;
  for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(j)] = base[static_cast<std::size_t>((j + line * shift) % 3)];
  return out;
}

ValueGrid sample_scalar(RuleInstance& rule, Domain d, Rng& rng) {
  ValueGrid grid{};
  switch (rule.rule) {
    case RuleKind::Constant: {
      const int v = rng.uniform_int(d.lo, d.hi);
      for (auto& line : grid) line.fill(v);
      break;
    }
    case RuleKind::Progression: {
      const int step = rule.parameter;
      sample_lines(grid, rule, [&](std::array<int, 3>& line) {
        const int start = rng.uniform_int(d.lo, d.hi);
        line = {start, start + step, start + 2 * step};
        return line[2] >= d.lo && line[2] <= d.hi;
      });
      break;
    }
    case RuleKind::Arithmetic: {
      const int min_b = std::max(d.lo, 1);
      if (min_b > d.hi) budget_exhausted(rule);
      sample_lines(grid, rule, [&](std::array<int, 3>& line) {
        const int a = rng.uniform_int(d.lo, d.hi);
        const int b = rng.uniform_int(min_b, d.hi);
        line = {a, b, a + (rule.parameter > 0 ? b : -b)};
        return line[2] >= d.lo && line[2] <= d.hi;
      });
      break;
    }
    case RuleKind::DistributeThree: {
      if (d.hi - d.lo < 2) budget_exhausted(rule);
      std::vector<int> values(static_cast<std::size_t>(d.hi - d.lo + 1));
      std::iota(values.begin(), values.end(), d.lo);
      rng.shuffle(std::span(values));
      const std::array<int, 3> base = {values[0], values[1], values[2]};
      for (int i = 0; i < 3; ++i) grid[static_cast<std::size_t>(i)] = distribute_order(base, rule.parameter, i);
      rule.value_set = base;
      std::ranges::sort(rule.value_set);
      break;
    }
  }
  return grid;
}

std::vector<int> cells_of(std::uint32_t mask, int cells) {
  std::vector<int> out;
  for (int c = 0; c < cells; ++c) {
    if (mask & (1u << c)) out.push_back(c);
  }
  return out;
}

// Random mask with `count` cells chosen from `pool`.
std::uint32_t random_subset(std::uint32_t pool, int count, int cells, Rng& rng) {
  auto free_cells = cells_of(pool, cells);
  rng.shuffle(std::span(free_cells));
  std::uint32_t mask = 0;
  for (int i = 0; i < count; ++i) mask |= 1u << free_cells[static_cast<std::size_t>(i)];
  return mask;
}

int binomial(int n, int k) {
  int r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<RuleKind> position_rules_for(RuleKind number_rule) {
  if (number_rule == RuleKind::Constant) return {RuleKind::Constant, RuleKind::DistributeThree};
  return {number_rule};
}

// Position masks consistent with an already sampled number grid.
// Returns false when the counts admit no masks (only possible for
// distribute_three under a constant count).
bool sample_positions(RuleInstance& rule, const RuleInstance& number_rule, const ValueGrid& counts, int cells,
                      ValueGrid& masks, Rng& rng) {
  const auto all = static_cast<std::uint32_t>((1u << cells) - 1);
  switch (rule.rule) {
    case RuleKind::Constant: {
      const int m = static_cast<int>(random_subset(all, counts[0][0], cells, rng));
      for (auto& line : masks) line.fill(m);
      return true;
    }
    case RuleKind::DistributeThree: {
      std::array<int, 3> base{};
      if (number_rule.rule == RuleKind::Constant) {
        const int n = counts[0][0];
        if (binomial(cells, n) < 3) return false;
        std::vector<std::uint32_t> chosen;
        while (chosen.size() < 3) {
          const auto m = random_subset(all, n, cells, rng);
          if (std::ranges::find(chosen, m) == chosen.end()) chosen.push_back(m);
        }
        for (int i = 0; i < 3; ++i) base[static_cast<std::size_t>(i)] = static_cast<int>(chosen[static_cast<std::size_t>(i)]);
        for (int i = 0; i < 3; ++i) masks[static_cast<std::size_t>(i)] = distribute_order(base, rule.parameter, i);
      } else {
        // One mask per distinct count; placement follows the number grid.
        std::array<std::uint32_t, 3> by_count{};
        for (int i = 0; i < 3; ++i) {
          by_count[static_cast<std::size_t>(i)] = random_subset(all, counts[0][static_cast<std::size_t>(i)], cells, rng);
          base[static_cast<std::size_t>(i)] = static_cast<int>(by_count[static_cast<std::size_t>(i)]);
        }
        for (int l = 0; l < 3; ++l) {
          for (int s = 0; s < 3; ++s) {
            const int n = counts[static_cast<std::size_t>(l)][static_cast<std::size_t>(s)];
            for (int i = 0; i < 3; ++i) {
              if (counts[0][static_cast<std::size_t>(i)] == n) {
                masks[static_cast<std::size_t>(l)][static_cast<std::size_t>(s)] = base[static_cast<std::size_t>(i)];
              }
            }
          }
        }
      }
      rule.value_set = base;
      std::ranges::sort(rule.value_set);
      return true;
    }
    case RuleKind::Progression: {
      for (int l = 0; l < 3; ++l) {
        const auto& n = counts[static_cast<std::size_t>(l)];
        auto& line = masks[static_cast<std::size_t>(l)];
        const int step = std::abs(rule.parameter);
        if (rule.parameter > 0) {
          auto m = random_subset(all, n[0], cells, rng);
          line[0] = static_cast<int>(m);
          for (int s = 1; s < 3; ++s) {
            m |= random_subset(all & ~m, step, cells, rng);
            line[static_cast<std::size_t>(s)] = static_cast<int>(m);
          }
        } else {
          auto m = random_subset(all, n[2], cells, rng);
          line[2] = static_cast<int>(m);
          for (int s = 1; s >= 0; --s) {
            m |= random_subset(all & ~m, step, cells, rng);
            line[static_cast<std::size_t>(s)] = static_cast<int>(m);
          }
        }
      }
      return true;
    }
    case RuleKind::Arithmetic: {
      for (int l = 0; l < 3; ++l) {
        const auto& n = counts[static_cast<std::size_t>(l)];
        const auto m1 = random_subset(all, n[0], cells, rng);
        const auto m2 = rule.parameter > 0 ? random_subset(all & ~m1, n[1], cells, rng)
                                           : random_subset(m1, n[1], cells, rng);
        const auto m3 = rule.parameter > 0 ? (m1 | m2) : (m1 & ~m2);
        masks[static_cast<std::size_t>(l)] = {static_cast<int>(m1), static_cast<int>(m2), static_cast<int>(m3)};
      }
      return true;
    }
  }
  return false;
}

RuleInstance choose_rule(AttrKind kind, const RulePalette& palette, const std::vector<RuleKind>& compatible,
                         Domain domain, bool check_scalar, Rng& rng) {
  if (auto it = palette.pinned.find(kind); it != palette.pinned.end()) {
    RuleInstance r{it->second.rule, kind, 0, {}};
    r.parameter = it->second.parameter ? *it->second.parameter : random_parameter(r.rule, rng);
    if (r.rule == RuleKind::Constant) r.parameter = 0;
    if (!rule_supported(r.rule, kind)) {
      throw InvalidRuleError("rule " + describe(r) + " is not supported");
    }
    if (std::ranges::find(compatible, r.rule) == compatible.end()) {
      throw GenerationError("pinned rule " + describe(r) + " cannot be realized under this layout");
    }
    return r;
  }
  std::vector<RuleInstance> candidates;
  for (RuleKind rule : palette.allowed) {
    if (!rule_supported(rule, kind) || std::ranges::find(compatible, rule) == compatible.end()) continue;
    if (rule == RuleKind::Constant) {
      candidates.push_back({rule, kind, 0, {}});
      continue;
    }
    for (int p : rule_parameters(rule)) {
      if (check_scalar && !scalar_feasible(rule, p, domain)) continue;
      candidates.push_back({rule, kind, p, {}});
    }
  }
  if (candidates.empty()) {
    throw GenerationError("rule palette admits no rule for attribute " + std::string(to_string(kind)));
  }
  // Uniform over rule kinds first, then over that kind's parameters.
  std::vector<RuleKind> kinds;
  for (const auto& c : candidates) {
    if (std::ranges::find(kinds, c.rule) == kinds.end()) kinds.push_back(c.rule);
  }
  const RuleKind picked = kinds[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(kinds.size()) - 1))];
  std::vector<RuleInstance> of_kind;
  for (const auto& c : candidates) {
    if (c.rule == picked) of_kind.push_back(c);
  }
  return of_kind[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(of_kind.size()) - 1))];
}

std::vector<int> alternatives(const PanelSymbolic& answer, AttrKind kind) {
  std::vector<int> out;
  const int current = answer.attribute(kind);
  if (kind == AttrKind::Number) return out;
  if (kind == AttrKind::Position) {
    const int cells = cell_count(answer.layout);
    const int n = static_cast<int>(answer.objects.size());
    for (int m = 1; m < (1 << cells); ++m) {
      if (std::popcount(static_cast<unsigned>(m)) == n && m != current) out.push_back(m);
    }
    return out;
  }
  const Domain d = attr_domain(kind, answer.layout);
  for (int v = d.lo; v <= d.hi; ++v) {
    if (v != current) out.push_back(v);
  }
  return out;
}

ChoiceSet raven_choices(const PanelSymbolic& answer, Rng& rng) {
  std::vector<std::pair<AttrKind, std::vector<int>>> pool;
  for (AttrKind k : kAllAttrKinds) {
    auto alts = alternatives(answer, k);
    if (!alts.empty()) pool.emplace_back(k, std::move(alts));
  }
  std::size_t capacity = 0;
  for (const auto& [k, alts] : pool) capacity += alts.size();
  if (capacity < 7) throw GenerationError("attribute domains too small for 7 single-attribute distractors");

  std::vector<PanelSymbolic> distractors;
  int attempt = 0;
  while (distractors.size() < 7) {
    if (++attempt > kResampleBudget) throw GenerationError("resample budget exhausted drawing RAVEN distractors");
    const auto& [kind, alts] = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
    const int value = alts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(alts.size()) - 1))];
    PanelSymbolic d = with_attribute(answer, kind, value);
    if (std::ranges::find(distractors, d) == distractors.end()) distractors.push_back(std::move(d));
  }
  ChoiceSet out;
  out.correct_index = rng.uniform_int(0, 7);
  std::size_t next = 0;
  for (int slot = 0; slot < 8; ++slot) {
    out.choices[static_cast<std::size_t>(slot)] = slot == out.correct_index ? answer : distractors[next++];
  }
  return out;
}

ChoiceSet iraven_choices(const PanelSymbolic& answer, Rng& rng) {
  // Coordinates (a, b, c) = (x, y, x + 2y mod 4), x in Z4, y in Z2. This is a
  // group code with minimum distance 2, so every codeword sees the same
  // neighbourhood and each coordinate value occurs equally often.
  std::vector<std::pair<AttrKind, std::vector<int>>> pool;
  for (AttrKind k : kAllAttrKinds) {
    auto alts = alternatives(answer, k);
    if (!alts.empty()) pool.emplace_back(k, std::move(alts));
  }
  rng.shuffle(std::span(pool));
  int a = -1, b = -1, c = -1;
  const int n = static_cast<int>(pool.size());
  for (int i = 0; i < n && a < 0; ++i) {
    for (int j = 0; j < n && a < 0; ++j) {
      for (int k = 0; k < n && a < 0; ++k) {
        if (i == j || i == k || j == k) continue;
        if (pool[static_cast<std::size_t>(i)].second.size() >= 3 && pool[static_cast<std::size_t>(k)].second.size() >= 3 &&
            !pool[static_cast<std::size_t>(j)].second.empty()) {
          a = i, b = j, c = k;
        }
      }
    }
  }
  if (a < 0) throw GenerationError("attribute domains too small for IRAVEN distractors");

  auto labels = [&](int index, int count) {
    auto alts = pool[static_cast<std::size_t>(index)].second;
    rng.shuffle(std::span(alts));
    std::vector<int> out = {answer.attribute(pool[static_cast<std::size_t>(index)].first)};
    out.insert(out.end(), alts.begin(), alts.begin() + (count - 1));
    return out;
  };
  const auto la = labels(a, 4), lb = labels(b, 2), lc = labels(c, 4);

  std::array<std::array<int, 3>, 8> codewords{};
  for (int x = 0; x < 4; ++x) {
    for (int y = 0; y < 2; ++y) codewords[static_cast<std::size_t>(x * 2 + y)] = {x, y, (x + 2 * y) % 4};
  }
  rng.shuffle(std::span(codewords));

  ChoiceSet out;
  for (int slot = 0; slot < 8; ++slot) {
    const auto& w = codewords[static_cast<std::size_t>(slot)];
    PanelSymbolic p = answer;
    p = with_attribute(p, pool[static_cast<std::size_t>(a)].first, la[static_cast<std::size_t>(w[0])]);
    p = with_attribute(p, pool[static_cast<std::size_t>(b)].first, lb[static_cast<std::size_t>(w[1])]);
    p = with_attribute(p, pool[static_cast<std::size_t>(c)].first, lc[static_cast<std::size_t>(w[2])]);
    out.choices[static_cast<std::size_t>(slot)] = std::move(p);
    if (w == std::array<int, 3>{0, 0, 0}) out.correct_index = slot;
  }
  return out;
}

}  // namespace

PuzzleBase sample_base(const GeneratorConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const Layout layout = config.layout;
  const int cells = cell_count(layout);
  std::array<RuleInstance, kNumAttrKinds> rules{};
  std::array<ValueGrid, kNumAttrKinds> grids{};

  for (AttrKind k : {AttrKind::Type, AttrKind::Size, AttrKind::Color}) {
    const Domain d = attr_domain(k, layout);
    const std::vector<RuleKind> any(kAllRuleKinds.begin(), kAllRuleKinds.end());
    RuleInstance r = choose_rule(k, config.palette, any, d, true, rng);
    grids[static_cast<std::size_t>(k)] = sample_scalar(r, d, rng);
    rules[static_cast<std::size_t>(k)] = r;
  }

  const auto number_index = static_cast<std::size_t>(AttrKind::Number);
  const auto position_index = static_cast<std::size_t>(AttrKind::Position);
  if (layout == Layout::Center) {
    // A single cell: count and position are fixed, so only constant applies.
    const std::vector<RuleKind> constant_only = {RuleKind::Constant};
    RulePalette fixed = config.palette;
    fixed.allowed = constant_only;
    for (AttrKind k : {AttrKind::Number, AttrKind::Position}) {
      RuleInstance r = choose_rule(k, fixed, constant_only, attr_domain(k, layout), false, rng);
      rules[static_cast<std::size_t>(k)] = r;
      for (auto& line : grids[static_cast<std::size_t>(k)]) line.fill(1);
    }
  } else {
    const Domain nd = attr_domain(AttrKind::Number, layout);
    const std::vector<RuleKind> any(kAllRuleKinds.begin(), kAllRuleKinds.end());
    RuleInstance number_rule = choose_rule(AttrKind::Number, config.palette, any, nd, true, rng);
    RuleInstance position_rule =
        choose_rule(AttrKind::Position, config.palette, position_rules_for(number_rule.rule), {}, false, rng);
    if (position_rule.rule == RuleKind::Progression || position_rule.rule == RuleKind::Arithmetic ||
        (position_rule.rule == RuleKind::DistributeThree && number_rule.rule == RuleKind::DistributeThree)) {
      position_rule.parameter = number_rule.parameter;
    }
    int attempt = 0;
    while (true) {
      RuleInstance nr = number_rule;
      grids[number_index] = sample_scalar(nr, nd, rng);
      RuleInstance pr = position_rule;
      if (sample_positions(pr, nr, grids[number_index], cells, grids[position_index], rng)) {
        rules[number_index] = nr;
        rules[position_index] = pr;
        break;
      }
      if (++attempt >= kResampleBudget) budget_exhausted(position_rule);
    }
  }

  auto value_at = [&](AttrKind k, int row, int col) {
    const auto& g = grids[static_cast<std::size_t>(k)];
    return config.column_rules ? g[static_cast<std::size_t>(col)][static_cast<std::size_t>(row)]
                               : g[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
  };
  auto panel_at = [&](int row, int col) {
    return make_panel(layout, static_cast<std::uint32_t>(value_at(AttrKind::Position, row, col)),
                      value_at(AttrKind::Type, row, col), value_at(AttrKind::Size, row, col),
                      value_at(AttrKind::Color, row, col));
  };

  PuzzleBase base;
  base.layout = layout;
  base.column_rules = config.column_rules;
  for (int i = 0; i < 8; ++i) base.context[static_cast<std::size_t>(i)] = panel_at(i / 3, i % 3);
  base.answer = panel_at(2, 2);
  base.rules.assign(rules.begin(), rules.end());
  return base;
}

ChoiceSet gen_distractors(const PuzzleBase& base, DistractorMode mode, std::uint64_t seed) {
  Rng rng(seed);
  return mode == DistractorMode::Raven ? raven_choices(base.answer, rng) : iraven_choices(base.answer, rng);
}

PuzzleSymbolic sample_puzzle(const GeneratorConfig& config, std::uint64_t seed) {
  for (int attempt = 0; attempt < kResampleBudget; ++attempt) {
    const std::uint64_t sub = mix_seed(seed, static_cast<std::uint64_t>(attempt));
    PuzzleBase base = sample_base(config, sub);
    ChoiceSet cs = gen_distractors(base, config.mode, mix_seed(sub, 0xD157));
    PuzzleSymbolic p;
    p.layout = base.layout;
    p.context = std::move(base.context);
    p.choices = std::move(cs.choices);
    p.correct_index = cs.correct_index;
    p.rules = std::move(base.rules);
    p.distractor_mode = config.mode;
    p.column_rules = config.column_rules;
    p.seed = seed;
    if (oracle::validate_puzzle(p)) return p;
  }
  throw GenerationError("no oracle-valid puzzle within the resample budget for seed " + std::to_string(seed));
}

std::vector<PuzzleSymbolic> sample_puzzles(const GeneratorConfig& config, std::uint64_t seed, std::size_t count) {
  std::vector<PuzzleSymbolic> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_puzzle(config, mix_seed(seed, 1000003 + i)));
  return out;
}

}  // namespace savir::rpm
