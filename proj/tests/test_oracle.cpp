#include <doctest.h>

#include "savir/oracle/oracle.hpp"
#include "savir/rpm/generator.hpp"

using namespace savir::rpm;
using namespace savir::oracle;

namespace {

// Center puzzle from (type, size, color) triples per context slot plus choices.
PuzzleSymbolic center_puzzle(const std::array<std::array<int, 3>, 8>& context,
                             const std::array<std::array<int, 3>, 8>& choices, int correct) {
  PuzzleSymbolic p;
  p.layout = Layout::Center;
  for (std::size_t i = 0; i < 8; ++i) {
    p.context[i] = make_panel(Layout::Center, 1, context[i][0], context[i][1], context[i][2]);
    p.choices[i] = make_panel(Layout::Center, 1, choices[i][0], choices[i][1], choices[i][2]);
  }
  p.correct_index = correct;
  return p;
}

GeneratorConfig config_for(Layout layout, DistractorMode mode) {
  GeneratorConfig c;
  c.layout = layout;
  c.mode = mode;
  return c;
}

}  // namespace

TEST_CASE("induce_rules keeps progression and drops constant for stepped sizes") {
  // sizes (2,3,4) then (1,2,3); type and color constant
  const auto p = center_puzzle({{{0, 2, 5}, {0, 3, 5}, {0, 4, 5}, {0, 1, 5}, {0, 2, 5}, {0, 3, 5}, {0, 0, 5}, {0, 1, 5}}},
                               {{{0, 2, 5}, {0, 3, 5}, {1, 2, 5}, {0, 2, 6}, {0, 4, 5}, {2, 2, 5}, {0, 2, 7}, {3, 2, 5}}}, 0);
  const auto h = induce_rules(p);
  CHECK(h.contains({RuleKind::Progression, AttrKind::Size, 1, {}}));
  CHECK_FALSE(h.contains({RuleKind::Constant, AttrKind::Size, 0, {}}));
  const Solution s = solve(p);
  CHECK(s.predicted == 0);
  CHECK_FALSE(s.tie);
}

TEST_CASE("identical rows keep constant on every attribute") {
  std::array<std::array<int, 3>, 8> ctx;
  ctx.fill({3, 2, 4});
  std::array<std::array<int, 3>, 8> ch;
  ch.fill({3, 2, 4});
  const auto p = center_puzzle(ctx, ch, 0);
  const auto h = induce_rules(p);
  for (AttrKind k : kAllAttrKinds) CHECK(h.contains({RuleKind::Constant, k, 0, {}}));
}

TEST_CASE("duplicated answer among choices raises the tie flag") {
  auto p = sample_puzzle(config_for(Layout::Center, DistractorMode::IRaven), 5);
  const int other = (p.correct_index + 1) % 8;
  p.choices[static_cast<std::size_t>(other)] = p.choices[static_cast<std::size_t>(p.correct_index)];
  const Solution s = solve(p);
  CHECK(s.tie);
  CHECK_FALSE(validate_puzzle(p));
}

TEST_CASE("constructed fixture: only the answer satisfies any hypothesis") {
  // Rows: type distribute_three {0,1,2}, size progression +1, color constant.
  // Every wrong choice breaks all three attributes of the third row.
  const auto p = center_puzzle({{{0, 0, 3}, {1, 1, 3}, {2, 2, 3}, {1, 1, 7}, {2, 2, 7}, {0, 3, 7}, {2, 2, 1}, {0, 3, 1}}},
                               {{{4, 0, 9}, {3, 1, 8}, {1, 4, 1}, {4, 5, 0}, {3, 0, 2}, {4, 1, 6}, {3, 5, 5}, {4, 2, 4}}}, 2);
  const Solution s = solve(p);
  CHECK(s.predicted == 2);
  CHECK_FALSE(s.tie);
  int runner_up = 0;
  for (int a = 0; a < 8; ++a) {
    if (a != 2) runner_up = std::max(runner_up, s.scores[static_cast<std::size_t>(a)]);
  }
  CHECK(s.scores[2] - runner_up >= 1);
}

TEST_CASE("oracle agrees with every generated label and recovers the generating rules") {
  for (Layout layout : {Layout::Center, Layout::Grid2x2}) {
    for (DistractorMode mode : {DistractorMode::Raven, DistractorMode::IRaven}) {
      for (const auto& p : sample_puzzles(config_for(layout, mode), 77, 1000)) {
        const auto h = induce_rules(p);
        CHECK(h.size() > 0);
        for (const auto& rule : p.rules) CHECK(h.contains(rule));
        const Solution s = solve(p, h);
        CHECK(s.predicted == p.correct_index);
        CHECK_FALSE(s.tie);
      }
    }
  }
}

TEST_CASE("replacing the answer with a distractor fails validation") {
  auto p = sample_puzzle(config_for(Layout::Grid2x2, DistractorMode::Raven), 8);
  REQUIRE(validate_puzzle(p));
  p.correct_index = (p.correct_index + 3) % 8;
  CHECK_FALSE(validate_puzzle(p));
}

TEST_CASE("a larger grammar never lowers the answer's score") {
  auto grammar = full_grammar();
  std::vector<GrammarEntry> reduced;
  for (const auto& g : grammar) {
    if (g.rule != RuleKind::Progression) reduced.push_back(g);
  }
  for (const auto& p : sample_puzzles(config_for(Layout::Center, DistractorMode::IRaven), 4, 300)) {
    const int full = score_choice(p, induce_rules(p, grammar), p.correct_index);
    const int part = score_choice(p, induce_rules(p, reduced), p.correct_index);
    CHECK(full >= part);
  }
}
