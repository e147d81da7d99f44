#include <gtest/gtest.h>

#include <random>

#include "spacetime/compare/compare.hpp"
#include "spacetime/compare/view.hpp"
#include "spacetime/replay/replay.hpp"
#include "spacetime/store/queries.hpp"
#include "support/fixtures.hpp"
#include "support/flappy_oracle.hpp"
#include "support/oracles.hpp"

using namespace spacetime;
using compare::StateRef;

namespace {

// Textbook LCS length, for checking diff_lines against.
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
  return t[a.size()][b.size()];
}

replay::ReplayRequest branch_request(store::Id session, std::int64_t from, double gravity) {
  replay::ReplayRequest r;
  r.mode = "from_step";
  r.session = session;
  r.from = from;
  r.plan.mocked = {"get_events", "rand_int"};
  r.plan.manual_globals["gravity"] = lang::Value(gravity);
  return r;
}

}  // namespace

TEST(DiffCode, IdentityMapsEveryLine) {
  std::string src = fx::demo("flappy.trk");
  auto m = compare::diff_code(src, src);
  auto n = compare::split_lines(src).size();
  ASSERT_EQ(m.pairs.size(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(m.pairs[i], (std::pair<int, int>(i + 1, i + 1)));
  EXPECT_TRUE(m.unmatched_a.empty());
  EXPECT_TRUE(m.unmatched_b.empty());
}

TEST(DiffCode, InsertShiftsLaterLines) {
  std::string a = fx::demo("binary_search.trk");
  std::string b = a;
  fx::replace(b, "    left = 0\n", "    left = 0\n    steps = 0\n");
  auto m = compare::diff_code(a, b);
  int inserted = 4;  // the new line's number in b
  EXPECT_EQ(m.unmatched_b, std::set<int>{inserted});
  EXPECT_TRUE(m.unmatched_a.empty());
  for (int l = 1; l <= static_cast<int>(compare::split_lines(a).size()); ++l)
    EXPECT_EQ(m.to_b(l), l < inserted ? l : l + 1) << l;
  EXPECT_EQ(m.to_a(inserted), std::nullopt);
}

TEST(DiffCode, GravityEditIsOneLine) {
  std::string a = fx::demo("flappy.trk");
  std::string b = a;
  fx::replace(b, "gravity = 0.6", "gravity = 0.9");
  auto m = compare::diff_code(a, b);
  auto lines = compare::split_lines(a);
  int edited = static_cast<int>(std::find(lines.begin(), lines.end(), "gravity = 0.6") - lines.begin()) + 1;
  EXPECT_EQ(m.unmatched_a, std::set<int>{edited});
  EXPECT_EQ(m.unmatched_b, std::set<int>{edited});
  EXPECT_EQ(m.pairs.size(), lines.size() - 1);
}

TEST(Property, LineMappingMonotoneInjectiveMaximal) {
  std::mt19937 rng(20261018);
  const std::vector<std::string> alphabet = {"x = 1", "y = 2", "return x", "pass", "", "    z = x"};
  for (int iter = 0; iter < 400; ++iter) {
    auto gen = [&] {
      std::vector<std::string> v(rng() % 25);
      for (auto& s : v) s = alphabet[rng() % alphabet.size()];
      return v;
    };
    auto a = gen(), b = gen();
    auto m = compare::diff_lines(a, b);
    ASSERT_EQ(m.pairs.size(), lcs_length(a, b));
    std::set<int> seen_a, seen_b;
    for (std::size_t i = 0; i < m.pairs.size(); ++i) {
      auto [la, lb] = m.pairs[i];
      ASSERT_EQ(a[la - 1], b[lb - 1]);
      if (i) {
        ASSERT_LT(m.pairs[i - 1].first, la);
        ASSERT_LT(m.pairs[i - 1].second, lb);
      }
      seen_a.insert(la);
      seen_b.insert(lb);
    }
    for (int l = 1; l <= static_cast<int>(a.size()); ++l) ASSERT_NE(seen_a.count(l), m.unmatched_a.count(l));
    for (int l = 1; l <= static_cast<int>(b.size()); ++l) ASSERT_NE(seen_b.count(l), m.unmatched_b.count(l));
  }
}

class FlappyCompare : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    store_ = store::Store::in_memory().release();
    auto r = fx::record_flappy(*store_);
    ASSERT_FALSE(r.run.failed()) << r.run.stats.error;
    original_ = r.run.session;

    replay::ReplayRequest faithful;
    faithful.mode = "full";
    faithful.session = original_;
    faithful.plan.mocked = {"get_events", "rand_int"};
    auto hooks = monitor::HookRegistry::with_builtins();
    faithful_ = replay::execute(*store_, faithful, hooks).session;
    branched_ = replay::execute(*store_, branch_request(original_, 223, 0.9), hooks).session;
  }
  static void TearDownTestSuite() { delete store_; }

  static store::Store* store_;
  static store::Id original_, faithful_, branched_;
};
store::Store* FlappyCompare::store_ = nullptr;
store::Id FlappyCompare::original_ = 0, FlappyCompare::faithful_ = 0, FlappyCompare::branched_ = 0;

TEST_F(FlappyCompare, FaithfulAlignmentHasNoGapsOrDiffs) {
  auto pairs = compare::align(*store_, {original_, {}, {}}, {faithful_, {}, {}});
  ASSERT_EQ(pairs.size(), 400u);
  for (const auto& p : pairs) {
    ASSERT_FALSE(p.gap());
    auto d = compare::compare_states(*store_, *p.a, *p.b);
    ASSERT_TRUE(d.empty()) << compare::format_diff(d);
  }
}

TEST_F(FlappyCompare, BranchChangesMatchPlainReexecution) {
  auto pairs = compare::align(*store_, {original_, 223, 399}, {branched_, {}, {}});
  ASSERT_EQ(pairs.size(), 177u);
  for (int k = 0; k < 3; ++k) {
    ASSERT_FALSE(pairs[k].gap());
    auto d = compare::compare_states(*store_, *pairs[k].a, *pairs[k].b);
    EXPECT_EQ(d.changed_names(), oracle::flappy_branch_changes(0.9, 223, 223 + k)) << "pair " << k;
    EXPECT_TRUE(d.added.empty());
    EXPECT_TRUE(d.removed.empty());
    EXPECT_TRUE(d.code_equal);
  }
  // Entry to the branch frame differs only in the overridden global; one
  // frame of different gravity later the bird has moved differently.
  EXPECT_EQ(compare::compare_states(*store_, *pairs[0].a, *pairs[0].b).changed_names(),
            std::set<std::string>{"gravity"});
  EXPECT_EQ(compare::compare_states(*store_, *pairs[1].a, *pairs[1].b).changed_names(),
            (std::set<std::string>{"gravity", "bird_y", "velocity"}));
}

TEST_F(FlappyCompare, ReflexiveAndSymmetric) {
  auto a = store_->calls(original_);
  auto b = store_->calls(branched_);
  for (std::size_t i = 0; i < a.size(); i += 37) {
    EXPECT_TRUE(compare::compare_states(*store_, StateRef::call(a[i].id), StateRef::call(a[i].id)).empty());
    const auto& other = b[i % b.size()];
    auto ab = compare::compare_states(*store_, StateRef::call(a[i].id), StateRef::call(other.id));
    auto ba = compare::compare_states(*store_, StateRef::call(other.id), StateRef::call(a[i].id));
    EXPECT_EQ(ab.added, ba.removed);
    EXPECT_EQ(ab.removed, ba.added);
    EXPECT_EQ(ab.changed_names(), ba.changed_names());
    for (std::size_t j = 0; j < ab.changed.size(); ++j) {
      EXPECT_EQ(ab.changed[j].hash_a, ba.changed[j].hash_b);
      EXPECT_EQ(ab.changed[j].hash_b, ba.changed[j].hash_a);
    }
    EXPECT_EQ(ab.events.size(), ba.events.size());
  }
}

TEST_F(FlappyCompare, ViewFacets) {
  auto call = store_->calls(original_).at(10);
  auto v = compare::view(*store_, StateRef::call(call.id));
  EXPECT_EQ(v.function, "display_game");
  EXPECT_EQ(v.ordinal, 10);
  EXPECT_EQ(v.granularity, "function");
  EXPECT_EQ(v.hook_kind, "scene");
  ASSERT_TRUE(v.return_value);
  std::set<std::string> names;
  for (const auto& var : v.variables) names.insert(var.name);
  for (const auto& n : oracle::flappy_state_names()) EXPECT_TRUE(names.count(n)) << n;
  auto plain = oracle::plain_flappy_state(std::nullopt, 0, 10);
  for (const auto& var : v.variables) {
    if (plain.count(var.name) && var.name != "pipes" && var.name != "clouds") {
      EXPECT_EQ(var.rendered, plain[var.name]) << var.name;
    }
  }
  ASSERT_FALSE(v.events.empty());
  EXPECT_EQ(v.events.front().callable, "get_events");
  EXPECT_NE(v.source.find("def display_game"), std::string::npos);
  auto j = compare::to_json(v);
  EXPECT_EQ(j["function"], "display_game");
}

TEST_F(FlappyCompare, EventsDifferWhenMocksRunDry) {
  // A call from the branch compared to an unrelated frame of the original:
  // their get_events sequences differ somewhere.
  auto a = store_->calls(original_).at(5);
  auto b = store_->calls(branched_).at(100);
  auto d = compare::compare_states(*store_, StateRef::call(a.id), StateRef::call(b.id));
  EXPECT_FALSE(d.empty());
  EXPECT_TRUE(d.changed_names().count("frame"));
}

TEST(Compare, KindMismatchIsRejected) {
  auto store = store::Store::in_memory();
  auto r = fx::record(*store, fx::demo("binary_search.trk"));
  auto call = store->calls(r.run.session).at(0);
  auto snap = store->snapshots(call.id).at(0);
  EXPECT_THROW(compare::compare_states(*store, StateRef::call(call.id), StateRef::snapshot(snap.id)),
               compare::CompareError);
  EXPECT_THROW(compare::compare_states(*store, StateRef::call(call.id), StateRef::call(9999)), std::exception);
}

TEST(Compare, CodeVersionDiff) {
  auto store = store::Store::in_memory();
  auto r = fx::record(*store, fx::demo("binary_search.trk"));
  auto call = store->calls(r.run.session).at(0);
  replay::ReplayRequest req;
  req.mode = "function";
  req.call = call.id;
  auto edit = lang::load_program(fx::demo("binary_search_edit.trk"));
  req.plan.code_override["binary_search"] = edit.function("binary_search").source_text;
  auto res = replay::execute(*store, req, monitor::HookRegistry::with_builtins());
  ASSERT_FALSE(res.failed()) << res.stats.error;
  auto other = store->calls(res.session).at(0);
  auto d = compare::compare_states(*store, StateRef::call(call.id), StateRef::call(other.id));
  EXPECT_FALSE(d.code_equal);
  EXPECT_EQ(d.code.unmatched_a, std::set<int>{12});
  EXPECT_EQ(d.code.unmatched_b, std::set<int>{12});
  ASSERT_TRUE(d.return_value);
  EXPECT_EQ(store::render_version(*store, call.return_value.value()), "-1");
  EXPECT_EQ(store::render_version(*store, other.return_value.value()), "-100");
}

// Two searches over the same list pair snapshot-by-snapshot: a pair is the
// k-th execution of a line in one call and the k-th execution of the same
// line in the other, pairs keep both orders, and every snapshot shows up
// exactly once. The shared prefix of the two reference traces always pairs.
TEST(Align, SnapshotsPairByLineOccurrence) {
  struct Case {
    std::vector<std::int64_t> items;
    std::int64_t ta, tb;
  };
  for (const auto& c : std::vector<Case>{{{1, 2, 3, 4, 5}, 6, 6},
                                         {{1, 2, 3, 4, 5}, 6, 3},
                                         {{1, 2, 3, 4, 5, 6, 7, 8, 9}, 1, 9},
                                         {{2, 4, 6, 8}, 5, 0}}) {
    auto store = store::Store::in_memory();
    auto src = [&](std::int64_t target) {
      std::string s = fx::demo("binary_search.trk");
      std::string list = "[";
      for (std::size_t i = 0; i < c.items.size(); ++i) list += (i ? ", " : "") + std::to_string(c.items[i]);
      fx::replace(s, "binary_search([1, 2, 3, 4, 5], 6)", "binary_search(" + list + "], " + std::to_string(target) + ")");
      return s;
    };
    auto a = fx::record(*store, src(c.ta)).run.session;
    auto b = fx::record(*store, src(c.tb)).run.session;
    auto ta = oracle::binary_search(c.items, c.ta);
    auto tb = oracle::binary_search(c.items, c.tb);
    std::size_t prefix = 0;
    while (prefix < ta.steps.size() && prefix < tb.steps.size() && ta.steps[prefix].line == tb.steps[prefix].line)
      ++prefix;
    std::size_t bound = 0;
    {
      std::map<int, std::size_t> na, nb;
      for (const auto& s : ta.steps) ++na[s.line];
      for (const auto& s : tb.steps) ++nb[s.line];
      for (const auto& [line, n] : na) bound += std::min(n, nb[line]);
    }

    auto pairs = compare::align(*store, {a, {}, {}}, {b, {}, {}});
    ASSERT_FALSE(pairs.empty());
    EXPECT_EQ(pairs[0].a->kind, compare::StateKind::Call);
    auto index = [&](store::Id call) {
      std::map<store::Id, std::pair<std::size_t, int>> pos;  // snapshot -> (order, occurrence)
      std::map<int, int> seen;
      auto snaps = store->snapshots(call);
      for (std::size_t i = 0; i < snaps.size(); ++i) pos[snaps[i].id] = {i, seen[snaps[i].line]++};
      return pos;
    };
    auto pa = index(pairs[0].a->id);
    auto pb = index(pairs[0].b->id);
    ASSERT_EQ(pa.size(), ta.steps.size());
    ASSERT_EQ(pb.size(), tb.steps.size());

    std::size_t matched = 0, seen_a = 0, seen_b = 0;
    std::optional<std::size_t> last_a, last_b;
    for (std::size_t i = 1; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      if (p.a) {
        ASSERT_TRUE(pa.count(p.a->id));
        if (last_a) { ASSERT_LT(*last_a, pa[p.a->id].first); }
        last_a = pa[p.a->id].first;
        ++seen_a;
      }
      if (p.b) {
        ASSERT_TRUE(pb.count(p.b->id));
        if (last_b) { ASSERT_LT(*last_b, pb[p.b->id].first); }
        last_b = pb[p.b->id].first;
        ++seen_b;
      }
      if (p.gap()) continue;
      ++matched;
      EXPECT_EQ(store->snapshot(p.a->id)->line, store->snapshot(p.b->id)->line);
      EXPECT_EQ(pa[p.a->id].second, pb[p.b->id].second);
    }
    EXPECT_EQ(seen_a, ta.steps.size());
    EXPECT_EQ(seen_b, tb.steps.size());
    EXPECT_GE(matched, prefix);
    EXPECT_LE(matched, bound);
    if (c.ta == c.tb) { EXPECT_EQ(matched, ta.steps.size()); }
  }
}

TEST(Align, UnequalWindowsLeaveTrailingGaps) {
  auto store = store::Store::in_memory();
  auto r = fx::record(*store, "@monitor()\ndef f(n):\n    return n * 2\n\ni = 0\nwhile i < 6:\n    f(i)\n    i = i + 1\n");
  auto pairs = compare::align(*store, {r.run.session, 0, 5}, {r.run.session, 2, 3});
  ASSERT_EQ(pairs.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(pairs[i].gap(), i >= 2);
  auto d = compare::compare_states(*store, *pairs[0].a, *pairs[0].b);
  EXPECT_EQ(d.changed_names(), std::set<std::string>{"n"});
}
