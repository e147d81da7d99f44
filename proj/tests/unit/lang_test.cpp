#include <gtest/gtest.h>

#include <sstream>

#include "spacetime/lang/builtins.hpp"
#include "spacetime/lang/errors.hpp"
#include "spacetime/lang/interpreter.hpp"
#include "spacetime/lang/parser.hpp"
#include "spacetime/lang/program.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/program_gen.hpp"

using namespace spacetime;
using namespace spacetime::lang;

namespace {

Env standard_env(std::uint64_t seed = 1) {
  Env env;
  install_all(env, RuntimeConfig{seed, nullptr});
  return env;
}

std::string run_output(const Program& p, Env& env, ExecMode mode = ExecMode::Flat) {
  std::ostringstream out;
  Interpreter in(p, env, mode);
  in.set_output(&out);
  in.run_top_level();
  return out.str();
}

struct Recording : InstrumentationSink {
  std::vector<std::string> log;
  Observe observe(const FunctionDef&) override { return Observe::Line; }
  void on_call(const Frame& f) override { log.push_back("call " + f.function->name); }
  void on_line(const Frame& f, int line) override {
    std::string s = "line " + std::to_string(line);
    std::map<std::string, std::string> sorted;
    for (const auto& [k, v] : f.locals) sorted[k] = render(v);
    for (const auto& [k, v] : sorted) s += " " + k + "=" + v;
    log.push_back(s);
  }
  void on_return(const Frame&, const Value& v) override { log.push_back("return " + render(v)); }
};

}  // namespace

TEST(Parse, SingleAssignment) {
  auto unit = parse("x = 1");
  ASSERT_EQ(unit.top_level.size(), 1u);
  EXPECT_EQ(unit.top_level[0]->kind, StmtKind::Assign);
  EXPECT_EQ(unit.top_level[0]->line, 1);
}

TEST(Parse, MovePlayerListing) {
  auto unit = parse(fx::demo("move_player.trk"));
  const FunctionDef* fn = unit.find("move_player");
  ASSERT_NE(fn, nullptr);
  EXPECT_EQ(fn->params, (std::vector<std::string>{"x", "y", "player"}));
  // Hand count: two field assignments, two ifs each with a return, final return.
  EXPECT_EQ(count_statements(fn->body), 7u);
  ASSERT_TRUE(fn->pragma.has_value());
  EXPECT_EQ(fn->pragma->granularity, Granularity::Line);
}

TEST(Parse, MalformedDefReportsLine) {
  try {
    parse("def f(:");
    FAIL() << "expected a syntax error";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 1);
    EXPECT_GT(e.column(), 0);
  }
}

TEST(Parse, DuplicateFunctionRejected) {
  EXPECT_THROW(parse("def f():\n    return 1\ndef f():\n    return 2\n"), SyntaxError);
}

TEST(Parse, OneStatementPerLine) {
  EXPECT_THROW(parse("x = 1 y = 2\n"), SyntaxError);
  EXPECT_THROW(parse("if true: x = 1\n"), SyntaxError);
}

TEST(Parse, PragmaAttachesToFollowingFunction) {
  auto unit = parse(
      "@monitor(granularity=\"line\", track=[rand_int], return_hook=\"json\", exclude=[tmp])\n"
      "def f():\n    return 1\n\ndef g():\n    return 2\n");
  ASSERT_TRUE(unit.find("f")->pragma);
  EXPECT_FALSE(unit.find("g")->pragma);
  const auto& p = *unit.find("f")->pragma;
  EXPECT_EQ(p.track, std::vector<std::string>{"rand_int"});
  EXPECT_EQ(p.return_hooks, std::vector<std::string>{"json"});
  EXPECT_EQ(p.exclude, std::vector<std::string>{"tmp"});
}

TEST(Lower, StraightLineBody) {
  auto p = load_program("def f(a):\n    b = a\n    c = b\n    d = c\n    e = d\n    return e\n");
  const auto& flat = p.flat("f");
  EXPECT_EQ(flat.entries.size(), 5u);
  EXPECT_EQ(flat.line_index.size(), 5u);
}

TEST(Lower, WhileBackEdgeTargetsLoopHead) {
  auto p = load_program("def f(n):\n    i = 0\n    while i < n:\n        i = i + 1\n    return i\n");
  const auto& flat = p.flat("f");
  int head = flat.line_index.at(3);
  EXPECT_EQ(flat.entries[head].op, FlatOp::LoopHead);
  bool found = false;
  for (const auto& e : flat.entries)
    if (e.op == FlatOp::Jump) {
      EXPECT_EQ(e.target, head);
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(Lower, BinarySearchIndexesMidLine) {
  auto p = load_program(fx::demo("binary_search.trk"));
  const auto& fn = p.function("binary_search");
  EXPECT_TRUE(p.flat("binary_search").is_statement_line(fn.absolute_line(5)));  // mid = (left + right) // 2
  EXPECT_FALSE(p.flat("binary_search").is_statement_line(fn.absolute_line(10)));  // else:
}

TEST(Call, BinarySearchMatchesReference) {
  auto p = load_program(fx::demo("binary_search.trk"));
  auto env = standard_env();
  Heap h;
  auto items = parse_literal("[1, 2, 3, 4, 5]", h);
  auto r = call(p, "binary_search", {items, Value(6)}, env);
  ASSERT_TRUE(r.is_int());
  EXPECT_EQ(r.as_int(), oracle::binary_search({1, 2, 3, 4, 5}, 6).result);
  for (int t = 0; t <= 6; ++t) {
    auto rr = call(p, "binary_search", {items, Value(t)}, env);
    EXPECT_EQ(rr.as_int(), oracle::binary_search({1, 2, 3, 4, 5}, t).result) << "target " << t;
  }
}

TEST(Call, MovePlayerBounds) {
  auto p = load_program(fx::demo("move_player.trk"));
  auto env = standard_env();
  Heap h;
  auto player = parse_literal("{\"x\": 0, \"y\": 0}", h);
  EXPECT_TRUE(call(p, "move_player", {Value(100), Value(50), player}, env).as_bool());
  EXPECT_FALSE(call(p, "move_player", {Value(100), Value(700), player}, env).as_bool());
  EXPECT_EQ(render(player), "{\"x\": 100, \"y\": 700}");
}

TEST(Call, EntryLineSkipsEarlierLines) {
  auto p = load_program(fx::demo("move_player.trk"));
  auto env = standard_env();
  const auto& fn = p.function("move_player");
  Heap h;
  CallOptions o;
  o.entry_line = fn.absolute_line(8);  // return true
  o.preset_locals = {{"x", Value(1)}, {"y", Value(1)}, {"player", parse_literal("{}", h)}};
  Recording sink;
  auto r = call(p, "move_player", {}, env, &sink, o);
  EXPECT_TRUE(r.as_bool());
  int lines = 0;
  for (const auto& l : sink.log) lines += l.rfind("line ", 0) == 0;
  EXPECT_EQ(lines, 1);
}

TEST(Call, Errors) {
  auto p = load_program("def f(a):\n    return a + missing\n\ndef g(a):\n    return a[5]\n");
  auto env = standard_env();
  EXPECT_THROW(call(p, "nope", {}, env), RuntimeError);
  EXPECT_THROW(call(p, "f", {}, env), RuntimeError);
  try {
    call(p, "f", {Value(1)}, env);
    FAIL();
  } catch (const RuntimeError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  Heap h;
  EXPECT_THROW(call(p, "g", {parse_literal("[1]", h)}, env), RuntimeError);
  CallOptions o;
  o.entry_line = 1;  // the def line is not a statement
  EXPECT_THROW(call(p, "f", {}, env, nullptr, o), RuntimeError);
  CallOptions other;
  other.entry_line = 5;  // a statement of g, not f
  EXPECT_THROW(call(p, "f", {}, env, nullptr, other), RuntimeError);
}

TEST(Call, OverflowIsAnError) {
  auto p = load_program("def f(a):\n    return a * a\n");
  auto env = standard_env();
  EXPECT_THROW(call(p, "f", {Value(std::int64_t{1} << 40)}, env), RuntimeError);
}

TEST(Call, UnboundLocalDoesNotReadGlobal) {
  auto p = load_program("x = 5\ndef f():\n    y = x\n    x = 1\n    return y\n");
  auto env = standard_env();
  EXPECT_THROW(
      {
        Interpreter in(p, env);
        in.run_top_level();
        in.call("f", {});
      },
      RuntimeError);
}

TEST(Builtins, SeededRandomIsDeterministic) {
  auto p = load_program("out = []\ni = 0\nwhile i < 20:\n    append(out, rand_int(1, 100))\n    i = i + 1\nprint(out)\n");
  auto a = standard_env(42), b = standard_env(42), c = standard_env(43);
  EXPECT_EQ(run_output(p, a), run_output(p, b));
  EXPECT_NE(run_output(p, a), run_output(p, c));
}

TEST(Builtins, EventScriptServesInOrder) {
  auto script = std::make_shared<EventScript>(EventScript::from_text(
      "{\"callable\": \"get_events\", \"return\": [1]}\n"
      "{\"callable\": \"get_events\", \"return\": [2, 3]}\n"
      "{\"callable\": \"get_events\", \"return\": []}\n"));
  Env env;
  install_all(env, RuntimeConfig{1, script});
  auto p = load_program("print(get_events())\nprint(get_events())\nprint(get_events())\nprint(get_events())\n");
  EXPECT_EQ(run_output(p, env), "[1]\n[2, 3]\n[]\n[]\n");
  EXPECT_TRUE(env.is_external("get_events"));
}

TEST(Builtins, PureAndDuplicate) {
  auto env = standard_env();
  auto p = load_program("print(len([1, 2, 3]))\n");
  EXPECT_EQ(run_output(p, env), "3\n");
  EXPECT_FALSE(env.is_external("len"));
  EXPECT_TRUE(env.is_external("rand_int"));
  EXPECT_TRUE(env.is_external("clock_ms"));
  EXPECT_THROW(register_builtin(env, "len", BuiltinKind::Pure, [](BuiltinContext&, std::span<const Value>) {
                 return Value();
               }),
               std::invalid_argument);
}

TEST(Values, IdentityStability) {
  auto p = load_program("def f():\n    l = [1]\n    append(l, 2)\n    c = copy(l)\n    return [l, c]\n");
  auto env = standard_env();
  Interpreter in(p, env);
  struct Ids : InstrumentationSink {
    std::vector<std::uint64_t> l;
    Observe observe(const FunctionDef&) override { return Observe::Line; }
    void on_call(const Frame&) override {}
    void on_line(const Frame& f, int) override {
      if (f.locals.count("l")) l.push_back(f.locals.at("l").identity());
    }
    void on_return(const Frame&, const Value&) override {}
  } ids;
  in.set_sink(&ids);
  auto r = in.call("f", {});
  ASSERT_GE(ids.l.size(), 2u);
  for (auto id : ids.l) EXPECT_EQ(id, ids.l.front());
  const auto& pair = r.as_list()->items;
  EXPECT_EQ(pair[0].identity(), ids.l.front());
  EXPECT_NE(pair[1].identity(), pair[0].identity());
  EXPECT_TRUE(deep_equal(pair[0], pair[1]));
  EXPECT_EQ(Value(5).identity(), 0u);
}

TEST(Values, LiteralRoundTrip) {
  Heap h;
  for (const char* text : {"nil", "true", "-12", "0.5", "1e+100", "\"a\\\"b\\n\"", "[1, [2.0, \"x\"], {}]",
                           "{\"a\": 1, \"b\": [true, nil]}"}) {
    auto v = parse_literal(text, h);
    EXPECT_TRUE(deep_equal(parse_literal(render(v), h), v)) << text;
  }
}

// The flat (jump-based) executor and the tree walker agree on results and
// on every callback, over a corpus of generated programs.
TEST(Property, LoweringEquivalence) {
  for (std::uint32_t seed = 1; seed <= 150; ++seed) {
    std::string src = gen::ProgramGen(seed).program();
    auto p = load_program(src);
    auto e1 = standard_env(), e2 = standard_env();
    Recording s1, s2;
    std::ostringstream o1, o2;
    Interpreter flat(p, e1, ExecMode::Flat), tree(p, e2, ExecMode::Tree);
    flat.set_sink(&s1);
    tree.set_sink(&s2);
    flat.set_output(&o1);
    tree.set_output(&o2);
    flat.run_top_level();
    tree.run_top_level();
    ASSERT_EQ(o1.str(), o2.str()) << src;
    ASSERT_EQ(s1.log, s2.log) << src;
  }
}

// Same seed, same program -> identical callback streams.
TEST(Property, Determinism) {
  for (std::uint32_t seed = 1; seed <= 40; ++seed) {
    std::string src = gen::ProgramGen(seed, {.use_rand = true}).program();
    auto p = load_program(src);
    std::vector<std::string> logs[2];
    for (auto& log : logs) {
      auto env = standard_env(99);
      Recording s;
      Interpreter in(p, env);
      std::ostringstream out;
      in.set_output(&out);
      in.set_sink(&s);
      in.run_top_level();
      log = s.log;
      log.push_back(out.str());
    }
    ASSERT_EQ(logs[0], logs[1]) << src;
  }
}

// The lines reported via on_line are exactly the statement lines the tree
// walker executes.
TEST(Property, LineCompleteness) {
  for (std::uint32_t seed = 200; seed < 260; ++seed) {
    auto p = load_program(gen::ProgramGen(seed).program());
    auto e1 = standard_env(), e2 = standard_env();
    oracle::LineCounter flat_count("f"), tree_count("f");
    Interpreter flat(p, e1, ExecMode::Flat), tree(p, e2, ExecMode::Tree);
    std::ostringstream sink;
    flat.set_output(&sink);
    tree.set_output(&sink);
    flat.set_sink(&flat_count);
    tree.set_sink(&tree_count);
    flat.run_top_level();
    tree.run_top_level();
    ASSERT_EQ(flat_count.lines, tree_count.lines);
    for (int l : flat_count.lines) EXPECT_TRUE(p.flat("f").is_statement_line(l));
  }
  // And against the hand-written binary search reference.
  auto p = load_program(fx::demo("binary_search.trk"));
  auto env = standard_env();
  oracle::LineCounter c("binary_search");
  Interpreter in(p, env);
  in.set_sink(&c);
  Heap h;
  in.call("binary_search", {parse_literal("[1, 2, 3, 4, 5]", h), Value(6)});
  auto ref = oracle::binary_search({1, 2, 3, 4, 5}, 6);
  ASSERT_EQ(c.lines.size(), ref.steps.size());
  const auto& fn = p.function("binary_search");
  for (std::size_t i = 0; i < c.lines.size(); ++i) EXPECT_EQ(fn.relative_line(c.lines[i]), ref.steps[i].line);
}
