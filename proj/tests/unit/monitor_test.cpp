#include <gtest/gtest.h>

#include <sstream>

#include "spacetime/lang/builtins.hpp"
#include "spacetime/lang/parser.hpp"
#include "spacetime/monitor/capture.hpp"
#include "spacetime/monitor/recorder.hpp"
#include "spacetime/monitor/spec.hpp"
#include "spacetime/store/canonical.hpp"
#include "spacetime/store/queries.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/program_gen.hpp"

using namespace spacetime;
using Names = std::set<std::string>;

namespace {

struct Run {
  std::unique_ptr<store::Store> store = store::Store::in_memory();
  monitor::RunResult result;
  std::string output;
};

Run run(const std::string& source, std::function<void(monitor::SpecSet&)> edit = {},
        monitor::HookRegistry hooks = monitor::HookRegistry::with_builtins(), monitor::SerializerMap serializers = {},
        std::function<void(lang::Env&)> env_edit = {}) {
  Run r;
  auto program = lang::load_program(source);
  auto specs = monitor::specs_from_pragmas(program);
  if (edit) edit(specs);
  lang::Env env;
  lang::install_all(env, lang::RuntimeConfig{5, nullptr});
  if (env_edit) env_edit(env);
  std::ostringstream out;
  monitor::RunOptions o;
  o.output = &out;
  o.serializers = std::move(serializers);
  r.result = monitor::run_monitored(program, env, specs, hooks, *r.store, o);
  r.output = out.str();
  return r;
}

Names keys(const store::VarMap& m) {
  Names n;
  for (const auto& [k, _] : m) n.insert(k);
  return n;
}

}  // namespace

TEST(GlobalRefs, MovePlayerReadsNoGlobals) {
  auto p = lang::load_program(fx::demo("move_player.trk"));
  auto refs = monitor::analyze_global_refs(p, "move_player");
  EXPECT_EQ(refs.names, Names{});
  EXPECT_FALSE(refs.dynamic);
}

TEST(GlobalRefs, MainLoopListing) {
  // get_events and process are both host callables here, as in the listing.
  auto p = lang::load_program("def main_loop():\n    for event in get_events():\n        process(event)\n");
  EXPECT_EQ(monitor::analyze_global_refs(p, "main_loop").names, (Names{"get_events", "process"}));
}

TEST(GlobalRefs, Transitive) {
  auto p = lang::load_program("gravity = 1\ndef g():\n    return gravity\n\ndef f():\n    return g()\n");
  EXPECT_EQ(monitor::analyze_global_refs(p, "f").names, (Names{"g", "gravity"}));
  auto q = lang::load_program("def f():\n    return invoke(\"g\")\n\ndef g():\n    return 1\n");
  EXPECT_TRUE(monitor::analyze_global_refs(q, "f").dynamic);
  auto specs = monitor::specs_from_json("{\"f\": {}}");
  lang::Env env;
  lang::install_all(env, {});
  monitor::validate(specs, q, env);
  EXPECT_EQ(specs["f"].warnings.size(), 1u);
}

// Running f with only the analyzed globals bound behaves exactly like
// running it with every global bound.
TEST(Property, GlobalCaptureSoundness) {
  for (std::uint32_t seed = 1; seed <= 120; ++seed) {
    std::string src = gen::ProgramGen(seed).program();
    auto p = lang::load_program(src);
    auto refs = monitor::analyze_global_refs(p, "f");
    lang::Env full;
    lang::install_all(full, {});
    std::ostringstream sink;
    lang::Interpreter setup(p, full);
    setup.set_output(&sink);
    setup.run_top_level();
    lang::Env restricted;
    lang::install_all(restricted, {});
    for (const auto& [name, v] : full.globals)
      if (refs.names.count(name)) restricted.globals[name] = lang::deep_copy(setup.heap(), v);
    for (int a = 0; a < 3; ++a) {
      auto want = lang::call(p, "f", {lang::Value(a), lang::Value(4)}, full);
      auto got = lang::call(p, "f", {lang::Value(a), lang::Value(4)}, restricted);
      ASSERT_TRUE(lang::deep_equal(want, got)) << src;
    }
  }
}

TEST(Spec, Validation) {
  auto p = lang::load_program("def f(a):\n    return a\n");
  lang::Env env;
  lang::install_all(env, {});
  auto bad_track = monitor::specs_from_json("{\"f\": {\"track\": [\"nothing_here\"]}}");
  EXPECT_THROW(monitor::validate(bad_track, p, env), monitor::SpecError);
  auto overlap = monitor::specs_from_json("{\"f\": {\"include\": [\"a\"], \"exclude\": [\"a\"]}}");
  EXPECT_THROW(monitor::validate(overlap, p, env), monitor::SpecError);
  auto missing = monitor::specs_from_json("{\"g\": {}}");
  EXPECT_THROW(monitor::validate(missing, p, env), monitor::SpecError);
  EXPECT_THROW(monitor::specs_from_json("{\"f\": {\"colour\": \"red\"}}"), monitor::SpecError);
  EXPECT_THROW(monitor::specs_from_json("{\"f\": {\"granularity\": \"statement\"}}"), monitor::SpecError);
}

TEST(Spec, JsonRoundTripMatchesPragmas) {
  auto p = lang::load_program(fx::demo("flappy.trk"));
  auto specs = monitor::specs_from_pragmas(p);
  auto back = monitor::specs_from_json(monitor::specs_to_json(specs));
  ASSERT_EQ(back.size(), 1u);
  const auto& s = back.at("display_game");
  EXPECT_EQ(s.granularity, lang::Granularity::Function);
  EXPECT_EQ(s.tracked, (Names{"get_events", "rand_int"}));
  EXPECT_EQ(s.return_hooks, std::vector<std::string>{"capture_scene"});
}

TEST(Record, FunctionGranularityOneStatePerCall) {
  auto r = run(fx::demo("move_player.trk"),
               [](auto& s) { s["move_player"].granularity = lang::Granularity::Function; });
  ASSERT_FALSE(r.result.failed()) << r.result.stats.error;
  EXPECT_EQ(r.result.stats.calls, 2u);
  EXPECT_EQ(r.store->counts().snapshots, 0u);
  auto calls = r.store->calls(r.result.session);
  EXPECT_EQ(keys(calls[0].locals), (Names{"player", "x", "y"}));
  EXPECT_TRUE(calls[0].globals.empty());
}

TEST(Record, LineGranularityOneStatePerExecutedLine) {
  auto r = run(fx::demo("move_player.trk"));
  auto calls = r.store->calls(r.result.session);
  ASSERT_EQ(calls.size(), 2u);
  auto lines = [&](store::Id c) {
    std::vector<int> out;
    for (const auto& s : r.store->snapshots(c)) out.push_back(s.line);
    return out;
  };
  // In bounds: both assignments, both ifs, return true.
  EXPECT_EQ(lines(calls[0].id), (std::vector<int>{2, 3, 4, 6, 8}));
  // y out of bounds: the first if returns.
  EXPECT_EQ(lines(calls[1].id), (std::vector<int>{2, 3, 4, 5}));
  EXPECT_EQ(r.output, "true\nfalse\n");
}

TEST(Record, SnapshotCountMatchesCountingOracle) {
  for (std::uint32_t seed = 300; seed < 340; ++seed) {
    std::string src = gen::ProgramGen(seed).program();
    fx::replace(src, "def f(a, b):", "@monitor(granularity=\"line\")\ndef f(a, b):");
    auto r = run(src);
    ASSERT_FALSE(r.result.failed()) << r.result.stats.error << "\n" << src;

    auto p = lang::load_program(src);
    lang::Env env;
    lang::install_all(env, lang::RuntimeConfig{5, nullptr});
    oracle::LineCounter counter("f");
    lang::Interpreter tree(p, env, lang::ExecMode::Tree);
    std::ostringstream sink;
    tree.set_output(&sink);
    tree.set_sink(&counter);
    tree.run_top_level();

    std::vector<int> recorded;
    for (const auto& c : r.store->calls(r.result.session))
      for (const auto& s : r.store->snapshots(c.id)) recorded.push_back(s.line);
    std::vector<int> expected;
    const auto& fn = p.function("f");
    for (int l : counter.lines) expected.push_back(fn.relative_line(l));
    ASSERT_EQ(recorded, expected) << src;
  }
}

TEST(Record, DisplayGameThousandFrames) {
  std::string src = fx::demo("flappy.trk");
  fx::replace(src, "while frame < 400:", "while frame < 1000:");
  auto store = store::Store::in_memory();
  auto r = fx::record(*store, src, 7, fx::demo_path("flappy_events.jsonl"));
  ASSERT_FALSE(r.run.failed()) << r.run.stats.error;
  auto calls = store->calls(r.run.session, "display_game");
  ASSERT_EQ(calls.size(), 1000u);
  for (const auto& c : calls) {
    ASSERT_TRUE(c.hook_meta);
    EXPECT_EQ(store->blob(*c.hook_meta)->kind, "scene");
  }
  // Oracle: one get_events per frame; rand_int once per pipe spawn (every
  // 90th frame) and once per cloud spawn (every 45th frame).
  std::size_t gets = 0, rands = 0;
  for (int frame = 0; frame < 1000; ++frame) {
    ++gets;
    rands += frame % 90 == 0;
    rands += frame % 45 == 0;
  }
  std::size_t seen_gets = 0, seen_rands = 0;
  for (const auto& c : calls)
    for (const auto& e : store->events(c.id)) {
      seen_gets += e.callable == "get_events";
      seen_rands += e.callable == "rand_int";
    }
  EXPECT_EQ(seen_gets, gets);
  EXPECT_EQ(seen_rands, rands);
  EXPECT_EQ(r.run.stats.events, gets + rands);
}

TEST(Record, EventsAttachToInnermostMonitoredCall) {
  auto r = run(
      "@monitor(track=[rand_int])\n"
      "def inner():\n    return rand_int(1, 6)\n\n"
      "@monitor(track=[rand_int])\n"
      "def outer():\n    a = rand_int(1, 6)\n    b = inner()\n    return a + b\n\n"
      "x = rand_int(1, 6)\n"
      "print(outer())\n");
  auto calls = r.store->calls(r.result.session);
  ASSERT_EQ(calls.size(), 2u);
  const auto& outer = calls[0];
  const auto& inner = calls[1];
  EXPECT_EQ(outer.function, "outer");
  EXPECT_EQ(inner.function, "inner");
  ASSERT_TRUE(inner.parent_call);
  EXPECT_EQ(*inner.parent_call, outer.id);
  EXPECT_EQ(r.store->events(outer.id).size(), 1u);
  EXPECT_EQ(r.store->events(inner.id).size(), 1u);
  // The top-level rand_int ran outside any monitored extent.
  EXPECT_EQ(r.result.stats.events, 2u);
}

TEST(Record, EventSeqIncreasesPerCallable) {
  auto r = run(fx::demo("dice.trk"));
  auto call = r.store->calls(r.result.session).at(0);
  auto events = r.store->events(call.id);
  ASSERT_EQ(events.size(), 5u);
  for (std::size_t i = 1; i < events.size(); ++i) EXPECT_LT(events[i - 1].seq, events[i].seq);
  // Oracle: the total is the sum of the recorded returns.
  std::int64_t sum = 0;
  lang::Heap h;
  store::Materializer m(*r.store, h);
  for (const auto& e : events) sum += m.get(e.return_value).value.as_int();
  EXPECT_EQ(r.output, std::to_string(sum) + "\n");
}

TEST(Record, IncludeExcludeFiltersCapturedNames) {
  const std::string body =
      "scale = 3\nunused = 9\n"
      "def f(a, b):\n    tmp = a * scale\n    keep = tmp + b\n    return keep\n\nprint(f(1, 2))\n";
  struct Case {
    std::set<std::string> include, exclude;
  };
  for (const auto& c : std::vector<Case>{{{}, {}}, {{"a", "keep", "scale"}, {}}, {{}, {"tmp", "scale"}},
                                         {{"a", "tmp"}, {"tmp"}}}) {
    std::string src = body;
    fx::replace(src, "def f(a, b):", "@monitor(granularity=\"line\")\ndef f(a, b):");
    if (!c.include.empty() && !c.exclude.empty()) {
      // Overlap is rejected up front.
      EXPECT_THROW(run(src,
                       [&](auto& s) {
                         s["f"].include = c.include;
                         s["f"].exclude = c.exclude;
                       }),
                   monitor::SpecError);
      continue;
    }
    auto r = run(src, [&](auto& s) {
      s["f"].include = c.include;
      s["f"].exclude = c.exclude;
    });
    // Oracle: names bound at each line, computed by hand from the source,
    // filtered by the rule.
    std::vector<Names> visible_locals = {{"a", "b"}, {"a", "b", "tmp"}, {"a", "b", "keep", "tmp"}};
    Names visible_globals = {"scale"};
    auto filter = [&](Names n) {
      Names out;
      for (const auto& x : n)
        if ((c.include.empty() || c.include.count(x)) && !c.exclude.count(x)) out.insert(x);
      return out;
    };
    auto call = r.store->calls(r.result.session).at(0);
    auto snaps = r.store->snapshots(call.id);
    ASSERT_EQ(snaps.size(), 3u);
    for (std::size_t i = 0; i < snaps.size(); ++i) {
      EXPECT_EQ(keys(snaps[i].locals), filter(visible_locals[i]));
      EXPECT_EQ(keys(snaps[i].globals), filter(visible_globals));
    }
  }
}

TEST(Capture, PrimitivesNativesAndSerializers) {
  auto s = store::Store::in_memory();
  store::Session sess;
  auto sid = s->begin_session(sess);
  lang::Heap h;
  monitor::SerializerMap ser;
  ser["event"] = [](const lang::NativeObject& n) { return std::any_cast<std::string>(n.payload); };
  ser["broken"] = [](const lang::NativeObject&) -> std::string { throw std::runtime_error("nope"); };
  monitor::ValueCapturer c(*s, sid, ser);

  auto i = s->version(c.capture(lang::Value(42)));
  EXPECT_EQ(i->kind, "int");
  EXPECT_EQ(s->payload(i->content_hash)->data, "42");

  auto screen = s->version(c.capture(lang::Value(h.new_native("screen"))));
  EXPECT_EQ(screen->kind, "skipped");
  EXPECT_EQ(c.skipped_count(), 1u);
  EXPECT_NE(s->payload(screen->content_hash)->data.find("screen"), std::string::npos);

  auto ev = s->version(c.capture(lang::Value(h.new_native("event", std::string("key:space")))));
  EXPECT_EQ(ev->kind, "blob");
  EXPECT_EQ(store::decode_blob(s->payload(ev->content_hash)->data),
            (std::pair<std::string, std::string>{"event", "key:space"}));

  try {
    c.capture(lang::Value(h.new_native("broken")));
    FAIL();
  } catch (const monitor::CaptureError& e) {
    EXPECT_NE(std::string(e.what()).find("broken"), std::string::npos);
  }

  auto l = h.new_list();
  l->items.push_back(lang::Value(l));
  auto cyc = s->version(c.capture(lang::Value(l)));
  EXPECT_EQ(cyc->kind, "list");
}

TEST(Capture, SkippedArgumentsAreCounted) {
  auto r = run("@monitor()\ndef paint(screen, n):\n    return n\n\ns = open_screen(10, 10)\nprint(paint(s, 3))\n");
  ASSERT_FALSE(r.result.failed());
  EXPECT_EQ(r.result.stats.skipped, 1u);
  auto call = r.store->calls(r.result.session).at(0);
  EXPECT_EQ(r.store->version(call.locals.at("screen"))->kind, "skipped");
  EXPECT_EQ(r.store->version(call.locals.at("n"))->kind, "int");
}

TEST(Hooks, FailureAbortsWithNameAndLine) {
  auto hooks = monitor::HookRegistry::with_builtins();
  hooks.add("explode", [](std::span<const lang::Value>) -> monitor::HookOutput { throw std::runtime_error("boom"); });
  auto r = run("@monitor(return_hook=\"explode\")\ndef f():\n    return 1\n\nprint(f())\nprint(2)\n", {}, hooks);
  ASSERT_TRUE(r.result.failed());
  EXPECT_NE(r.result.stats.error.find("explode"), std::string::npos) << r.result.stats.error;
  EXPECT_NE(r.result.stats.error.find("line"), std::string::npos) << r.result.stats.error;
  EXPECT_EQ(r.output, "");
  auto sess = r.store->session(r.result.session);
  EXPECT_EQ(sess->status, "failed");
  EXPECT_EQ(r.store->calls(r.result.session).size(), 1u);
}

TEST(Hooks, UnknownHookRejectedBeforeRunning) {
  EXPECT_THROW(run("@monitor(call_hook=\"missing\")\ndef f():\n    return 1\n\nprint(f())\n"), monitor::SpecError);
}

TEST(Hooks, CallHooksSeeArgumentsAndBundle) {
  auto r = run("@monitor(call_hook=\"json\", return_hook=\"json\")\ndef f(a):\n    return a + 1\n\nprint(f(1))\n");
  auto call = r.store->calls(r.result.session).at(0);
  ASSERT_TRUE(call.hook_meta);
  auto blob = r.store->blob(*call.hook_meta);
  EXPECT_EQ(blob->kind, "bundle");
}

// Hooks run on live guest values but must leave them untouched: the state
// captured before the hook equals the state after it.
TEST(Property, HookPurity) {
  auto hooks = monitor::HookRegistry::with_builtins();
  std::vector<std::string> before, after;
  auto scene = hooks.get("capture_scene");
  hooks.add("watch", [&](std::span<const lang::Value> args) {
    before.push_back(lang::render(args[0]));
    auto out = scene(args);
    after.push_back(lang::render(args[0]));
    return out;
  });
  auto store = store::Store::in_memory();
  std::string src = fx::demo("flappy.trk");
  fx::replace(src, "return_hook=\"capture_scene\"", "return_hook=\"watch\"");
  fx::replace(src, "while frame < 400:", "while frame < 60:");
  auto program = lang::load_program(src);
  lang::Env env;
  lang::install_all(env, lang::RuntimeConfig{7, nullptr});
  monitor::RunOptions o;
  auto res = monitor::run_monitored(program, env, monitor::specs_from_pragmas(program), hooks, *store, o);
  ASSERT_FALSE(res.failed()) << res.stats.error;
  ASSERT_EQ(before.size(), 60u);
  EXPECT_EQ(before, after);
  // And the recorded return value is the value the hook saw.
  auto calls = store->calls(res.session);
  for (std::size_t i = 0; i < calls.size(); ++i)
    EXPECT_EQ(store::render_version(*store, *calls[i].return_value), before[i]);
}

TEST(Record, GuestErrorMarksSessionFailed) {
  auto r = run("@monitor()\ndef f(n):\n    return 10 // n\n\nprint(f(2))\nprint(f(0))\n");
  ASSERT_TRUE(r.result.failed());
  ASSERT_TRUE(r.result.stats.failed_at);
  EXPECT_EQ(*r.result.stats.failed_at, 1);
  auto calls = r.store->calls(r.result.session);
  ASSERT_EQ(calls.size(), 2u);
  EXPECT_TRUE(calls[0].error.empty());
  EXPECT_FALSE(calls[1].error.empty());
  EXPECT_EQ(r.store->session(r.result.session)->failed_at, 1);
}
