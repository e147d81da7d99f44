#include <gtest/gtest.h>

#include <sqlite3.h>

#include <json.hpp>

#include <filesystem>
#include <set>
#include <sstream>

#include "spacetime/lang/parser.hpp"
#include "spacetime/monitor/capture.hpp"
#include "spacetime/store/canonical.hpp"
#include "spacetime/store/integrity.hpp"
#include "spacetime/store/interchange.hpp"
#include "spacetime/store/queries.hpp"
#include "support/fixtures.hpp"

using namespace spacetime;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("spacetime_store_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

store::Id new_session(store::Store& s) {
  store::Session x;
  x.label = "t";
  return s.begin_session(x);
}

std::size_t distinct_payload_hashes(const store::Store& s) {
  std::set<std::string> h;
  for (const auto& p : s.dump().payloads) h.insert(p.hash);
  return h.size();
}

}  // namespace

TEST(Intern, PrimitiveTwiceIsOneVersion) {
  auto s = store::Store::in_memory();
  monitor::ValueCapturer c(*s, new_session(*s));
  auto a = c.capture(lang::Value(42));
  auto b = c.capture(lang::Value(42));
  EXPECT_EQ(a, b);
  EXPECT_EQ(s->counts().payloads, 1u);
  // A second capturer finds the identity-free version already there.
  monitor::ValueCapturer c2(*s, new_session(*s));
  EXPECT_EQ(c2.capture(lang::Value(42)), a);
  auto v = s->version(a);
  EXPECT_EQ(v->content_hash, store::content_hash(store::kind::Int, "42"));
  EXPECT_FALSE(v->object.has_value());
}

TEST(Intern, MutatedListGetsNewVersionOfSameObject) {
  auto s = store::Store::in_memory();
  monitor::ValueCapturer c(*s, new_session(*s));
  lang::Heap h;
  auto l = h.new_list({lang::Value(1), lang::Value(2)});
  auto v1 = c.capture(lang::Value(l));
  l->items[1] = lang::Value(3);
  l->touch();
  auto v2 = c.capture(lang::Value(l));
  EXPECT_NE(v1, v2);
  auto r1 = s->version(v1), r2 = s->version(v2);
  ASSERT_TRUE(r1->object && r2->object);
  EXPECT_EQ(*r1->object, *r2->object);
  EXPECT_EQ(s->counts().objects, 1u);
  EXPECT_EQ(s->versions_of(*r1->object).size(), 2u);
}

TEST(Intern, EqualListsShareOnePayload) {
  auto s = store::Store::in_memory();
  monitor::ValueCapturer c(*s, new_session(*s));
  lang::Heap h;
  auto a = h.new_list({lang::Value(1), lang::Value(2)});
  auto b = h.new_list({lang::Value(1), lang::Value(2)});
  auto va = c.capture(lang::Value(a));
  auto vb = c.capture(lang::Value(b));
  EXPECT_EQ(s->counts().objects, 2u);
  EXPECT_NE(*s->version(va)->object, *s->version(vb)->object);
  EXPECT_EQ(s->version(va)->content_hash, s->version(vb)->content_hash);
  // Oracle: payload rows = distinct content hashes seen (1, 2, and the list).
  EXPECT_EQ(s->counts().payloads, 3u);
  EXPECT_EQ(distinct_payload_hashes(*s), 3u);
}

TEST(Intern, ThousandEqualStringsOnePayload) {
  auto s = store::Store::in_memory();
  monitor::ValueCapturer c(*s, new_session(*s));
  std::set<store::Id> refs;
  for (int i = 0; i < 1000; ++i) refs.insert(c.capture(lang::Value(std::string("same text"))));
  EXPECT_EQ(refs.size(), 1u);
  EXPECT_EQ(s->counts().payloads, 1u);
}

TEST(Intern, CanonicalDeterminism) {
  lang::Heap h;
  auto v = lang::parse_literal("{\"b\": [1, 2.5, \"x\"], \"a\": {\"k\": nil}, \"c\": true}", h);
  std::string hashes[2];
  for (auto& out : hashes) {
    auto s = store::Store::in_memory();
    monitor::ValueCapturer c(*s, new_session(*s));
    auto id = c.capture(v);
    out = s->version(id)->content_hash;
  }
  EXPECT_EQ(hashes[0], hashes[1]);
}

TEST(Intern, Code) {
  auto s = store::Store::in_memory();
  auto a = s->intern_code("f", "def f():\n    return 1\n", {2});
  EXPECT_EQ(s->intern_code("f", "def f():\n    return 1\n", {2}), a);
  EXPECT_NE(s->intern_code("f", "def f():\n    return  1\n", {2}), a);  // textual rule
  EXPECT_EQ(s->code_versions("f").size(), 2u);
}

TEST(Intern, GravityEditIsNewCodeVersion) {
  auto s = store::Store::in_memory();
  fx::record_flappy(*s);
  std::string heavy = fx::demo("flappy.trk");
  fx::replace(heavy, "velocity = velocity + gravity\n", "velocity = velocity + gravity * 1.5\n");
  fx::record(*s, heavy, 7, fx::demo_path("flappy_events.jsonl"));
  auto versions = s->code_versions("display_game");
  ASSERT_EQ(versions.size(), 2u);
  EXPECT_NE(versions[0].text_hash, versions[1].text_hash);
  EXPECT_NE(versions[1].source_text.find("gravity * 1.5"), std::string::npos);
  EXPECT_EQ(s->calls(std::nullopt, "display_game").size(), 800u);
}

TEST(Open, PersistAndReopen) {
  TempDir dir;
  auto mem = store::Store::in_memory();
  fx::record(*mem, fx::demo("binary_search.trk"));
  mem->persist_to(dir.file("a.db"));
  auto back = store::Store::open(dir.file("a.db"));
  EXPECT_EQ(store::table_digests(*back), store::table_digests(*mem));
  EXPECT_EQ(back->sessions().size(), 1u);
}

TEST(Open, FileBackedIncrementalFlush) {
  TempDir dir;
  {
    auto s = store::Store::open(dir.file("b.db"));
    fx::record(*s, fx::demo("binary_search.trk"));
    fx::record(*s, fx::demo("dice.trk"), 3);
  }
  auto s = store::Store::open(dir.file("b.db"));
  ASSERT_EQ(s->sessions().size(), 2u);
  EXPECT_EQ(s->sessions()[1].label, "test");
  EXPECT_EQ(s->calls(1).size(), 1u);
  EXPECT_NO_THROW(store::check_integrity(s->dump()));
}

TEST(Open, CorruptFiles) {
  TempDir dir;
  {
    std::ofstream(dir.file("garbage.db")) << "this is not a database at all, just text that goes on for a while";
  }
  EXPECT_THROW(store::Store::open(dir.file("garbage.db")), store::StoreError);

  // A valid database missing a table names the table.
  {
    auto s = store::Store::open(dir.file("c.db"));
    fx::record(*s, fx::demo("binary_search.trk"));
  }
  sqlite3* db = nullptr;
  ASSERT_EQ(sqlite3_open(dir.file("c.db").c_str(), &db), SQLITE_OK);
  sqlite3_exec(db, "DROP TABLE hook_blobs", nullptr, nullptr, nullptr);
  sqlite3_close(db);
  try {
    store::Store::open(dir.file("c.db"));
    FAIL();
  } catch (const store::StoreError& e) {
    EXPECT_NE(std::string(e.what()).find("hook_blobs"), std::string::npos) << e.what();
  }

  // A dangling reference names the row.
  {
    auto s = store::Store::open(dir.file("d.db"));
    fx::record(*s, fx::demo("binary_search.trk"));
  }
  ASSERT_EQ(sqlite3_open(dir.file("d.db").c_str(), &db), SQLITE_OK);
  sqlite3_exec(db, "UPDATE calls SET code = 999", nullptr, nullptr, nullptr);
  sqlite3_close(db);
  try {
    store::Store::open(dir.file("d.db"));
    FAIL();
  } catch (const store::StoreError& e) {
    EXPECT_NE(std::string(e.what()).find("calls[1]"), std::string::npos) << e.what();
  }

  EXPECT_THROW(store::Store::open(dir.file("missing/dir/x.db")), store::StoreError);
}

TEST(Query, CallsByFunction) {
  auto s = store::Store::in_memory();
  auto r = fx::record(*s, fx::demo("main_loop.trk"), 1, fx::demo_path("main_loop_events.jsonl"));
  auto calls = s->calls(r.run.session, "main_loop");
  ASSERT_EQ(calls.size(), 5u);
  for (std::size_t i = 0; i < calls.size(); ++i) EXPECT_EQ(calls[i].ordinal, static_cast<std::int64_t>(i));
  EXPECT_TRUE(s->calls(r.run.session, "nobody").empty());
  EXPECT_TRUE(store::get_trace(*s, calls[0].id).empty());
  EXPECT_THROW(store::get_trace(*s, 9999), store::NotFound);
}

TEST(Query, CallingContextHasArguments) {
  auto s = store::Store::in_memory();
  fx::record(*s, fx::demo("binary_search.trk"));
  auto call = s->calls(std::nullopt, "binary_search").at(0);
  lang::Heap h;
  auto ctx = store::get_calling_context(*s, call.id, h);
  ASSERT_TRUE(ctx.locals.count("items"));
  ASSERT_TRUE(ctx.locals.count("target"));
  EXPECT_TRUE(lang::deep_equal(ctx.locals["items"].value, lang::parse_literal("[1, 2, 3, 4, 5]", h)));
  EXPECT_EQ(ctx.locals["target"].value.as_int(), 6);
  EXPECT_EQ(ctx.locals.size(), 2u);
  EXPECT_EQ(ctx.code.function, "binary_search");
  EXPECT_EQ(ctx.code.source_text.rfind("def binary_search(items, target):", 0), 0u);
}

TEST(Query, TraceAttachesEvents) {
  auto s = store::Store::in_memory();
  fx::record(*s,
             "@monitor(granularity=\"line\", track=[rand_int])\n"
             "def f():\n    a = rand_int(1, 6)\n    b = 0\n    c = rand_int(1, 6)\n    return a + c\n\nprint(f())\n");
  auto call = s->calls(std::nullopt, "f").at(0);
  auto trace = store::get_trace(*s, call.id);
  ASSERT_EQ(trace.size(), 4u);
  EXPECT_EQ(trace[0].events.size(), 1u);  // a = rand_int(...) runs on the first snapshot's line
  EXPECT_EQ(trace[1].events.size(), 0u);
  EXPECT_EQ(trace[2].events.size(), 1u);
  EXPECT_EQ(trace[3].events.size(), 0u);
}

// An object's versions, in order, are the value history the capture saw.
TEST(Property, VersionHistory) {
  auto s = store::Store::in_memory();
  fx::record(*s,
             "@monitor(granularity=\"line\")\n"
             "def f():\n    l = []\n    i = 0\n    while i < 4:\n        append(l, i * i)\n        i = i + 1\n"
             "    l[0] = 99\n    return l\n\nprint(f())\n");
  auto call = s->calls(std::nullopt, "f").at(0);
  std::vector<std::string> observed;
  std::optional<store::Id> object;
  for (const auto& snap : s->snapshots(call.id)) {
    if (!snap.locals.count("l")) continue;
    auto v = s->version(snap.locals.at("l"));
    object = v->object;
    auto text = store::render_version(*s, v->id);
    if (observed.empty() || observed.back() != text) observed.push_back(text);
  }
  auto ret = store::render_version(*s, *call.return_value);
  if (observed.back() != ret) observed.push_back(ret);
  ASSERT_TRUE(object);
  std::vector<std::string> history;
  for (const auto& v : s->versions_of(*object)) history.push_back(store::render_version(*s, v.id));
  EXPECT_EQ(history, observed);
  EXPECT_EQ(history.back(), "[99, 1, 4, 9]");
}

TEST(Property, RerecordingAddsNoPayloads) {
  auto s = store::Store::in_memory();
  fx::record_flappy(*s);
  auto before = s->counts();
  fx::record_flappy(*s);
  auto after = s->counts();
  EXPECT_EQ(after.payloads, before.payloads);
  EXPECT_EQ(after.code_versions, before.code_versions);
  EXPECT_EQ(after.hook_blobs, before.hook_blobs);
  EXPECT_EQ(after.calls, 2 * before.calls);
  EXPECT_LE(after.payloads, distinct_payload_hashes(*s));
}

TEST(Interchange, EmptyStoreIsManifestOnly) {
  auto s = store::Store::in_memory();
  auto text = store::export_string(*s);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["record"], "manifest");
  EXPECT_EQ(j["format_version"], store::kFormatVersion);
  auto back = store::import_string(text);
  EXPECT_EQ(back->counts().sessions, 0u);
}

TEST(Interchange, RoundTripIsByteExact) {
  auto s = store::Store::in_memory();
  fx::record_flappy(*s);
  fx::record(*s, fx::demo("binary_search.trk"));
  auto text = store::export_string(*s);
  auto back = store::import_string(text);
  EXPECT_EQ(store::export_string(*back), text);
  EXPECT_EQ(store::table_digests(*back), store::table_digests(*s));
  // Keys sorted within every record.
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    std::string prev;
    for (const auto& [k, _] : j.items()) {
      EXPECT_LT(prev, k);
      prev = k;
    }
  }
}

TEST(Interchange, SessionSubset) {
  auto s = store::Store::in_memory();
  fx::record(*s, fx::demo("binary_search.trk"));
  auto dice = fx::record(*s, fx::demo("dice.trk"), 3);
  auto back = store::import_string(store::export_string(*s, std::vector<store::Id>{dice.run.session}));
  ASSERT_EQ(back->sessions().size(), 1u);
  EXPECT_EQ(back->sessions()[0].id, dice.run.session);
  EXPECT_EQ(back->counts().calls, 1u);
  EXPECT_EQ(store::session_state_hashes(*back, dice.run.session), store::session_state_hashes(*s, dice.run.session));
}

TEST(Interchange, Errors) {
  auto s = store::Store::in_memory();
  fx::record(*s, fx::demo("binary_search.trk"));
  auto text = store::export_string(*s);
  // Point the first snapshot at a version that does not exist.
  std::istringstream in(text);
  std::string line, out;
  bool done = false;
  int index = 0, broken = 0;
  while (std::getline(in, line)) {
    ++index;
    auto j = nlohmann::json::parse(line);
    if (!done && j.value("table", "") == "snapshots") {
      j["locals"]["left"] = 424242;
      line = j.dump();
      done = true;
      broken = index;
    }
    out += line + "\n";
  }
  ASSERT_TRUE(done);
  try {
    store::import_string(out);
    FAIL();
  } catch (const store::StoreError& e) {
    EXPECT_NE(std::string(e.what()).find("424242"), std::string::npos) << e.what();
  }
  try {
    store::import_string(text + "{not json\n");
    FAIL();
  } catch (const store::StoreError& e) {
    auto n = std::count(text.begin(), text.end(), '\n') + 1;
    EXPECT_NE(std::string(e.what()).find(std::to_string(n)), std::string::npos) << e.what();
  }
  (void)broken;
}

TEST(Property, ReferentialIntegrityAfterRecording) {
  auto s = store::Store::in_memory();
  fx::record_flappy(*s);
  fx::record(*s, fx::demo("move_player.trk"));
  fx::record(*s, fx::demo("main_loop.trk"), 1, fx::demo_path("main_loop_events.jsonl"));
  EXPECT_NO_THROW(store::check_integrity(s->dump()));
}
