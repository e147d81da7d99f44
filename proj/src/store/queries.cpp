#include "spacetime/store/queries.hpp"

#include <charconv>
#include <limits>

#include "spacetime/common/sha256.hpp"
#include "spacetime/store/canonical.hpp"

namespace spacetime::store {

namespace {

double parse_float(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double d = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), d);
  if (res.ec != std::errc()) throw StoreError("malformed float payload '" + text + "'");
  return d;
}

std::int64_t parse_int(const std::string& text) {
  std::int64_t i = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), i);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw StoreError("malformed int payload '" + text + "'");
  return i;
}

}  // namespace

CallRecord require_call(const Store& store, Id id) {
  auto c = store.call(id);
  if (!c) throw NotFound("unknown call " + std::to_string(id));
  return *c;
}

SnapshotRecord require_snapshot(const Store& store, Id id) {
  auto s = store.snapshot(id);
  if (!s) throw NotFound("unknown snapshot " + std::to_string(id));
  return *s;
}

Session require_session(const Store& store, Id id) {
  auto s = store.session(id);
  if (!s) throw NotFound("unknown session " + std::to_string(id));
  return *s;
}

CodeVersion require_code(const Store& store, Id id) {
  auto c = store.code(id);
  if (!c) throw NotFound("unknown code version " + std::to_string(id));
  return *c;
}

lang::Value Materializer::build(Id id, bool& skipped, std::string& reason) {
  if (auto it = by_version_.find(id); it != by_version_.end()) return it->second;
  auto v = store_.version(id);
  if (!v) throw NotFound("unknown object version " + std::to_string(id));
  auto p = store_.payload(v->content_hash);
  if (!p) throw StoreError("missing payload " + v->content_hash);
  const std::string& data = p->data;

  lang::Value out;
  if (v->kind == kind::Int) {
    out = lang::Value(parse_int(data));
  } else if (v->kind == kind::Float) {
    out = lang::Value(parse_float(data));
  } else if (v->kind == kind::Bool) {
    out = lang::Value(data == "true");
  } else if (v->kind == kind::Str) {
    out = lang::Value(data);
  } else if (v->kind == kind::Nil) {
    out = lang::Value();
  } else if (v->kind == kind::Skipped) {
    skipped = true;
    reason = data;
    return lang::Value();
  } else if (v->kind == kind::Blob) {
    auto [tag, bytes] = decode_blob(data);
    if (v->object) {
      if (auto it = by_object_.find(*v->object); it != by_object_.end()) return it->second;
    }
    out = heap_.new_native(tag, bytes);
    if (v->object) by_object_[*v->object] = out;
  } else if (v->kind == kind::List || v->kind == kind::Map) {
    // Same stored object => same heap object. If an object appears in two
    // versions within one materialization, the first one wins.
    if (v->object) {
      if (auto it = by_object_.find(*v->object); it != by_object_.end()) return it->second;
    }
    if (v->kind == kind::List) {
      auto list = heap_.new_list();
      out = list;
      if (v->object) by_object_[*v->object] = out;
      by_version_[id] = out;
      for (Id e : v->elements) {
        bool s = false;
        std::string r;
        list->items.push_back(build(e, s, r));
      }
    } else {
      auto map = heap_.new_map();
      out = map;
      if (v->object) by_object_[*v->object] = out;
      by_version_[id] = out;
      auto keys = decode_map(data);
      if (keys.size() != v->elements.size()) throw StoreError("map version " + std::to_string(id) + " is inconsistent");
      for (std::size_t i = 0; i < keys.size(); ++i) {
        bool s = false;
        std::string r;
        map->items.emplace(keys[i].first, build(v->elements[i], s, r));
      }
    }
    return out;
  } else {
    throw StoreError("unknown value kind '" + v->kind + "'");
  }
  if (!v->object) by_version_[id] = out;
  return out;
}

Materialized Materializer::get(Id version) {
  Materialized m;
  m.value = build(version, m.skipped, m.reason);
  return m;
}

std::map<std::string, Materialized> Materializer::get_all(const VarMap& vars) {
  std::map<std::string, Materialized> out;
  for (const auto& [name, id] : vars) out.emplace(name, get(id));
  return out;
}

std::string render_version(const Store& store, Id version) {
  lang::Heap heap;
  Materializer m(store, heap);
  Materialized v = m.get(version);
  if (v.skipped) return "<skipped: " + v.reason + ">";
  return lang::render(v.value);
}

CallingContext get_calling_context(const Store& store, Id call, lang::Heap& heap) {
  CallRecord c = require_call(store, call);
  Materializer m(store, heap);
  CallingContext ctx;
  ctx.locals = m.get_all(c.locals);
  ctx.globals = m.get_all(c.globals);
  ctx.code = require_code(store, c.code);
  return ctx;
}

std::vector<TraceStep> get_trace(const Store& store, Id call) {
  require_call(store, call);
  std::vector<TraceStep> out;
  std::map<Id, std::size_t> index;
  for (auto& s : store.snapshots(call)) {
    index[s.id] = out.size();
    out.push_back(TraceStep{std::move(s), {}});
  }
  for (auto& e : store.events(call))
    if (e.snapshot && index.count(*e.snapshot)) out[index[*e.snapshot]].events.push_back(std::move(e));
  return out;
}

std::string call_state_hash(const Store& store, Id id) {
  CallRecord c = require_call(store, id);
  auto hash_of = [&](Id v) {
    auto row = store.version(v);
    return row ? row->content_hash : std::string("?");
  };
  std::string buf;
  auto vars = [&](const char* tag, const VarMap& m) {
    buf += tag;
    for (const auto& [name, v] : m) buf += name + "=" + hash_of(v) + ";";
    buf += "\n";
  };
  buf += "fn " + c.function + "\n";
  buf += "code " + require_code(store, c.code).text_hash + "\n";
  vars("locals ", c.locals);
  vars("globals ", c.globals);
  buf += "return " + (c.return_value ? hash_of(*c.return_value) : std::string("-")) + "\n";
  if (c.hook_meta) {
    auto b = store.blob(*c.hook_meta);
    buf += "hook " + (b ? b->content_hash : std::string("?")) + "\n";
  }
  buf += "error " + c.error + "\n";
  for (const auto& e : store.events(id)) {
    buf += "event " + e.callable + " " + std::to_string(e.seq) + " (";
    for (Id a : e.args) buf += hash_of(a) + ",";
    buf += ") " + hash_of(e.return_value) + "\n";
  }
  for (const auto& s : store.snapshots(id)) {
    buf += "line " + std::to_string(s.line) + "\n";
    vars("  locals ", s.locals);
    vars("  globals ", s.globals);
  }
  return sha256_hex(buf);
}

std::vector<std::string> session_state_hashes(const Store& store, Id session) {
  std::vector<std::string> out;
  for (const auto& c : store.calls(session)) out.push_back(call_state_hash(store, c.id));
  return out;
}

}  // namespace spacetime::store
