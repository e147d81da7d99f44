#include "spacetime/store/records.hpp"

#include "spacetime/common/sha256.hpp"

namespace spacetime::store {

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
  const json& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<T>();
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t n;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      n = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      n = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      n = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + n >= s.size()) return false;
    for (std::size_t k = 1; k <= n; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((n == 1 && cp < 0x80) || (n == 2 && cp < 0x800) || (n == 3 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += n + 1;
  }
  return true;
}

}  // namespace

json varmap_to_json(const VarMap& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

VarMap varmap_from_json(const json& j) {
  VarMap m;
  for (auto it = j.begin(); it != j.end(); ++it) m.emplace(it.key(), it.value().get<Id>());
  return m;
}

json to_json(const Session& s) {
  return json{{"id", s.id},
              {"label", s.label},
              {"started_at", s.started_at},
              {"program_hash", s.program_hash},
              {"parent_session", opt(s.parent_session)},
              {"parent_offset", opt(s.parent_offset)},
              {"kind", s.kind},
              {"status", s.status},
              {"failed_at", opt(s.failed_at)},
              {"error", s.error},
              {"program_code", opt(s.program_code)},
              {"monitor_config", s.monitor_config}};
}

Session session_from_json(const json& j) {
  Session s;
  s.id = j.at("id").get<Id>();
  s.label = j.at("label").get<std::string>();
  s.started_at = j.at("started_at").get<std::int64_t>();
  s.program_hash = j.at("program_hash").get<std::string>();
  s.parent_session = get_opt<Id>(j, "parent_session");
  s.parent_offset = get_opt<std::int64_t>(j, "parent_offset");
  s.kind = j.at("kind").get<std::string>();
  s.status = j.at("status").get<std::string>();
  s.failed_at = get_opt<std::int64_t>(j, "failed_at");
  s.error = j.at("error").get<std::string>();
  s.program_code = get_opt<Id>(j, "program_code");
  s.monitor_config = j.at("monitor_config").get<std::string>();
  return s;
}

json to_json(const CallRecord& c) {
  return json{{"id", c.id},
              {"session", c.session},
              {"ordinal", c.ordinal},
              {"function", c.function},
              {"code", c.code},
              {"parent_call", opt(c.parent_call)},
              {"granularity", c.granularity},
              {"locals", varmap_to_json(c.locals)},
              {"globals", varmap_to_json(c.globals)},
              {"return_value", opt(c.return_value)},
              {"hook_meta", opt(c.hook_meta)},
              {"error", c.error}};
}

CallRecord call_from_json(const json& j) {
  CallRecord c;
  c.id = j.at("id").get<Id>();
  c.session = j.at("session").get<Id>();
  c.ordinal = j.at("ordinal").get<std::int64_t>();
  c.function = j.at("function").get<std::string>();
  c.code = j.at("code").get<Id>();
  c.parent_call = get_opt<Id>(j, "parent_call");
  c.granularity = j.at("granularity").get<std::string>();
  c.locals = varmap_from_json(j.at("locals"));
  c.globals = varmap_from_json(j.at("globals"));
  c.return_value = get_opt<Id>(j, "return_value");
  c.hook_meta = get_opt<Id>(j, "hook_meta");
  c.error = j.at("error").get<std::string>();
  return c;
}

json to_json(const SnapshotRecord& s) {
  return json{{"id", s.id},
              {"call", s.call},
              {"ordinal", s.ordinal},
              {"line", s.line},
              {"locals", varmap_to_json(s.locals)},
              {"globals", varmap_to_json(s.globals)}};
}

SnapshotRecord snapshot_from_json(const json& j) {
  SnapshotRecord s;
  s.id = j.at("id").get<Id>();
  s.call = j.at("call").get<Id>();
  s.ordinal = j.at("ordinal").get<std::int64_t>();
  s.line = j.at("line").get<int>();
  s.locals = varmap_from_json(j.at("locals"));
  s.globals = varmap_from_json(j.at("globals"));
  return s;
}

json to_json(const EventRecord& e) {
  return json{{"id", e.id},         {"call", e.call}, {"snapshot", opt(e.snapshot)},
              {"callable", e.callable}, {"seq", e.seq},   {"args", e.args},
              {"return_value", e.return_value}};
}

EventRecord event_from_json(const json& j) {
  EventRecord e;
  e.id = j.at("id").get<Id>();
  e.call = j.at("call").get<Id>();
  e.snapshot = get_opt<Id>(j, "snapshot");
  e.callable = j.at("callable").get<std::string>();
  e.seq = j.at("seq").get<std::int64_t>();
  e.args = j.at("args").get<std::vector<Id>>();
  e.return_value = j.at("return_value").get<Id>();
  return e;
}

json to_json(const StoredObject& o) {
  return json{{"id", o.id}, {"session", o.session}, {"runtime_id", o.runtime_id}, {"first_seen", opt(o.first_seen)}};
}

StoredObject object_from_json(const json& j) {
  StoredObject o;
  o.id = j.at("id").get<Id>();
  o.session = j.at("session").get<Id>();
  o.runtime_id = j.at("runtime_id").get<std::uint64_t>();
  o.first_seen = get_opt<Id>(j, "first_seen");
  return o;
}

json to_json(const ObjectVersion& v) {
  return json{{"id", v.id},
              {"object", opt(v.object)},
              {"content_hash", v.content_hash},
              {"kind", v.kind},
              {"elements", v.elements}};
}

ObjectVersion version_from_json(const json& j) {
  ObjectVersion v;
  v.id = j.at("id").get<Id>();
  v.object = get_opt<Id>(j, "object");
  v.content_hash = j.at("content_hash").get<std::string>();
  v.kind = j.at("kind").get<std::string>();
  v.elements = j.at("elements").get<std::vector<Id>>();
  return v;
}

json to_json(const Payload& p) {
  if (valid_utf8(p.data)) return json{{"hash", p.hash}, {"kind", p.kind}, {"encoding", "utf8"}, {"data", p.data}};
  return json{{"hash", p.hash}, {"kind", p.kind}, {"encoding", "hex"}, {"data", to_hex(p.data)}};
}

Payload payload_from_json(const json& j) {
  Payload p;
  p.hash = j.at("hash").get<std::string>();
  p.kind = j.at("kind").get<std::string>();
  std::string encoding = j.at("encoding").get<std::string>();
  std::string data = j.at("data").get<std::string>();
  if (encoding == "hex") {
    p.data = from_hex(data);
  } else if (encoding == "utf8") {
    p.data = std::move(data);
  } else {
    throw std::invalid_argument("unknown payload encoding '" + encoding + "'");
  }
  return p;
}

json to_json(const CodeVersion& c) {
  return json{{"id", c.id},
              {"function", c.function},
              {"source_text", c.source_text},
              {"text_hash", c.text_hash},
              {"line_map", c.line_map}};
}

CodeVersion code_from_json(const json& j) {
  CodeVersion c;
  c.id = j.at("id").get<Id>();
  c.function = j.at("function").get<std::string>();
  c.source_text = j.at("source_text").get<std::string>();
  c.text_hash = j.at("text_hash").get<std::string>();
  c.line_map = j.at("line_map").get<std::vector<int>>();
  return c;
}

json to_json(const HookBlob& b) { return json{{"id", b.id}, {"kind", b.kind}, {"content_hash", b.content_hash}}; }

HookBlob blob_from_json(const json& j) {
  HookBlob b;
  b.id = j.at("id").get<Id>();
  b.kind = j.at("kind").get<std::string>();
  b.content_hash = j.at("content_hash").get<std::string>();
  return b;
}

}  // namespace spacetime::store
