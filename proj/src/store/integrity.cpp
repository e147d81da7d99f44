#include "spacetime/store/integrity.hpp"

#include <algorithm>
#include <unordered_set>

#include "spacetime/common/sha256.hpp"
#include "spacetime/store/canonical.hpp"

namespace spacetime::store {

namespace {

template <typename T>
std::unordered_set<Id> ids_of(const std::vector<T>& rows, const char* table) {
  std::unordered_set<Id> out;
  Id last = 0;
  for (const auto& r : rows) {
    if (r.id <= last) throw IntegrityError(table, r.id, "ids must be positive and strictly increasing");
    last = r.id;
    out.insert(r.id);
  }
  return out;
}

}  // namespace

void check_integrity(const Tables& t) {
  auto sessions = ids_of(t.sessions, "sessions");
  auto calls = ids_of(t.calls, "calls");
  auto snapshots = ids_of(t.snapshots, "snapshots");
  ids_of(t.events, "events");
  auto objects = ids_of(t.objects, "objects");
  auto versions = ids_of(t.versions, "object_versions");
  auto code = ids_of(t.code_versions, "code_versions");
  auto blobs = ids_of(t.hook_blobs, "hook_blobs");

  std::unordered_set<std::string> payloads;
  for (const auto& p : t.payloads) {
    if (content_hash(p.kind, p.data) != p.hash) throw IntegrityError("payloads", 0, "hash mismatch for " + p.hash);
    if (!payloads.insert(p.hash).second) throw IntegrityError("payloads", 0, "duplicate payload " + p.hash);
  }

  auto need = [](bool ok, const char* table, Id id, const std::string& what) {
    if (!ok) throw IntegrityError(table, id, "dangling reference " + what);
  };
  auto need_version = [&](Id ref, const char* table, Id id, const std::string& field) {
    need(versions.count(ref) != 0, table, id, field + " -> object_versions[" + std::to_string(ref) + "]");
  };
  auto need_vars = [&](const VarMap& m, const char* table, Id id, const char* field) {
    for (const auto& [name, ref] : m) need_version(ref, table, id, std::string(field) + "." + name);
  };

  for (const auto& s : t.sessions) {
    if (s.parent_session.has_value() != s.parent_offset.has_value())
      throw IntegrityError("sessions", s.id, "parent_offset must be present iff parent_session is");
    if (s.parent_session)
      need(sessions.count(*s.parent_session) != 0, "sessions", s.id,
           "parent_session -> sessions[" + std::to_string(*s.parent_session) + "]");
    if (s.program_code)
      need(code.count(*s.program_code) != 0, "sessions", s.id,
           "program_code -> code_versions[" + std::to_string(*s.program_code) + "]");
  }
  for (const auto& c : t.calls) {
    need(sessions.count(c.session) != 0, "calls", c.id, "session -> sessions[" + std::to_string(c.session) + "]");
    need(code.count(c.code) != 0, "calls", c.id, "code -> code_versions[" + std::to_string(c.code) + "]");
    if (c.parent_call)
      need(calls.count(*c.parent_call) != 0, "calls", c.id,
           "parent_call -> calls[" + std::to_string(*c.parent_call) + "]");
    need_vars(c.locals, "calls", c.id, "locals");
    need_vars(c.globals, "calls", c.id, "globals");
    if (c.return_value) need_version(*c.return_value, "calls", c.id, "return_value");
    if (c.hook_meta)
      need(blobs.count(*c.hook_meta) != 0, "calls", c.id,
           "hook_meta -> hook_blobs[" + std::to_string(*c.hook_meta) + "]");
  }
  for (const auto& s : t.snapshots) {
    need(calls.count(s.call) != 0, "snapshots", s.id, "call -> calls[" + std::to_string(s.call) + "]");
    need_vars(s.locals, "snapshots", s.id, "locals");
    need_vars(s.globals, "snapshots", s.id, "globals");
  }
  for (const auto& e : t.events) {
    need(calls.count(e.call) != 0, "events", e.id, "call -> calls[" + std::to_string(e.call) + "]");
    if (e.snapshot)
      need(snapshots.count(*e.snapshot) != 0, "events", e.id,
           "snapshot -> snapshots[" + std::to_string(*e.snapshot) + "]");
    for (std::size_t i = 0; i < e.args.size(); ++i) need_version(e.args[i], "events", e.id, "args." + std::to_string(i));
    need_version(e.return_value, "events", e.id, "return_value");
  }
  for (const auto& o : t.objects) {
    need(sessions.count(o.session) != 0, "objects", o.id, "session -> sessions[" + std::to_string(o.session) + "]");
    if (o.first_seen)
      need(calls.count(*o.first_seen) != 0, "objects", o.id,
           "first_seen -> calls[" + std::to_string(*o.first_seen) + "]");
  }
  for (const auto& v : t.versions) {
    if (!is_value_kind(v.kind)) throw IntegrityError("object_versions", v.id, "unknown kind '" + v.kind + "'");
    if (v.object)
      need(objects.count(*v.object) != 0, "object_versions", v.id,
           "object -> objects[" + std::to_string(*v.object) + "]");
    need(payloads.count(v.content_hash) != 0, "object_versions", v.id, "content_hash -> payloads[" + v.content_hash + "]");
    for (std::size_t i = 0; i < v.elements.size(); ++i)
      need_version(v.elements[i], "object_versions", v.id, "elements." + std::to_string(i));
  }
  for (const auto& c : t.code_versions)
    if (sha256_hex(c.source_text) != c.text_hash) throw IntegrityError("code_versions", c.id, "text_hash mismatch");
  for (const auto& b : t.hook_blobs)
    need(payloads.count(b.content_hash) != 0, "hook_blobs", b.id, "content_hash -> payloads[" + b.content_hash + "]");
}

}  // namespace spacetime::store
