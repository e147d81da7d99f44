#include "spacetime/store/interchange.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "spacetime/common/sha256.hpp"
#include "spacetime/store/canonical.hpp"
#include "spacetime/store/integrity.hpp"
#include "spacetime/store/records.hpp"

namespace spacetime::store {

const std::vector<std::string> kTableOrder = {"sessions",        "code_versions", "payloads",
                                              "objects",         "object_versions", "hook_blobs",
                                              "calls",           "snapshots",     "events"};

namespace {

std::string line_of(json j, const std::string& table) {
  j["table"] = table;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

template <typename T>
std::vector<T> keep(const std::vector<T>& rows, const std::set<Id>& ids) {
  std::vector<T> out;
  for (const auto& r : rows)
    if (ids.count(r.id)) out.push_back(r);
  return out;
}

// Restricts `all` to the given sessions, their ancestors, and everything
// those rows reference.
Tables select(const Tables& all, std::vector<Id> wanted) {
  std::set<Id> sessions;
  std::map<Id, const Session*> by_id;
  for (const auto& s : all.sessions) by_id[s.id] = &s;
  while (!wanted.empty()) {
    Id id = wanted.back();
    wanted.pop_back();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw StoreError("unknown session " + std::to_string(id));
    if (!sessions.insert(id).second) continue;
    if (it->second->parent_session) wanted.push_back(*it->second->parent_session);
  }

  Tables t;
  t.sessions = keep(all.sessions, sessions);
  std::set<Id> calls, versions, code, blobs, objects;
  for (const auto& s : t.sessions)
    if (s.program_code) code.insert(*s.program_code);
  for (const auto& c : all.calls) {
    if (!sessions.count(c.session)) continue;
    t.calls.push_back(c);
    calls.insert(c.id);
    code.insert(c.code);
    for (const auto& [_, v] : c.locals) versions.insert(v);
    for (const auto& [_, v] : c.globals) versions.insert(v);
    if (c.return_value) versions.insert(*c.return_value);
    if (c.hook_meta) blobs.insert(*c.hook_meta);
  }
  for (const auto& s : all.snapshots) {
    if (!calls.count(s.call)) continue;
    t.snapshots.push_back(s);
    for (const auto& [_, v] : s.locals) versions.insert(v);
    for (const auto& [_, v] : s.globals) versions.insert(v);
  }
  for (const auto& e : all.events) {
    if (!calls.count(e.call)) continue;
    t.events.push_back(e);
    versions.insert(e.args.begin(), e.args.end());
    versions.insert(e.return_value);
  }
  for (const auto& o : all.objects)
    if (sessions.count(o.session)) objects.insert(o.id);
  for (const auto& v : all.versions)
    if (v.object && objects.count(*v.object)) versions.insert(v.id);

  // Close over container elements (elements always precede their container).
  std::map<Id, const ObjectVersion*> vby;
  for (const auto& v : all.versions) vby[v.id] = &v;
  std::vector<Id> stack(versions.begin(), versions.end());
  while (!stack.empty()) {
    Id id = stack.back();
    stack.pop_back();
    auto it = vby.find(id);
    if (it == vby.end()) continue;
    for (Id e : it->second->elements)
      if (versions.insert(e).second) stack.push_back(e);
  }
  t.versions = keep(all.versions, versions);
  for (const auto& v : t.versions)
    if (v.object) objects.insert(*v.object);
  t.objects = keep(all.objects, objects);
  t.code_versions = keep(all.code_versions, code);
  t.hook_blobs = keep(all.hook_blobs, blobs);

  std::set<std::string> hashes;
  for (const auto& v : t.versions) hashes.insert(v.content_hash);
  for (const auto& b : t.hook_blobs) hashes.insert(b.content_hash);
  for (const auto& p : all.payloads)
    if (hashes.count(p.hash)) t.payloads.push_back(p);
  return t;
}

std::string manifest_program_hash(const Tables& t) {
  std::set<std::string> hashes;
  for (const auto& s : t.sessions) hashes.insert(s.program_hash);
  std::string out;
  for (const auto& h : hashes) out += (out.empty() ? "" : ",") + h;
  return out;
}

template <typename T>
void emit(std::map<std::string, std::vector<std::string>>& out, const std::string& table, const std::vector<T>& rows) {
  auto& lines = out[table];
  for (const auto& r : rows) lines.push_back(line_of(to_json(r), table));
}

std::map<std::string, std::vector<std::string>> encode(const Tables& t) {
  std::map<std::string, std::vector<std::string>> out;
  emit(out, "sessions", t.sessions);
  emit(out, "code_versions", t.code_versions);
  emit(out, "payloads", t.payloads);
  emit(out, "objects", t.objects);
  emit(out, "object_versions", t.versions);
  emit(out, "hook_blobs", t.hook_blobs);
  emit(out, "calls", t.calls);
  emit(out, "snapshots", t.snapshots);
  emit(out, "events", t.events);
  return out;
}

}  // namespace

void export_stream(const Store& store, std::ostream& out, const std::optional<std::vector<Id>>& sessions) {
  Tables all = store.dump();
  Tables t = sessions ? select(all, *sessions) : std::move(all);
  std::sort(t.payloads.begin(), t.payloads.end(), [](const Payload& a, const Payload& b) { return a.hash < b.hash; });
  auto lines = encode(t);

  json counts = json::object();
  for (const auto& table : kTableOrder) counts[table] = lines[table].size();
  json manifest{{"record", "manifest"},
                {"format_version", kFormatVersion},
                {"program_hash", manifest_program_hash(t)},
                {"counts", counts}};
  out << manifest.dump() << '\n';
  for (const auto& table : kTableOrder)
    for (const auto& line : lines[table]) out << line << '\n';
}

std::string export_string(const Store& store, const std::optional<std::vector<Id>>& sessions) {
  std::ostringstream out;
  export_stream(store, out, sessions);
  return out.str();
}

std::unique_ptr<Store> import_stream(std::istream& in) {
  std::string line;
  std::size_t index = 0;
  auto fail = [&](const std::string& message) -> StoreError {
    return StoreError("malformed stream at record " + std::to_string(index) + ": " + message);
  };

  json manifest;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++index;
    try {
      manifest = json::parse(line);
    } catch (const json::exception& e) {
      throw fail(e.what());
    }
    break;
  }
  if (index == 0) throw StoreError("malformed stream: missing manifest");
  if (!manifest.is_object() || manifest.value("record", "") != "manifest") throw fail("first record must be the manifest");
  if (manifest.value("format_version", -1) != kFormatVersion)
    throw fail("unsupported format_version " + manifest.value("format_version", json()).dump());

  Tables t;
  std::map<std::pair<std::string, Id>, std::size_t> where;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++index;
    try {
      json j = json::parse(line);
      std::string table = j.at("table").get<std::string>();
      Id id = j.contains("id") ? j["id"].get<Id>() : 0;
      if (table == "sessions") t.sessions.push_back(session_from_json(j));
      else if (table == "calls") t.calls.push_back(call_from_json(j));
      else if (table == "snapshots") t.snapshots.push_back(snapshot_from_json(j));
      else if (table == "events") t.events.push_back(event_from_json(j));
      else if (table == "objects") t.objects.push_back(object_from_json(j));
      else if (table == "object_versions") t.versions.push_back(version_from_json(j));
      else if (table == "code_versions") t.code_versions.push_back(code_from_json(j));
      else if (table == "hook_blobs") t.hook_blobs.push_back(blob_from_json(j));
      else if (table == "payloads") {
        Payload p = payload_from_json(j);
        if (content_hash(p.kind, p.data) != p.hash) throw fail("payload hash mismatch for " + p.hash);
        t.payloads.push_back(std::move(p));
      } else {
        throw fail("unknown table '" + table + "'");
      }
      where[{table, id}] = index;
      ++seen[table];
    } catch (const StoreError&) {
      throw;
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
  }

  const json& counts = manifest.value("counts", json::object());
  for (const auto& table : kTableOrder) {
    std::size_t expected = counts.value(table, std::size_t{0});
    if (seen[table] != expected)
      throw StoreError("malformed stream: manifest lists " + std::to_string(expected) + " " + table + " records, found " +
                       std::to_string(seen[table]));
  }

  try {
    return Store::from_tables(std::move(t));
  } catch (const IntegrityError& e) {
    auto it = where.find({e.table(), e.id()});
    if (it == where.end()) throw StoreError(std::string("malformed stream: ") + e.what());
    index = it->second;
    throw fail(e.what());
  }
}

std::unique_ptr<Store> import_string(const std::string& text) {
  std::istringstream in(text);
  return import_stream(in);
}

std::map<std::string, std::string> table_digests(const Store& store) {
  Tables t = store.dump();
  auto lines = encode(t);
  std::map<std::string, std::string> out;
  for (const auto& table : kTableOrder) {
    std::string buf;
    for (const auto& l : lines[table]) buf += l + "\n";
    out[table] = sha256_hex(buf);
  }
  return out;
}

}  // namespace spacetime::store
