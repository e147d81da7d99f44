#include "spacetime/store/store.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <tuple>

#include "spacetime/common/sha256.hpp"
#include "spacetime/store/canonical.hpp"
#include "spacetime/store/integrity.hpp"
#include "sqlite_file.hpp"

namespace spacetime::store {

namespace {

template <typename T>
const T* find_row(const std::vector<T>& rows, Id id) {
  auto it = std::lower_bound(rows.begin(), rows.end(), id, [](const T& r, Id v) { return r.id < v; });
  return it != rows.end() && it->id == id ? &*it : nullptr;
}

template <typename T>
Id last_id(const std::vector<T>& rows) {
  return rows.empty() ? 0 : rows.back().id;
}

template <typename T>
std::vector<T> tail(const std::vector<T>& rows, std::size_t from) {
  return std::vector<T>(rows.begin() + static_cast<std::ptrdiff_t>(from), rows.end());
}

}  // namespace

std::unique_ptr<Store> Store::in_memory() { return std::unique_ptr<Store>(new Store()); }

std::unique_ptr<Store> Store::open(const std::string& path) {
  SqliteFile file(path, /*create=*/true);
  std::unique_ptr<Store> store = from_tables(file.load());
  store->path_ = path;
  const Tables& t = store->t_;
  store->persisted_ = {t.calls.size(),    t.snapshots.size(), t.events.size(),        t.objects.size(),
                       t.versions.size(), t.payloads.size(),  t.code_versions.size(), t.hook_blobs.size()};
  return store;
}

std::unique_ptr<Store> Store::from_tables(Tables tables) {
  check_integrity(tables);
  auto store = std::unique_ptr<Store>(new Store());
  store->t_ = std::move(tables);
  store->index_all();
  return store;
}

Store::~Store() = default;

void Store::index_all() {
  for (std::size_t i = 0; i < t_.payloads.size(); ++i) payload_index_.emplace(t_.payloads[i].hash, i);
  for (const auto& o : t_.objects) objects_by_runtime_[{o.session, o.runtime_id}] = o.id;
  for (const auto& v : t_.versions) {
    if (v.object) {
      object_versions_by_hash_.emplace(std::make_pair(*v.object, v.content_hash), v.id);
      versions_by_object_[*v.object].push_back(v.id);
    } else {
      free_versions_.emplace(v.content_hash, v.id);
    }
  }
  for (const auto& c : t_.code_versions) code_index_.emplace(std::make_pair(c.function, c.text_hash), c.id);
  for (const auto& b : t_.hook_blobs) blob_index_.emplace(b.content_hash, b.id);
  for (const auto& c : t_.calls) calls_by_session_[c.session].push_back(c.id);
  for (const auto& s : t_.snapshots) snapshots_by_call_[s.call].push_back(s.id);
  for (const auto& e : t_.events) events_by_call_[e.call].push_back(e.id);
  reserved_calls_ = last_id(t_.calls);
  reserved_snapshots_ = last_id(t_.snapshots);
  reserved_events_ = last_id(t_.events);
}

void Store::flush() {
  if (!file_backed()) return;
  Tables delta;
  {
    std::shared_lock lock(mutex_);
    delta.sessions = t_.sessions;
    delta.calls = tail(t_.calls, persisted_.calls);
    delta.snapshots = tail(t_.snapshots, persisted_.snapshots);
    delta.events = tail(t_.events, persisted_.events);
    delta.objects = tail(t_.objects, persisted_.objects);
    delta.versions = tail(t_.versions, persisted_.versions);
    delta.payloads = tail(t_.payloads, persisted_.payloads);
    delta.code_versions = tail(t_.code_versions, persisted_.code);
    delta.hook_blobs = tail(t_.hook_blobs, persisted_.blobs);
  }
  SqliteFile file(path_, /*create=*/false);
  file.append(delta);
  persisted_.calls += delta.calls.size();
  persisted_.snapshots += delta.snapshots.size();
  persisted_.events += delta.events.size();
  persisted_.objects += delta.objects.size();
  persisted_.versions += delta.versions.size();
  persisted_.payloads += delta.payloads.size();
  persisted_.code += delta.code_versions.size();
  persisted_.blobs += delta.hook_blobs.size();
}

void Store::persist_to(const std::string& path) const {
  Tables all = dump();
  SqliteFile file(path, /*create=*/true);
  if (!file.empty()) throw StoreError("refusing to persist into non-empty store " + path);
  file.append(all);
}

std::string Store::put_payload(std::string_view kind, std::string_view data) {
  return put_payload(content_hash(kind, data), kind, data);
}

std::string Store::put_payload(std::string hash, std::string_view kind, std::string_view data) {
  if (payload_index_.count(hash)) return hash;
  std::unique_lock lock(mutex_);
  payload_index_.emplace(hash, t_.payloads.size());
  t_.payloads.push_back(Payload{hash, std::string(kind), std::string(data)});
  return hash;
}

Id Store::intern_version(const VersionInput& v, const std::optional<IdentityKey>& identity) {
  if (!identity) {
    if (auto it = free_versions_.find(v.hash); it != free_versions_.end()) return it->second;
  }
  std::optional<Id> object;
  if (identity) {
    auto key = std::make_pair(identity->session, identity->runtime_id);
    if (auto it = objects_by_runtime_.find(key); it != objects_by_runtime_.end()) {
      object = it->second;
      if (auto vit = object_versions_by_hash_.find({*object, v.hash}); vit != object_versions_by_hash_.end())
        return vit->second;
    }
  }

  put_payload(v.hash, v.kind, v.payload);
  std::unique_lock lock(mutex_);
  if (identity && !object) {
    StoredObject o;
    o.id = last_id(t_.objects) + 1;
    o.session = identity->session;
    o.runtime_id = identity->runtime_id;
    o.first_seen = identity->first_seen;
    t_.objects.push_back(o);
    objects_by_runtime_.emplace(std::make_pair(o.session, o.runtime_id), o.id);
    object = o.id;
  }
  ObjectVersion row;
  row.id = last_id(t_.versions) + 1;
  row.object = object;
  row.content_hash = v.hash;
  row.kind = v.kind;
  row.elements = v.elements;
  t_.versions.push_back(row);
  if (object) {
    object_versions_by_hash_.emplace(std::make_pair(*object, v.hash), row.id);
    versions_by_object_[*object].push_back(row.id);
  } else {
    free_versions_.emplace(v.hash, row.id);
  }
  return row.id;
}

Id Store::intern_code(const std::string& function, const std::string& source_text, const std::vector<int>& line_map) {
  std::string text_hash = sha256_hex(source_text);
  if (auto it = code_index_.find({function, text_hash}); it != code_index_.end()) return it->second;
  std::unique_lock lock(mutex_);
  CodeVersion c;
  c.id = last_id(t_.code_versions) + 1;
  c.function = function;
  c.source_text = source_text;
  c.text_hash = text_hash;
  c.line_map = line_map;
  t_.code_versions.push_back(c);
  code_index_.emplace(std::make_pair(function, text_hash), c.id);
  return c.id;
}

Id Store::intern_blob(const std::string& kind, std::string_view bytes) {
  std::string hash = put_payload(kind, bytes);
  if (auto it = blob_index_.find(hash); it != blob_index_.end()) return it->second;
  std::unique_lock lock(mutex_);
  HookBlob b{last_id(t_.hook_blobs) + 1, kind, hash};
  t_.hook_blobs.push_back(b);
  blob_index_.emplace(hash, b.id);
  return b.id;
}

Id Store::begin_session(Session s) {
  std::unique_lock lock(mutex_);
  s.id = last_id(t_.sessions) + 1;
  if (s.started_at == 0)
    s.started_at = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  t_.sessions.push_back(s);
  return s.id;
}

void Store::update_session(const Session& s) {
  std::unique_lock lock(mutex_);
  auto it = std::lower_bound(t_.sessions.begin(), t_.sessions.end(), s.id,
                             [](const Session& r, Id v) { return r.id < v; });
  if (it == t_.sessions.end() || it->id != s.id) throw StoreError("unknown session " + std::to_string(s.id));
  *it = s;
}

Id Store::reserve_call_id() { return ++reserved_calls_; }
Id Store::reserve_snapshot_id() { return ++reserved_snapshots_; }
Id Store::reserve_event_id() { return ++reserved_events_; }

void Store::commit(CommitBatch batch) {
  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::sort(batch.calls.begin(), batch.calls.end(), by_id);
  std::sort(batch.snapshots.begin(), batch.snapshots.end(), by_id);
  std::sort(batch.events.begin(), batch.events.end(), by_id);
  {
    std::unique_lock lock(mutex_);
    auto check = [](Id last, Id next, const char* table) {
      if (next <= last) throw StoreError(std::string("commit out of order in ") + table);
    };
    for (auto& c : batch.calls) {
      check(last_id(t_.calls), c.id, "calls");
      calls_by_session_[c.session].push_back(c.id);
      t_.calls.push_back(c);
    }
    for (auto& s : batch.snapshots) {
      check(last_id(t_.snapshots), s.id, "snapshots");
      snapshots_by_call_[s.call].push_back(s.id);
      t_.snapshots.push_back(std::move(s));
    }
    for (auto& e : batch.events) {
      check(last_id(t_.events), e.id, "events");
      events_by_call_[e.call].push_back(e.id);
      t_.events.push_back(std::move(e));
    }
  }
  std::vector<std::function<void(const CallRecord&)>> fns;
  {
    std::lock_guard lock(listeners_mutex_);
    for (const auto& [_, fn] : listeners_) fns.push_back(fn);
  }
  for (const auto& c : batch.calls)
    for (const auto& fn : fns) fn(c);
}

int Store::subscribe(std::function<void(const CallRecord&)> fn) {
  std::lock_guard lock(listeners_mutex_);
  int token = next_token_++;
  listeners_.emplace(token, std::move(fn));
  return token;
}

void Store::unsubscribe(int token) {
  std::lock_guard lock(listeners_mutex_);
  listeners_.erase(token);
}

std::vector<Session> Store::sessions() const {
  std::shared_lock lock(mutex_);
  return t_.sessions;
}

std::optional<Session> Store::session(Id id) const {
  std::shared_lock lock(mutex_);
  const Session* s = find_row(t_.sessions, id);
  return s ? std::optional<Session>(*s) : std::nullopt;
}

std::vector<CallRecord> Store::calls(std::optional<Id> session, const std::optional<std::string>& function) const {
  std::shared_lock lock(mutex_);
  std::vector<CallRecord> out;
  auto want = [&](const CallRecord& c) { return !function || c.function == *function; };
  if (session) {
    auto it = calls_by_session_.find(*session);
    if (it == calls_by_session_.end()) return out;
    for (Id id : it->second) {
      const CallRecord* c = find_row(t_.calls, id);
      if (want(*c)) out.push_back(*c);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.ordinal < b.ordinal; });
    return out;
  }
  for (const auto& c : t_.calls)
    if (want(c)) out.push_back(c);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.session, a.ordinal) < std::tie(b.session, b.ordinal);
  });
  return out;
}

std::optional<CallRecord> Store::call(Id id) const {
  std::shared_lock lock(mutex_);
  const CallRecord* c = find_row(t_.calls, id);
  return c ? std::optional<CallRecord>(*c) : std::nullopt;
}

std::size_t Store::call_count(Id session) const {
  std::shared_lock lock(mutex_);
  auto it = calls_by_session_.find(session);
  return it == calls_by_session_.end() ? 0 : it->second.size();
}

std::vector<SnapshotRecord> Store::snapshots(Id call) const {
  std::shared_lock lock(mutex_);
  std::vector<SnapshotRecord> out;
  auto it = snapshots_by_call_.find(call);
  if (it == snapshots_by_call_.end()) return out;
  for (Id id : it->second) out.push_back(*find_row(t_.snapshots, id));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.ordinal < b.ordinal; });
  return out;
}

std::optional<SnapshotRecord> Store::snapshot(Id id) const {
  std::shared_lock lock(mutex_);
  const SnapshotRecord* s = find_row(t_.snapshots, id);
  return s ? std::optional<SnapshotRecord>(*s) : std::nullopt;
}

std::vector<EventRecord> Store::events(Id call) const {
  std::shared_lock lock(mutex_);
  std::vector<EventRecord> out;
  auto it = events_by_call_.find(call);
  if (it == events_by_call_.end()) return out;
  for (Id id : it->second) out.push_back(*find_row(t_.events, id));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
  return out;
}

std::optional<ObjectVersion> Store::version(Id id) const {
  std::shared_lock lock(mutex_);
  const ObjectVersion* v = find_row(t_.versions, id);
  return v ? std::optional<ObjectVersion>(*v) : std::nullopt;
}

std::optional<Payload> Store::payload(const std::string& hash) const {
  std::shared_lock lock(mutex_);
  auto it = payload_index_.find(hash);
  if (it == payload_index_.end()) return std::nullopt;
  return t_.payloads[it->second];
}

std::optional<StoredObject> Store::object(Id id) const {
  std::shared_lock lock(mutex_);
  const StoredObject* o = find_row(t_.objects, id);
  return o ? std::optional<StoredObject>(*o) : std::nullopt;
}

std::vector<ObjectVersion> Store::versions_of(Id object) const {
  std::shared_lock lock(mutex_);
  std::vector<ObjectVersion> out;
  auto it = versions_by_object_.find(object);
  if (it == versions_by_object_.end()) return out;
  for (Id id : it->second) out.push_back(*find_row(t_.versions, id));
  return out;
}

std::optional<CodeVersion> Store::code(Id id) const {
  std::shared_lock lock(mutex_);
  const CodeVersion* c = find_row(t_.code_versions, id);
  return c ? std::optional<CodeVersion>(*c) : std::nullopt;
}

std::vector<CodeVersion> Store::code_versions(const std::optional<std::string>& function) const {
  std::shared_lock lock(mutex_);
  std::vector<CodeVersion> out;
  for (const auto& c : t_.code_versions)
    if (!function || c.function == *function) out.push_back(c);
  return out;
}

std::optional<HookBlob> Store::blob(Id id) const {
  std::shared_lock lock(mutex_);
  const HookBlob* b = find_row(t_.hook_blobs, id);
  return b ? std::optional<HookBlob>(*b) : std::nullopt;
}

TableCounts Store::counts() const {
  std::shared_lock lock(mutex_);
  TableCounts c;
  c.sessions = t_.sessions.size();
  c.calls = t_.calls.size();
  c.snapshots = t_.snapshots.size();
  c.events = t_.events.size();
  c.objects = t_.objects.size();
  c.object_versions = t_.versions.size();
  c.payloads = t_.payloads.size();
  c.code_versions = t_.code_versions.size();
  c.hook_blobs = t_.hook_blobs.size();
  return c;
}

Tables Store::dump() const {
  std::shared_lock lock(mutex_);
  Tables out = t_;
  std::sort(out.payloads.begin(), out.payloads.end(), [](const Payload& a, const Payload& b) { return a.hash < b.hash; });
  return out;
}

}  // namespace spacetime::store
