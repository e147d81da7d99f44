#pragma once

// The trace database: in-memory tables behind a reader/writer lock, with
// optional SQLite persistence.
//
// Writers: exactly one at a time (take writer_lock()). Value rows (payloads,
// objects, versions, code, hook blobs) are appended as they are interned;
// call trees (calls + snapshots + events) are appended atomically by
// commit(), so readers never observe a partially recorded call.

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "spacetime/store/types.hpp"

namespace spacetime::store {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kFormatVersion = 1;

// Whole-database copy, every table ordered by id (payloads by hash).
struct Tables {
  std::vector<Session> sessions;
  std::vector<CallRecord> calls;
  std::vector<SnapshotRecord> snapshots;
  std::vector<EventRecord> events;
  std::vector<StoredObject> objects;
  std::vector<ObjectVersion> versions;
  std::vector<Payload> payloads;
  std::vector<CodeVersion> code_versions;
  std::vector<HookBlob> hook_blobs;
};

struct VersionInput {
  std::string kind;
  std::string payload;
  std::string hash;  // content_hash(kind, payload)
  std::vector<Id> elements;
};

struct IdentityKey {
  Id session = 0;
  std::uint64_t runtime_id = 0;
  std::optional<Id> first_seen;
};

struct CommitBatch {
  std::vector<CallRecord> calls;
  std::vector<SnapshotRecord> snapshots;
  std::vector<EventRecord> events;
};

class Store {
 public:
  // Opens (or creates) a SQLite-backed store. The parent directory must exist.
  static std::unique_ptr<Store> open(const std::string& path);
  static std::unique_ptr<Store> in_memory();
  // Validates referential integrity; throws StoreError naming the bad ref.
  static std::unique_ptr<Store> from_tables(Tables tables);

  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const std::string& path() const { return path_; }
  bool file_backed() const { return !path_.empty(); }

  // Writes rows not yet persisted. No-op for in-memory stores.
  void flush();
  // Writes the full database into a new SQLite file at `path`.
  void persist_to(const std::string& path) const;

  // ---- writer side -------------------------------------------------------
  std::unique_lock<std::mutex> writer_lock() { return std::unique_lock<std::mutex>(writer_mutex_); }
  std::unique_lock<std::mutex> try_writer_lock() {
    return std::unique_lock<std::mutex>(writer_mutex_, std::try_to_lock);
  }

  // Returns the payload hash; stores the payload only once per hash.
  std::string put_payload(std::string_view kind, std::string_view data);
  // v.hash must be content_hash(v.kind, v.payload); it is trusted, not recomputed.
  Id intern_version(const VersionInput& v, const std::optional<IdentityKey>& identity = std::nullopt);
  Id intern_code(const std::string& function, const std::string& source_text, const std::vector<int>& line_map);
  Id intern_blob(const std::string& kind, std::string_view bytes);

  Id begin_session(Session s);
  void update_session(const Session& s);

  Id reserve_call_id();
  Id reserve_snapshot_id();
  Id reserve_event_id();
  void commit(CommitBatch batch);

  // Called after each commit, once per committed call, outside the lock.
  int subscribe(std::function<void(const CallRecord&)> fn);
  void unsubscribe(int token);

  // ---- reader side -------------------------------------------------------
  std::vector<Session> sessions() const;
  std::optional<Session> session(Id id) const;
  std::vector<CallRecord> calls(std::optional<Id> session = std::nullopt,
                                const std::optional<std::string>& function = std::nullopt) const;
  std::optional<CallRecord> call(Id id) const;
  std::size_t call_count(Id session) const;
  std::vector<SnapshotRecord> snapshots(Id call) const;
  std::optional<SnapshotRecord> snapshot(Id id) const;
  std::vector<EventRecord> events(Id call) const;  // ordered by seq
  std::optional<ObjectVersion> version(Id id) const;
  std::optional<Payload> payload(const std::string& hash) const;
  std::optional<StoredObject> object(Id id) const;
  std::vector<ObjectVersion> versions_of(Id object) const;
  std::optional<CodeVersion> code(Id id) const;
  std::vector<CodeVersion> code_versions(const std::optional<std::string>& function = std::nullopt) const;
  std::optional<HookBlob> blob(Id id) const;
  TableCounts counts() const;
  Tables dump() const;

 private:
  std::string put_payload(std::string hash, std::string_view kind, std::string_view data);
  Store() = default;
  void index_all();

  mutable std::shared_mutex mutex_;
  std::mutex writer_mutex_;
  std::string path_;

  Tables t_;
  std::unordered_map<std::string, std::size_t> payload_index_;
  std::unordered_map<std::string, Id> free_versions_;  // hash -> id (object-less)
  std::map<std::pair<Id, std::uint64_t>, Id> objects_by_runtime_;
  std::map<std::pair<Id, std::string>, Id> object_versions_by_hash_;
  std::unordered_map<Id, std::vector<Id>> versions_by_object_;
  std::map<std::pair<std::string, std::string>, Id> code_index_;
  std::unordered_map<std::string, Id> blob_index_;
  std::unordered_map<Id, std::vector<Id>> calls_by_session_;
  std::unordered_map<Id, std::vector<Id>> snapshots_by_call_;
  std::unordered_map<Id, std::vector<Id>> events_by_call_;

  Id reserved_calls_ = 0, reserved_snapshots_ = 0, reserved_events_ = 0;

  struct Persisted {
    std::size_t calls = 0, snapshots = 0, events = 0, objects = 0, versions = 0, payloads = 0, code = 0,
                blobs = 0;
  } persisted_;

  std::mutex listeners_mutex_;
  std::map<int, std::function<void(const CallRecord&)>> listeners_;
  int next_token_ = 1;
};

}  // namespace spacetime::store
