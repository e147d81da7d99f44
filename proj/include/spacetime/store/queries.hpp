#pragma once

// Read-side helpers: turning stored versions back into guest values, and the
// query shortcuts used by tools (calling context, per-call trace, state
// hashes).

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "spacetime/lang/value.hpp"
#include "spacetime/store/store.hpp"

namespace spacetime::store {

struct Materialized {
  lang::Value value;
  bool skipped = false;
  std::string reason;  // for skipped values
};

// Rebuilds guest values. Versions of the same stored object materialize to
// the same heap object, so aliasing survives the round trip. Skipped
// elements nested inside containers become nil.
class Materializer {
 public:
  Materializer(const Store& store, lang::Heap& heap) : store_(store), heap_(heap) {}

  Materialized get(Id version);
  std::map<std::string, Materialized> get_all(const VarMap& vars);

 private:
  lang::Value build(Id version, bool& skipped, std::string& reason);

  const Store& store_;
  lang::Heap& heap_;
  std::unordered_map<Id, lang::Value> by_object_;
  std::unordered_map<Id, lang::Value> by_version_;
};

// Guest-literal rendering of a stored version; skipped values render as
// <skipped: reason>.
std::string render_version(const Store& store, Id version);

struct CallingContext {
  std::map<std::string, Materialized> locals;
  std::map<std::string, Materialized> globals;
  CodeVersion code;
};

CallingContext get_calling_context(const Store& store, Id call, lang::Heap& heap);

struct TraceStep {
  SnapshotRecord snapshot;
  std::vector<EventRecord> events;  // events attributed to this snapshot
};

std::vector<TraceStep> get_trace(const Store& store, Id call);

// Digest of everything a call's state holds: code, locals, globals, return
// value, hook blob, events, and line snapshots. Built from content hashes
// only, so it is comparable across sessions.
std::string call_state_hash(const Store& store, Id call);
std::vector<std::string> session_state_hashes(const Store& store, Id session);

// Thrown for unknown ids.
class NotFound : public StoreError {
 public:
  using StoreError::StoreError;
};

CallRecord require_call(const Store& store, Id id);
SnapshotRecord require_snapshot(const Store& store, Id id);
Session require_session(const Store& store, Id id);
CodeVersion require_code(const Store& store, Id id);

}  // namespace spacetime::store
