#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spacetime::store {

using Id = std::int64_t;

// Variable name -> ObjectVersion id. Skipped values are versions of kind
// `skipped`, so every captured name always has a ref.
using VarMap = std::map<std::string, Id>;

struct Session {
  Id id = 0;
  std::string label;
  std::int64_t started_at = 0;  // ms since epoch
  std::string program_hash;
  std::optional<Id> parent_session;
  std::optional<std::int64_t> parent_offset;
  std::string kind = "record";     // record | replay
  std::string status = "running";  // running | complete | failed
  std::optional<std::int64_t> failed_at;  // ordinal of the failing call
  std::string error;
  // Code version holding the whole program source (function "<program>"),
  // and the monitor specs in effect as JSON. Together they let a session be
  // replayed from the store alone.
  std::optional<Id> program_code;
  std::string monitor_config;
  bool operator==(const Session&) const = default;
};

struct CallRecord {
  Id id = 0;
  Id session = 0;
  std::int64_t ordinal = 0;
  std::string function;
  Id code = 0;
  std::optional<Id> parent_call;
  std::string granularity = "function";  // function | line
  VarMap locals;
  VarMap globals;
  std::optional<Id> return_value;
  std::optional<Id> hook_meta;
  std::string error;
  bool operator==(const CallRecord&) const = default;
};

struct SnapshotRecord {
  Id id = 0;
  Id call = 0;
  std::int64_t ordinal = 0;
  int line = 0;  // relative to the function's def line (def = 1)
  VarMap locals;
  VarMap globals;
  bool operator==(const SnapshotRecord&) const = default;
};

struct EventRecord {
  Id id = 0;
  Id call = 0;
  std::optional<Id> snapshot;
  std::string callable;
  std::int64_t seq = 0;
  std::vector<Id> args;
  Id return_value = 0;
  bool operator==(const EventRecord&) const = default;
};

struct StoredObject {
  Id id = 0;
  Id session = 0;
  std::uint64_t runtime_id = 0;
  std::optional<Id> first_seen;  // call id
  bool operator==(const StoredObject&) const = default;
};

struct ObjectVersion {
  Id id = 0;
  std::optional<Id> object;
  std::string content_hash;
  std::string kind;
  // Element versions for list/map, in payload order.
  std::vector<Id> elements;
  bool operator==(const ObjectVersion&) const = default;
};

struct Payload {
  std::string hash;
  std::string kind;
  std::string data;
  bool operator==(const Payload&) const = default;
};

struct CodeVersion {
  Id id = 0;
  std::string function;
  std::string source_text;
  std::string text_hash;
  std::vector<int> line_map;  // statement lines, relative
  bool operator==(const CodeVersion&) const = default;
};

struct HookBlob {
  Id id = 0;
  std::string kind;
  std::string content_hash;
  bool operator==(const HookBlob&) const = default;
};

struct TableCounts {
  std::size_t sessions = 0, calls = 0, snapshots = 0, events = 0, objects = 0, object_versions = 0,
              payloads = 0, code_versions = 0, hook_blobs = 0;
};

}  // namespace spacetime::store
