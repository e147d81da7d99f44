#pragma once

// JSON form of every row type. Shared by the interchange stream, the SQLite
// columns that hold structured data, and the HTTP API.

#include <json.hpp>

#include "spacetime/store/types.hpp"

namespace spacetime::store {

using nlohmann::json;

json to_json(const Session& s);
json to_json(const CallRecord& c);
json to_json(const SnapshotRecord& s);
json to_json(const EventRecord& e);
json to_json(const StoredObject& o);
json to_json(const ObjectVersion& v);
json to_json(const Payload& p);
json to_json(const CodeVersion& c);
json to_json(const HookBlob& b);

// Each throws json::exception (or std::invalid_argument) on malformed input.
Session session_from_json(const json& j);
CallRecord call_from_json(const json& j);
SnapshotRecord snapshot_from_json(const json& j);
EventRecord event_from_json(const json& j);
StoredObject object_from_json(const json& j);
ObjectVersion version_from_json(const json& j);
Payload payload_from_json(const json& j);
CodeVersion code_from_json(const json& j);
HookBlob blob_from_json(const json& j);

json varmap_to_json(const VarMap& m);
VarMap varmap_from_json(const json& j);

}  // namespace spacetime::store
