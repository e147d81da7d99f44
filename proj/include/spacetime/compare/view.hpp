#pragma once

// Materialized views of one recorded state, and JSON renderings of views,
// diffs and alignments for the CLI and the service.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spacetime/compare/compare.hpp"

namespace spacetime::compare {

struct VariableView {
  std::string name;
  std::string scope;  // local | global | return
  store::Id version = 0;
  std::string hash;
  std::string rendered;  // guest literal, or <skipped: reason>
  bool skipped = false;
};

struct EventView {
  std::string callable;
  std::int64_t seq = 0;
  std::optional<store::Id> snapshot;
  std::vector<VariableView> args;
  VariableView return_value;
};

struct StateView {
  StateRef ref;
  store::Id session = 0;
  store::Id call = 0;
  std::string function;
  std::int64_t ordinal = 0;  // call ordinal in its session
  std::string granularity;
  std::optional<int> line;                   // snapshots only
  std::optional<std::int64_t> snapshot_ordinal;
  std::vector<VariableView> variables;       // V
  std::optional<VariableView> return_value;  // calls only
  std::vector<EventView> events;             // E
  store::Id code = 0;                        // C
  std::string source;
  std::optional<store::Id> hook_blob;
  std::string hook_kind;
  std::string error;
};

StateView view(const store::Store& store, StateRef ref);

using json = nlohmann::json;

json to_json(const StateRef& ref);
json to_json(const StateView& v);
json to_json(const StateDiff& d);
json to_json(const LineMapping& m);
json to_json(const std::vector<AlignedPair>& pairs);

// Plain-text rendering used by the CLI.
std::string format_view(const StateView& v);
std::string format_diff(const StateDiff& d);

}  // namespace spacetime::compare
