#pragma once

// Re-execution of recorded calls, sessions and snapshots under a ReplayPlan:
// which steps to replay, which globals to migrate from the trace, which
// tracked callables to serve from the recording, and which code to run.

#include <deque>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "spacetime/lang/builtins.hpp"
#include "spacetime/monitor/recorder.hpp"
#include "spacetime/store/store.hpp"

namespace spacetime::replay {

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Live callables in a replay draw from a PRNG seeded with this value, so a
// value that did not come from the trace is recognizable.
inline constexpr std::uint64_t kSentinelSeed = 0x5eed5eedULL;

enum class Migrate { All, Only, Except };

using CodeOverride = std::variant<std::string, store::Id>;  // source text or CodeVersion id

struct ReplayPlan {
  // Inclusive call ordinals; both ends must be top-level calls.
  std::optional<std::pair<std::int64_t, std::int64_t>> window;
  Migrate migrate = Migrate::All;
  std::set<std::string> migrate_names;
  std::map<std::string, lang::Value> manual_globals;
  std::set<std::string> mocked;
  std::map<std::string, CodeOverride> code_override;
  std::string label;
};

struct MockEntry {
  store::Id event = 0;
  std::vector<store::Id> args;
  store::Id return_value = 0;
};

struct MockSet {
  std::map<std::string, std::deque<MockEntry>> queues;
  std::vector<std::string> warnings;

  std::size_t size(const std::string& callable) const;
};

// Recorded events of the selected callables over the given calls, in the
// order they happened.
MockSet build_mocks(const store::Store& store, const std::vector<store::Id>& calls,
                    const std::set<std::string>& selection);

// Everything a replay needs that is not in the store.
struct ReplayEnv {
  std::uint64_t seed = kSentinelSeed;
  std::shared_ptr<lang::EventScript> events;  // live source for unmocked scripted callables
  // Values for globals that are not migrated from the trace.
  std::map<std::string, lang::Value> current_globals;
  std::ostream* output = nullptr;
  monitor::SerializerMap serializers;
};

struct ReplayResult {
  store::Id session = 0;
  monitor::RecordStats stats;
  lang::Value result;  // last replayed call's return value
  std::map<std::string, std::size_t> mocked_served;  // callable -> returns served from the trace
  std::map<std::string, std::size_t> fell_through;   // callable -> live calls after exhaustion
  std::vector<std::string> warnings;
  bool failed() const { return !stats.error.empty(); }
};

ReplayResult replay_function(store::Store& store, store::Id call, const ReplayPlan& plan, const ReplayEnv& env,
                             const monitor::HookRegistry& hooks);

ReplayResult replay_session(store::Store& store, store::Id session, const ReplayPlan& plan, const ReplayEnv& env,
                            const monitor::HookRegistry& hooks);

ReplayResult replay_from_snapshot(store::Store& store, store::Id snapshot, const ReplayPlan& plan,
                                  const ReplayEnv& env, const monitor::HookRegistry& hooks);

// One replay as the CLI and the service describe it.
//   full           replay_session over the whole session
//   from_step      replay_session over [from, last call]
//   window         replay_session over [window.first, window.second]
//   function       replay_function of one call
//   from_snapshot  replay_from_snapshot
struct ReplayRequest {
  std::string mode = "full";
  std::optional<store::Id> session;
  std::optional<store::Id> call;
  std::optional<store::Id> snapshot;
  std::optional<std::int64_t> from;
  ReplayPlan plan;
  ReplayEnv env;
};

ReplayResult execute(store::Store& store, const ReplayRequest& request, const monitor::HookRegistry& hooks);

}  // namespace spacetime::replay
