#pragma once

// Read-side comparison: code line mapping, cross-session alignment and
// state diffs.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "spacetime/store/store.hpp"

namespace spacetime::compare {

// ---- code ---------------------------------------------------------------

struct LineMapping {
  std::vector<std::pair<int, int>> pairs;  // (line in a, line in b), 1-based
  std::set<int> unmatched_a;
  std::set<int> unmatched_b;

  std::optional<int> to_b(int line_a) const;
  std::optional<int> to_a(int line_b) const;
};

// Longest common subsequence over exact line texts. Among equally long
// subsequences the one matching the earliest lines of `a` (then of `b`) wins.
LineMapping diff_lines(const std::vector<std::string>& a, const std::vector<std::string>& b);
LineMapping diff_code(const std::string& source_a, const std::string& source_b);
LineMapping diff_code(const store::CodeVersion& a, const store::CodeVersion& b);

std::vector<std::string> split_lines(const std::string& text);

// ---- states ---------------------------------------------------------------

class CompareError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StateKind { Call, Snapshot };

struct StateRef {
  StateKind kind = StateKind::Call;
  store::Id id = 0;

  static StateRef call(store::Id id) { return {StateKind::Call, id}; }
  static StateRef snapshot(store::Id id) { return {StateKind::Snapshot, id}; }
  bool operator==(const StateRef&) const = default;
};

std::string to_string(StateKind kind);

struct VariableChange {
  std::string name;
  std::string hash_a;
  std::string hash_b;
};

struct EventDiff {
  std::string callable;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  std::optional<std::size_t> first_divergence;  // index into the per-callable sequence
};

struct StateDiff {
  std::set<std::string> added;    // only in b
  std::set<std::string> removed;  // only in a
  std::vector<VariableChange> changed;
  std::vector<EventDiff> events;  // only callables whose sequences differ
  bool code_equal = true;
  LineMapping code;
  std::optional<std::pair<std::string, std::string>> hooks;         // hashes when they differ
  std::optional<std::pair<std::string, std::string>> return_value;  // hashes when they differ
  std::optional<std::pair<int, int>> lines;                         // snapshot lines when they differ

  bool empty() const;
  std::set<std::string> changed_names() const;
};

// Variables are locals and globals merged (a local shadows a global of the
// same name), compared by content hash.
StateDiff compare_states(const store::Store& store, StateRef a, StateRef b);

// ---- alignment --------------------------------------------------------------

struct Window {
  store::Id session = 0;
  std::optional<std::int64_t> start;  // call ordinals, inclusive
  std::optional<std::int64_t> end;
};

struct AlignedPair {
  std::optional<StateRef> a;
  std::optional<StateRef> b;
  bool gap() const { return !a || !b; }
};

// Calls pair by ordinal offset from the window starts. Inside a pair of
// line-granularity calls, snapshots pair when their lines correspond under
// diff_code and they are the same occurrence of that line.
std::vector<AlignedPair> align(const store::Store& store, const Window& a, const Window& b);

}  // namespace spacetime::compare
