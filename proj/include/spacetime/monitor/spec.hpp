#pragma once

// What to record for each monitored function, and the static analysis that
// decides which globals belong to a call's state.

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spacetime/lang/interpreter.hpp"

namespace spacetime::monitor {

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MonitorSpec {
  std::string function;
  lang::Granularity granularity = lang::Granularity::Function;
  std::set<std::string> tracked;
  std::vector<std::string> call_hooks;
  std::vector<std::string> return_hooks;
  std::set<std::string> include;  // empty: everything visible
  std::set<std::string> exclude;
  std::vector<std::string> warnings;

  bool captures(const std::string& name) const {
    return (include.empty() || include.count(name)) && !exclude.count(name);
  }
};

using SpecSet = std::map<std::string, MonitorSpec>;

// One spec per function carrying an @monitor pragma.
SpecSet specs_from_pragmas(const lang::Program& program);

// JSON config: {"fn": {"granularity": "line", "track": [..], "call_hooks": [..],
// "return_hooks": [..], "include": [..], "exclude": [..]}, ...}. The
// singular "call_hook"/"return_hook" (a string) are accepted too.
SpecSet specs_from_json(std::string_view text);
std::string specs_to_json(const SpecSet& specs);

// Checks functions exist, include and exclude are disjoint and tracked names
// resolve to a guest function or builtin of `env`. Adds a warning to specs
// whose global analysis hit a dynamic call.
void validate(SpecSet& specs, const lang::Program& program, const lang::Env& env);

struct GlobalRefs {
  std::set<std::string> names;
  // A call through `invoke` was reachable: any global may be read.
  bool dynamic = false;
};

// Names read as globals by `fn` or any guest function it transitively calls,
// including the called function and builtin names themselves and names
// declared `global`.
GlobalRefs analyze_global_refs(const lang::Program& program, const std::string& fn);

}  // namespace spacetime::monitor
