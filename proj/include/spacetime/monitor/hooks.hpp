#pragma once

// Hooks attach domain metadata to a recorded state. Call hooks see the call's
// arguments, return hooks see the return value. A hook must not mutate what
// it is given.

#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>

#include "spacetime/lang/value.hpp"

namespace spacetime::monitor {

struct HookOutput {
  std::string kind;  // blob kind, e.g. "scene"
  std::string bytes;
};

using Hook = std::function<HookOutput(std::span<const lang::Value>)>;

class HookRegistry {
 public:
  // capture_scene: a list of shape maps -> JSON blob of kind "scene".
  // json: any value -> JSON blob of kind "json".
  static HookRegistry with_builtins();

  void add(const std::string& name, Hook hook);
  bool has(const std::string& name) const { return hooks_.count(name) != 0; }
  const Hook& get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Hook> hooks_;
};

// JSON text for a guest value (maps -> objects, lists -> arrays). Native
// handles become {"native": tag}. Throws std::invalid_argument on cycles.
std::string value_to_json(const lang::Value& v);

}  // namespace spacetime::monitor
