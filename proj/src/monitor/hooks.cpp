#include "spacetime/monitor/hooks.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace spacetime::monitor {

using json = nlohmann::json;

namespace {

json to_json(const lang::Value& v, std::set<std::uint64_t>& open) {
  switch (v.kind()) {
    case lang::ValueKind::Nil:
      return nullptr;
    case lang::ValueKind::Bool:
      return v.as_bool();
    case lang::ValueKind::Int:
      return v.as_int();
    case lang::ValueKind::Float:
      if (!std::isfinite(v.as_float())) return lang::format_float(v.as_float());
      return v.as_float();
    case lang::ValueKind::Str:
      return v.as_str();
    case lang::ValueKind::Native:
      return json{{"native", v.as_native()->type_tag}};
    case lang::ValueKind::List:
    case lang::ValueKind::Map:
      break;
  }
  if (!open.insert(v.identity()).second) throw std::invalid_argument("value contains a cycle");
  json out;
  if (v.is_list()) {
    out = json::array();
    for (const auto& e : v.as_list()->items) out.push_back(to_json(e, open));
  } else {
    out = json::object();
    for (const auto& [k, e] : v.as_map()->items) out[k] = to_json(e, open);
  }
  open.erase(v.identity());
  return out;
}

std::string dump(const lang::Value& v) {
  std::set<std::uint64_t> open;
  return to_json(v, open).dump(-1, ' ', false, json::error_handler_t::replace);
}

HookOutput capture_scene(std::span<const lang::Value> args) {
  if (args.size() != 1) throw std::invalid_argument("capture_scene expects one value");
  const lang::Value& shapes = args[0];
  if (!shapes.is_list()) throw std::invalid_argument("capture_scene expects a list of shapes, got " +
                                                     std::string(shapes.type_name()));
  for (const auto& s : shapes.as_list()->items) {
    if (!s.is_map() || !s.as_map()->items.count("shape"))
      throw std::invalid_argument("capture_scene: every shape must be a map with a 'shape' key");
  }
  return HookOutput{"scene", dump(shapes)};
}

}  // namespace

std::string value_to_json(const lang::Value& v) { return dump(v); }

HookRegistry HookRegistry::with_builtins() {
  HookRegistry r;
  r.add("capture_scene", capture_scene);
  r.add("json", [](std::span<const lang::Value> args) {
    if (args.size() == 1) return HookOutput{"json", dump(args[0])};
    std::string out = "[";
    for (std::size_t i = 0; i < args.size(); ++i) out += (i ? "," : "") + dump(args[i]);
    return HookOutput{"json", out + "]"};
  });
  return r;
}

void HookRegistry::add(const std::string& name, Hook hook) {
  if (!hooks_.emplace(name, std::move(hook)).second) throw std::invalid_argument("hook '" + name + "' already registered");
}

const Hook& HookRegistry::get(const std::string& name) const {
  auto it = hooks_.find(name);
  if (it == hooks_.end()) throw std::invalid_argument("unknown hook '" + name + "'");
  return it->second;
}

std::vector<std::string> HookRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : hooks_) out.push_back(n);
  return out;
}

}  // namespace spacetime::monitor
