#include "spacetime/lang/builtins.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "spacetime/lang/errors.hpp"

namespace spacetime::lang {

namespace {

using Args = std::span<const Value>;
using nlohmann::json;

[[noreturn]] void fail(const BuiltinContext& ctx, const std::string& message) {
  throw RuntimeError(message, ctx.line);
}

std::int64_t int_arg(const BuiltinContext& ctx, const Value& v, const char* fn) {
  if (!v.is_int()) fail(ctx, std::string(fn) + "() expects int, got " + std::string(v.type_name()));
  return v.as_int();
}

double num_arg(const BuiltinContext& ctx, const Value& v, const char* fn) {
  if (!v.is_number()) fail(ctx, std::string(fn) + "() expects a number, got " + std::string(v.type_name()));
  return v.as_number();
}

ListObject& list_arg(const BuiltinContext& ctx, const Value& v, const char* fn) {
  if (!v.is_list()) fail(ctx, std::string(fn) + "() expects list, got " + std::string(v.type_name()));
  return *v.as_list();
}

std::string to_text(const Value& v) { return v.is_str() ? v.as_str() : render(v); }

int order(const BuiltinContext& ctx, const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) {
    double x = a.as_number(), y = b.as_number();
    if (a.is_int() && b.is_int()) return a.as_int() < b.as_int() ? -1 : a.as_int() > b.as_int();
    return x < y ? -1 : x > y;
  }
  if (a.is_str() && b.is_str()) return a.as_str() < b.as_str() ? -1 : a.as_str() > b.as_str();
  fail(ctx, "cannot order " + std::string(a.type_name()) + " and " + std::string(b.type_name()));
}

Value extremum(BuiltinContext& ctx, Args args, bool want_max, const char* fn) {
  std::span<const Value> items = args;
  if (args.size() == 1) {
    items = std::span<const Value>(list_arg(ctx, args[0], fn).items);
  }
  if (items.empty()) fail(ctx, std::string(fn) + "() of an empty sequence");
  Value best = items[0];
  for (std::size_t i = 1; i < items.size(); ++i) {
    int c = order(ctx, items[i], best);
    if (want_max ? c > 0 : c < 0) best = items[i];
  }
  return best;
}

Value from_json(const json& j, Heap& heap) {
  switch (j.type()) {
    case json::value_t::null: return Value();
    case json::value_t::boolean: return Value(j.get<bool>());
    case json::value_t::number_integer: return Value(j.get<std::int64_t>());
    case json::value_t::number_unsigned: {
      auto u = j.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        throw std::invalid_argument("integer out of range: " + std::to_string(u));
      return Value(static_cast<std::int64_t>(u));
    }
    case json::value_t::number_float: return Value(j.get<double>());
    case json::value_t::string: return Value(j.get<std::string>());
    case json::value_t::array: {
      std::vector<Value> items;
      for (const auto& e : j) items.push_back(from_json(e, heap));
      return heap.new_list(std::move(items));
    }
    case json::value_t::object: {
      auto m = heap.new_map();
      for (auto it = j.begin(); it != j.end(); ++it) m->items.emplace(it.key(), from_json(it.value(), heap));
      return m;
    }
    default: throw std::invalid_argument("unsupported JSON value");
  }
}

void install_collections(Env& env) {
  register_builtin(env, "len", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    const Value& v = a[0];
    if (v.is_list()) return Value(static_cast<std::int64_t>(v.as_list()->items.size()));
    if (v.is_map()) return Value(static_cast<std::int64_t>(v.as_map()->items.size()));
    if (v.is_str()) return Value(static_cast<std::int64_t>(v.as_str().size()));
    fail(ctx, "len() of " + std::string(v.type_name()));
  }, 1, 1);

  register_builtin(env, "append", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    auto& list = list_arg(ctx, a[0], "append");
    list.items.push_back(a[1]);
    list.touch();
    return Value();
  }, 2, 2);

  register_builtin(env, "pop", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    auto& list = list_arg(ctx, a[0], "pop");
    if (list.items.empty()) fail(ctx, "pop() from an empty list");
    std::int64_t n = static_cast<std::int64_t>(list.items.size());
    std::int64_t i = a.size() > 1 ? int_arg(ctx, a[1], "pop") : n - 1;
    if (i < 0) i += n;
    if (i < 0 || i >= n) fail(ctx, "pop() index out of range");
    Value out = list.items[static_cast<std::size_t>(i)];
    list.items.erase(list.items.begin() + i);
    list.touch();
    return out;
  }, 1, 2);

  register_builtin(env, "insert", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    auto& list = list_arg(ctx, a[0], "insert");
    std::int64_t n = static_cast<std::int64_t>(list.items.size());
    std::int64_t i = int_arg(ctx, a[1], "insert");
    if (i < 0) i += n;
    i = std::clamp<std::int64_t>(i, 0, n);
    list.items.insert(list.items.begin() + i, a[2]);
    list.touch();
    return Value();
  }, 3, 3);

  register_builtin(env, "keys", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    if (!a[0].is_map()) fail(ctx, "keys() expects map");
    std::vector<Value> out;
    for (const auto& [k, _] : a[0].as_map()->items) out.emplace_back(k);
    return ctx.heap.new_list(std::move(out));
  }, 1, 1);

  register_builtin(env, "values", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    if (!a[0].is_map()) fail(ctx, "values() expects map");
    std::vector<Value> out;
    for (const auto& [_, v] : a[0].as_map()->items) out.push_back(v);
    return ctx.heap.new_list(std::move(out));
  }, 1, 1);

  register_builtin(env, "has", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    if (!a[0].is_map()) fail(ctx, "has() expects map");
    if (!a[1].is_str()) return Value(false);
    return Value(a[0].as_map()->items.count(a[1].as_str()) != 0);
  }, 2, 2);

  register_builtin(env, "remove", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    if (!a[0].is_map() || !a[1].is_str()) fail(ctx, "remove() expects map and str key");
    auto& m = *a[0].as_map();
    auto it = m.items.find(a[1].as_str());
    if (it == m.items.end()) return Value();
    Value out = it->second;
    m.items.erase(it);
    m.touch();
    return out;
  }, 2, 2);

  register_builtin(env, "range", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    std::int64_t start = 0, stop, step = 1;
    if (a.size() == 1) {
      stop = int_arg(ctx, a[0], "range");
    } else {
      start = int_arg(ctx, a[0], "range");
      stop = int_arg(ctx, a[1], "range");
      if (a.size() == 3) step = int_arg(ctx, a[2], "range");
    }
    if (step == 0) fail(ctx, "range() step must not be zero");
    std::vector<Value> out;
    for (std::int64_t i = start; step > 0 ? i < stop : i > stop; i += step) {
      out.emplace_back(i);
      if (out.size() > 10'000'000) fail(ctx, "range() too large");
    }
    return ctx.heap.new_list(std::move(out));
  }, 1, 3);

  register_builtin(env, "copy", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    return deep_copy(ctx.heap, a[0]);
  }, 1, 1);

  register_builtin(env, "sorted", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    std::vector<Value> items = list_arg(ctx, a[0], "sorted").items;
    std::stable_sort(items.begin(), items.end(),
                     [&](const Value& x, const Value& y) { return order(ctx, x, y) < 0; });
    return ctx.heap.new_list(std::move(items));
  }, 1, 1);

  register_builtin(env, "sum", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    std::int64_t isum = 0;
    double fsum = 0;
    bool is_float = false;
    for (const auto& v : list_arg(ctx, a[0], "sum").items) {
      if (v.is_int() && !is_float) {
        if (__builtin_add_overflow(isum, v.as_int(), &isum)) fail(ctx, "integer overflow in sum()");
      } else {
        if (!is_float) fsum = static_cast<double>(isum);
        is_float = true;
        fsum += num_arg(ctx, v, "sum");
      }
    }
    return is_float ? Value(fsum) : Value(isum);
  }, 1, 1);

  register_builtin(env, "join", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    if (!a[1].is_str()) fail(ctx, "join() separator must be str");
    std::string out;
    bool first = true;
    for (const auto& v : list_arg(ctx, a[0], "join").items) {
      if (!first) out += a[1].as_str();
      first = false;
      out += to_text(v);
    }
    return Value(std::move(out));
  }, 2, 2);
}

void install_scalars(Env& env) {
  register_builtin(env, "str", BuiltinKind::Pure, [](BuiltinContext&, Args a) -> Value {
    return Value(to_text(a[0]));
  }, 1, 1);

  register_builtin(env, "int", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    const Value& v = a[0];
    if (v.is_int()) return v;
    if (v.is_bool()) return Value(static_cast<std::int64_t>(v.as_bool()));
    if (v.is_float()) {
      double d = std::trunc(v.as_float());
      if (!(d >= -9.2233720368547758e18 && d < 9.2233720368547758e18)) fail(ctx, "int() of out-of-range float");
      return Value(static_cast<std::int64_t>(d));
    }
    if (v.is_str()) {
      std::int64_t out = 0;
      const std::string& s = v.as_str();
      auto res = std::from_chars(s.data(), s.data() + s.size(), out);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(ctx, "int() of invalid text " + render(v));
      return Value(out);
    }
    fail(ctx, "int() of " + std::string(v.type_name()));
  }, 1, 1);

  register_builtin(env, "float", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    const Value& v = a[0];
    if (v.is_number()) return Value(v.as_number());
    if (v.is_str()) {
      try {
        std::size_t used = 0;
        double d = std::stod(v.as_str(), &used);
        if (used == v.as_str().size()) return Value(d);
      } catch (const std::exception&) {
      }
      fail(ctx, "float() of invalid text " + render(v));
    }
    fail(ctx, "float() of " + std::string(v.type_name()));
  }, 1, 1);

  register_builtin(env, "abs", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    if (a[0].is_int()) {
      if (a[0].as_int() == std::numeric_limits<std::int64_t>::min()) fail(ctx, "integer overflow in abs()");
      return Value(a[0].as_int() < 0 ? -a[0].as_int() : a[0].as_int());
    }
    return Value(std::fabs(num_arg(ctx, a[0], "abs")));
  }, 1, 1);

  register_builtin(env, "min", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    return extremum(ctx, a, false, "min");
  }, 1, -1);
  register_builtin(env, "max", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    return extremum(ctx, a, true, "max");
  }, 1, -1);

  register_builtin(env, "floor", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    if (a[0].is_int()) return a[0];
    double d = std::floor(num_arg(ctx, a[0], "floor"));
    if (!(d >= -9.2233720368547758e18 && d < 9.2233720368547758e18)) fail(ctx, "floor() out of int range");
    return Value(static_cast<std::int64_t>(d));
  }, 1, 1);

  register_builtin(env, "sqrt", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    double d = num_arg(ctx, a[0], "sqrt");
    if (d < 0) fail(ctx, "sqrt() of a negative number");
    return Value(std::sqrt(d));
  }, 1, 1);

  register_builtin(env, "type", BuiltinKind::Pure, [](BuiltinContext&, Args a) -> Value {
    return Value(std::string(a[0].type_name()));
  }, 1, 1);

  register_builtin(env, "print", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    std::ostream* out = ctx.interpreter.output();
    if (!out) return Value();
    for (std::size_t i = 0; i < a.size(); ++i) *out << (i ? " " : "") << to_text(a[i]);
    *out << '\n';
    return Value();
  }, 0, -1);

  // Calls a function chosen at run time; defeats static global analysis.
  register_builtin(env, "invoke", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    if (!a[0].is_str()) fail(ctx, "invoke() expects a function name");
    return ctx.interpreter.invoke(a[0].as_str(), std::vector<Value>(a.begin() + 1, a.end()), ctx.line);
  }, 1, -1);
}

}  // namespace

void install_standard(Env& env) {
  install_collections(env);
  install_scalars(env);
}

void install_random(Env& env, std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  register_builtin(env, "rand_int", BuiltinKind::External, [rng](BuiltinContext& ctx, Args a) -> Value {
    std::int64_t lo = int_arg(ctx, a[0], "rand_int");
    std::int64_t hi = int_arg(ctx, a[1], "rand_int");
    if (hi < lo) fail(ctx, "rand_int() with empty range");
    auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    std::uint64_t x = (*rng)();
    std::uint64_t offset = span == 0 ? x : x % span;
    return Value(static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + offset));
  }, 2, 2);
  register_builtin(env, "rand_float", BuiltinKind::External, [rng](BuiltinContext&, Args) -> Value {
    return Value(static_cast<double>((*rng)() >> 11) * 0x1.0p-53);
  }, 0, 0);
}

void install_clock(Env& env) {
  register_builtin(env, "clock_ms", BuiltinKind::External, [](BuiltinContext&, Args) -> Value {
    auto now = std::chrono::system_clock::now().time_since_epoch();
    return Value(static_cast<std::int64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(now).count()));
  }, 0, 0);
}

EventScript EventScript::from_text(std::string_view text) {
  EventScript script;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("event script line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!record.is_object() || !record.contains("callable") || !record["callable"].is_string() ||
        !record.contains("return"))
      throw std::runtime_error("event script line " + std::to_string(lineno) +
                               ": expected {\"callable\": name, \"return\": value}");
    script.queues_[record["callable"].get<std::string>()].push_back(record["return"].dump());
  }
  return script;
}

EventScript EventScript::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open event script " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

std::optional<Value> EventScript::next(const std::string& callable, Heap& heap) {
  auto it = queues_.find(callable);
  if (it == queues_.end() || it->second.empty()) return std::nullopt;
  std::string text = std::move(it->second.front());
  it->second.pop_front();
  return value_from_json(text, heap);
}

std::size_t EventScript::remaining(const std::string& callable) const {
  auto it = queues_.find(callable);
  return it == queues_.end() ? 0 : it->second.size();
}

std::vector<std::string> EventScript::callables() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : queues_) out.push_back(name);
  return out;
}

void install_event_script(Env& env, std::shared_ptr<EventScript> script) {
  if (!script) script = std::make_shared<EventScript>();
  register_builtin(env, "get_events", BuiltinKind::External, [script](BuiltinContext& ctx, Args) -> Value {
    if (auto v = script->next("get_events", ctx.heap)) return *v;
    return ctx.heap.new_list();
  }, 0, 0);
  for (const auto& name : script->callables()) {
    if (env.builtins.count(name)) continue;
    register_builtin(env, name, BuiltinKind::External, [script, name](BuiltinContext& ctx, Args) -> Value {
      if (auto v = script->next(name, ctx.heap)) return *v;
      return Value();
    }, 0, -1);
  }
}

void install_game(Env& env) {
  register_builtin(env, "open_screen", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    std::pair<std::int64_t, std::int64_t> size{int_arg(ctx, a[0], "open_screen"), int_arg(ctx, a[1], "open_screen")};
    return ctx.heap.new_native("screen", size);
  }, 2, 2);
  register_builtin(env, "draw", BuiltinKind::Pure, [](BuiltinContext& ctx, Args a) -> Value {
    if (!a[0].is_native() || a[0].as_native()->type_tag != "screen") fail(ctx, "draw() expects a screen");
    list_arg(ctx, a[1], "draw");
    return Value();
  }, 2, 2);
}

void install_all(Env& env, const RuntimeConfig& config) {
  install_standard(env);
  install_random(env, config.seed);
  install_clock(env);
  install_game(env);
  install_event_script(env, config.events);
}

Value value_from_json(std::string_view text, Heap& heap) { return from_json(json::parse(text), heap); }

}  // namespace spacetime::lang
