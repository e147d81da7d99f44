#include "spacetime/lang/value.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <unordered_map>

namespace spacetime::lang {

std::string_view kind_name(ValueKind kind) {
  switch (kind) {
    case ValueKind::Nil: return "nil";
    case ValueKind::Bool: return "bool";
    case ValueKind::Int: return "int";
    case ValueKind::Float: return "float";
    case ValueKind::Str: return "str";
    case ValueKind::List: return "list";
    case ValueKind::Map: return "map";
    case ValueKind::Native: return "native";
  }
  return "?";
}

std::uint64_t Value::identity() const {
  const HeapObject* obj = heap_object();
  return obj ? obj->id : 0;
}

const HeapObject* Value::heap_object() const {
  switch (kind()) {
    case ValueKind::List: return as_list().get();
    case ValueKind::Map: return as_map().get();
    case ValueKind::Native: return as_native().get();
    default: return nullptr;
  }
}

bool deep_equal(const Value& a, const Value& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case ValueKind::Nil: return true;
    case ValueKind::Bool: return a.as_bool() == b.as_bool();
    case ValueKind::Int: return a.as_int() == b.as_int();
    case ValueKind::Float: {
      // NaN payloads compare equal so recorded NaNs round-trip cleanly.
      double x = a.as_float(), y = b.as_float();
      return x == y || (std::isnan(x) && std::isnan(y));
    }
    case ValueKind::Str: return a.as_str() == b.as_str();
    case ValueKind::List: {
      const auto& xs = a.as_list()->items;
      const auto& ys = b.as_list()->items;
      if (a.as_list() == b.as_list()) return true;
      if (xs.size() != ys.size()) return false;
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (!deep_equal(xs[i], ys[i])) return false;
      return true;
    }
    case ValueKind::Map: {
      if (a.as_map() == b.as_map()) return true;
      const auto& xs = a.as_map()->items;
      const auto& ys = b.as_map()->items;
      if (xs.size() != ys.size()) return false;
      auto it = ys.begin();
      for (const auto& [k, v] : xs) {
        if (it->first != k || !deep_equal(v, it->second)) return false;
        ++it;
      }
      return true;
    }
    case ValueKind::Native: {
      const auto& x = *a.as_native();
      const auto& y = *b.as_native();
      return &x == &y || x.type_tag == y.type_tag;
    }
  }
  return false;
}

bool truthy(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Nil: return false;
    case ValueKind::Bool: return v.as_bool();
    case ValueKind::Int: return v.as_int() != 0;
    case ValueKind::Float: return v.as_float() != 0.0;
    case ValueKind::Str: return !v.as_str().empty();
    case ValueKind::List: return !v.as_list()->items.empty();
    case ValueKind::Map: return !v.as_map()->items.empty();
    case ValueKind::Native: return true;
  }
  return false;
}

std::string format_float(double d) {
  if (std::isnan(d)) return "nan";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, d);
  std::string out(buf, res.ptr);
  if (out.find_first_of(".en") == std::string::npos) out += ".0";
  return out;
}

namespace {

void render_string(std::string& out, const std::string& s) {
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20) {
          static const char* hex = "0123456789abcdef";
          out += "\\x";
          out += hex[c >> 4];
          out += hex[c & 15];
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

void render_into(std::string& out, const Value& v, int depth) {
  if (depth > 64) {
    out += "...";
    return;
  }
  switch (v.kind()) {
    case ValueKind::Nil: out += "nil"; break;
    case ValueKind::Bool: out += v.as_bool() ? "true" : "false"; break;
    case ValueKind::Int: out += std::to_string(v.as_int()); break;
    case ValueKind::Float: out += format_float(v.as_float()); break;
    case ValueKind::Str: render_string(out, v.as_str()); break;
    case ValueKind::List: {
      out += '[';
      bool first = true;
      for (const auto& item : v.as_list()->items) {
        if (!first) out += ", ";
        first = false;
        render_into(out, item, depth + 1);
      }
      out += ']';
      break;
    }
    case ValueKind::Map: {
      out += '{';
      bool first = true;
      for (const auto& [k, item] : v.as_map()->items) {
        if (!first) out += ", ";
        first = false;
        render_string(out, k);
        out += ": ";
        render_into(out, item, depth + 1);
      }
      out += '}';
      break;
    }
    case ValueKind::Native:
      out += "<native:" + v.as_native()->type_tag + "#" + std::to_string(v.identity()) + ">";
      break;
  }
}

Value copy_rec(Heap& heap, const Value& v, std::unordered_map<const HeapObject*, Value>& seen) {
  if (!v.is_heap()) return v;
  if (auto it = seen.find(v.heap_object()); it != seen.end()) return it->second;
  switch (v.kind()) {
    case ValueKind::List: {
      auto copy = heap.new_list();
      seen.emplace(v.heap_object(), Value(copy));
      for (const auto& item : v.as_list()->items) copy->items.push_back(copy_rec(heap, item, seen));
      return copy;
    }
    case ValueKind::Map: {
      auto copy = heap.new_map();
      seen.emplace(v.heap_object(), Value(copy));
      for (const auto& [k, item] : v.as_map()->items) copy->items.emplace(k, copy_rec(heap, item, seen));
      return copy;
    }
    default: {
      auto copy = heap.new_native(v.as_native()->type_tag, v.as_native()->payload);
      seen.emplace(v.heap_object(), Value(copy));
      return copy;
    }
  }
}

}  // namespace

std::string render(const Value& v) {
  std::string out;
  render_into(out, v, 0);
  return out;
}

std::uint64_t Heap::next_identity() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

ListRef Heap::new_list(std::vector<Value> items) {
  auto l = std::make_shared<ListObject>();
  l->id = next_identity();
  l->items = std::move(items);
  return l;
}

MapRef Heap::new_map() {
  auto m = std::make_shared<MapObject>();
  m->id = next_identity();
  return m;
}

NativeRef Heap::new_native(std::string type_tag, std::any payload) {
  auto n = std::make_shared<NativeObject>();
  n->id = next_identity();
  n->type_tag = std::move(type_tag);
  n->payload = std::move(payload);
  return n;
}

Value deep_copy(Heap& heap, const Value& v) {
  std::unordered_map<const HeapObject*, Value> seen;
  return copy_rec(heap, v, seen);
}

}  // namespace spacetime::lang
