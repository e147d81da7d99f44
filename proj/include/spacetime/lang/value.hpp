#pragma once

// Runtime values of the Trk guest language.
//
// Primitives (nil, bool, int, float, str) are plain values with no identity.
// Lists, maps and native handles live on the heap and carry an identity id
// that is unique within the process. Every in-place mutation of a
// heap object bumps its version counter so capture caches can tell when the
// content may have changed.

#include <any>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace spacetime::lang {

class Value;

struct HeapObject {
  std::uint64_t id = 0;
  std::uint64_t version = 0;

  void touch() { ++version; }
};

struct ListObject : HeapObject {
  std::vector<Value> items;
};

struct MapObject : HeapObject {
  // Keys are kept sorted; iteration order is part of the language semantics.
  std::map<std::string, Value, std::less<>> items;
};

// Opaque host object. `type_tag` selects a custom serializer, if any.
struct NativeObject : HeapObject {
  std::string type_tag;
  std::any payload;
};

using ListRef = std::shared_ptr<ListObject>;
using MapRef = std::shared_ptr<MapObject>;
using NativeRef = std::shared_ptr<NativeObject>;

struct Nil {
  bool operator==(const Nil&) const = default;
};

enum class ValueKind { Nil, Bool, Int, Float, Str, List, Map, Native };

std::string_view kind_name(ValueKind kind);

class Value {
 public:
  using Storage = std::variant<Nil, bool, std::int64_t, double, std::string,
                               ListRef, MapRef, NativeRef>;

  Value() = default;
  Value(Nil) {}
  Value(bool b) : data_(b) {}
  Value(std::int64_t i) : data_(i) {}
  Value(int i) : data_(static_cast<std::int64_t>(i)) {}
  Value(double d) : data_(d) {}
  Value(std::string s) : data_(std::move(s)) {}
  Value(const char* s) : data_(std::string(s)) {}
  Value(ListRef l) : data_(std::move(l)) {}
  Value(MapRef m) : data_(std::move(m)) {}
  Value(NativeRef n) : data_(std::move(n)) {}

  ValueKind kind() const { return static_cast<ValueKind>(data_.index()); }
  std::string_view type_name() const { return kind_name(kind()); }

  bool is_nil() const { return kind() == ValueKind::Nil; }
  bool is_bool() const { return kind() == ValueKind::Bool; }
  bool is_int() const { return kind() == ValueKind::Int; }
  bool is_float() const { return kind() == ValueKind::Float; }
  bool is_number() const { return is_int() || is_float(); }
  bool is_str() const { return kind() == ValueKind::Str; }
  bool is_list() const { return kind() == ValueKind::List; }
  bool is_map() const { return kind() == ValueKind::Map; }
  bool is_native() const { return kind() == ValueKind::Native; }
  bool is_heap() const { return is_list() || is_map() || is_native(); }

  bool as_bool() const { return std::get<bool>(data_); }
  std::int64_t as_int() const { return std::get<std::int64_t>(data_); }
  double as_float() const { return std::get<double>(data_); }
  double as_number() const { return is_int() ? static_cast<double>(as_int()) : as_float(); }
  const std::string& as_str() const { return std::get<std::string>(data_); }
  const ListRef& as_list() const { return std::get<ListRef>(data_); }
  const MapRef& as_map() const { return std::get<MapRef>(data_); }
  const NativeRef& as_native() const { return std::get<NativeRef>(data_); }

  // Identity id of a heap value, 0 for primitives.
  std::uint64_t identity() const;
  const HeapObject* heap_object() const;

  const Storage& storage() const { return data_; }

 private:
  Storage data_;
};

// Structural equality: same kind and same content, recursively. Identity is
// ignored. Int and float never compare equal to each other.
bool deep_equal(const Value& a, const Value& b);

// Truthiness used by conditions: nil, false, 0, 0.0, "" and empty containers
// are false.
bool truthy(const Value& v);

// Renders a value in guest literal syntax (parseable by parse_literal for
// everything except native handles).
std::string render(const Value& v);

// Shortest round-trip decimal for a double, always containing '.', 'e',
// "inf" or "nan" so it never reads back as an int.
std::string format_float(double d);

// Allocates identity-bearing objects. Ids come from one process-wide counter,
// so values built by different heaps never share an identity.
class Heap {
 public:
  ListRef new_list(std::vector<Value> items = {});
  MapRef new_map();
  NativeRef new_native(std::string type_tag, std::any payload = {});

  static std::uint64_t next_identity();
};

// Fresh copy with new identities for every heap object reachable from v.
// Aliasing inside v is preserved in the copy.
Value deep_copy(Heap& heap, const Value& v);

}  // namespace spacetime::lang
