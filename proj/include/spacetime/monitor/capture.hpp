#pragma once

// Interns guest values into the store, one capture at a time.
//
// Heap objects keep their runtime identity within a session: every capture
// of the same list or map lands on the same StoredObject, and a new version
// is written only when its content hash changes. A per-object cache keyed by
// the heap mutation counter keeps repeated captures of unchanged objects
// cheap, which is what makes per-line capture affordable.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "spacetime/lang/value.hpp"
#include "spacetime/store/store.hpp"

namespace spacetime::monitor {

class CaptureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Serializes a native handle to bytes. Keyed by the handle's type tag.
using Serializer = std::function<std::string(const lang::NativeObject&)>;
using SerializerMap = std::map<std::string, Serializer>;

class ValueCapturer {
 public:
  ValueCapturer(store::Store& store, store::Id session, SerializerMap serializers = {});

  // Call whose capture first sees a new object (StoredObject.first_seen).
  void set_current_call(std::optional<store::Id> call) { current_call_ = call; }

  store::Id capture(const lang::Value& v);
  store::Id skipped(const std::string& reason);

  std::size_t skipped_count() const { return skipped_count_; }
  const std::string& hash_of_last() const { return last_hash_; }

 private:
  // Hex digests are fixed-width; keeping them inline avoids an allocation
  // per element on every list capture.
  struct Ref {
    store::Id id = 0;
    std::array<char, 64> hash{};
    Ref() = default;
    Ref(store::Id i, std::string_view h) : id(i) { h.copy(hash.data(), hash.size()); }
    std::string_view hex() const { return {hash.data(), hash.size()}; }
  };
  struct Cached {
    std::uint64_t version = 0;
    Ref ref;
    std::vector<Ref> elements;
  };

  Ref visit(const lang::Value& v);
  Ref primitive(std::string_view kind, std::string payload);
  Ref container(const lang::Value& v);
  Ref native(const lang::NativeObject& n);
  Ref skipped_ref(const std::string& reason);

  store::Store& store_;
  store::Id session_;
  SerializerMap serializers_;
  std::optional<store::Id> current_call_;
  std::unordered_map<std::string, Ref> primitives_;  // kind '\0' payload -> ref
  std::unordered_map<std::int64_t, Ref> ints_;
  std::unordered_map<std::uint64_t, Cached> heap_;   // identity -> last capture
  std::unordered_set<std::uint64_t> in_progress_;
  std::size_t skipped_count_ = 0;
  std::string last_hash_;
};

}  // namespace spacetime::monitor
