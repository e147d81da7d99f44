#include "spacetime/monitor/capture.hpp"

#include "spacetime/store/canonical.hpp"

namespace spacetime::monitor {

namespace sk = store::kind;

ValueCapturer::ValueCapturer(store::Store& store, store::Id session, SerializerMap serializers)
    : store_(store), session_(session), serializers_(std::move(serializers)) {}

store::Id ValueCapturer::capture(const lang::Value& v) {
  Ref r = visit(v);
  last_hash_ = r.hex();
  return r.id;
}

store::Id ValueCapturer::skipped(const std::string& reason) {
  Ref r = skipped_ref(reason);
  last_hash_ = r.hex();
  return r.id;
}

ValueCapturer::Ref ValueCapturer::skipped_ref(const std::string& reason) {
  ++skipped_count_;
  return primitive(sk::Skipped, reason);
}

ValueCapturer::Ref ValueCapturer::primitive(std::string_view kind, std::string payload) {
  std::string key;
  key.reserve(kind.size() + 1 + payload.size());
  key.append(kind).push_back('\0');
  key += payload;
  if (auto it = primitives_.find(key); it != primitives_.end()) return it->second;
  store::VersionInput in;
  in.kind = std::string(kind);
  in.hash = store::content_hash(kind, payload);
  in.payload = std::move(payload);
  Ref r{store_.intern_version(in), in.hash};
  primitives_.emplace(std::move(key), r);
  return r;
}

ValueCapturer::Ref ValueCapturer::visit(const lang::Value& v) {
  switch (v.kind()) {
    case lang::ValueKind::Nil:
      return primitive(sk::Nil, "nil");
    case lang::ValueKind::Bool:
      return primitive(sk::Bool, v.as_bool() ? "true" : "false");
    case lang::ValueKind::Int: {
      auto it = ints_.find(v.as_int());
      if (it != ints_.end()) return it->second;
      return ints_[v.as_int()] = primitive(sk::Int, std::to_string(v.as_int()));
    }
    case lang::ValueKind::Float:
      return primitive(sk::Float, lang::format_float(v.as_float()));
    case lang::ValueKind::Str:
      return primitive(sk::Str, v.as_str());
    case lang::ValueKind::Native:
      return native(*v.as_native());
    case lang::ValueKind::List:
    case lang::ValueKind::Map:
      return container(v);
  }
  throw CaptureError("unknown value kind");
}

ValueCapturer::Ref ValueCapturer::native(const lang::NativeObject& n) {
  auto it = serializers_.find(n.type_tag);
  if (it == serializers_.end()) return skipped_ref("native:" + n.type_tag + " has no serializer");
  std::string bytes;
  try {
    bytes = it->second(n);
  } catch (const std::exception& e) {
    throw CaptureError("serializer for native:" + n.type_tag + " failed: " + e.what());
  }
  store::VersionInput in;
  in.kind = std::string(sk::Blob);
  in.payload = store::encode_blob(n.type_tag, bytes);
  in.hash = store::content_hash(in.kind, in.payload);
  store::Id id = store_.intern_version(in, store::IdentityKey{session_, n.id, current_call_});
  return Ref{id, in.hash};
}

ValueCapturer::Ref ValueCapturer::container(const lang::Value& v) {
  const lang::HeapObject* obj = v.heap_object();
  std::uint64_t identity = obj->id;
  if (in_progress_.count(identity)) return skipped_ref("cycle");

  auto cached = heap_.find(identity);
  in_progress_.insert(identity);
  struct Done {
    std::unordered_set<std::uint64_t>& set;
    std::uint64_t id;
    ~Done() { set.erase(id); }
  } done{in_progress_, identity};

  // An unchanged mutation counter covers primitive children; heap children
  // are revisited (their own caches make that cheap) and compared by ref.
  auto each = [&](auto&& f) {
    std::size_t i = 0;
    if (v.is_list())
      for (const auto& e : v.as_list()->items) f(e, i++);
    else
      for (const auto& [k, e] : v.as_map()->items) f(e, i++);
  };
  if (cached != heap_.end() && cached->second.version == obj->version) {
    bool same = true;
    const auto& old = cached->second.elements;
    each([&](const lang::Value& e, std::size_t i) {
      if (same && e.is_heap() && visit(e).id != old[i].id) same = false;
    });
    if (same) return cached->second.ref;
  }

  std::vector<Ref> elems;
  elems.reserve(v.is_list() ? v.as_list()->items.size() : v.as_map()->items.size());
  each([&](const lang::Value& e, std::size_t) { elems.push_back(visit(e)); });

  store::VersionInput in;
  in.elements.reserve(elems.size());
  for (const auto& r : elems) in.elements.push_back(r.id);
  if (v.is_list()) {
    std::vector<std::string_view> hashes;
    hashes.reserve(elems.size());
    for (const auto& r : elems) hashes.push_back(r.hex());
    in.kind = std::string(sk::List);
    in.payload = store::encode_list(hashes);
  } else {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::size_t i = 0;
    for (const auto& [k, e] : v.as_map()->items) pairs.emplace_back(k, std::string(elems[i++].hex()));
    in.kind = std::string(sk::Map);
    in.payload = store::encode_map(pairs);
  }
  in.hash = store::content_hash(in.kind, in.payload);
  Ref r{store_.intern_version(in, store::IdentityKey{session_, identity, current_call_}), in.hash};
  heap_[identity] = Cached{obj->version, r, std::move(elems)};
  return r;
}

}  // namespace spacetime::monitor
