#include "spacetime/compare/compare.hpp"

#include <algorithm>
#include <sstream>

#include "spacetime/store/queries.hpp"

namespace spacetime::compare {

std::optional<int> LineMapping::to_b(int line_a) const {
  auto it = std::lower_bound(pairs.begin(), pairs.end(), std::make_pair(line_a, 0));
  if (it != pairs.end() && it->first == line_a) return it->second;
  return std::nullopt;
}

std::optional<int> LineMapping::to_a(int line_b) const {
  for (const auto& [la, lb] : pairs)
    if (lb == line_b) return la;
  return std::nullopt;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

LineMapping diff_lines(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  // suffix[i][j] = LCS length of a[i..] and b[j..]
  std::vector<std::vector<int>> suffix(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      suffix[i][j] = a[i] == b[j] ? suffix[i + 1][j + 1] + 1 : std::max(suffix[i + 1][j], suffix[i][j + 1]);

  LineMapping out;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (a[i] == b[j] && suffix[i][j] == suffix[i + 1][j + 1] + 1) {
      out.pairs.emplace_back(static_cast<int>(i) + 1, static_cast<int>(j) + 1);
      ++i;
      ++j;
    } else if (suffix[i][j + 1] == suffix[i][j]) {
      ++j;  // keep a[i] in play: it may still match later in b
    } else {
      ++i;
    }
  }
  std::set<int> ma, mb;
  for (const auto& [x, y] : out.pairs) {
    ma.insert(x);
    mb.insert(y);
  }
  for (int k = 1; k <= static_cast<int>(n); ++k)
    if (!ma.count(k)) out.unmatched_a.insert(k);
  for (int k = 1; k <= static_cast<int>(m); ++k)
    if (!mb.count(k)) out.unmatched_b.insert(k);
  return out;
}

LineMapping diff_code(const std::string& source_a, const std::string& source_b) {
  return diff_lines(split_lines(source_a), split_lines(source_b));
}

LineMapping diff_code(const store::CodeVersion& a, const store::CodeVersion& b) {
  return diff_code(a.source_text, b.source_text);
}

std::string to_string(StateKind kind) { return kind == StateKind::Call ? "call" : "snapshot"; }

bool StateDiff::empty() const {
  return added.empty() && removed.empty() && changed.empty() && events.empty() && code_equal && !hooks &&
         !return_value && !lines;
}

std::set<std::string> StateDiff::changed_names() const {
  std::set<std::string> out;
  for (const auto& c : changed) out.insert(c.name);
  return out;
}

namespace {

struct Facets {
  store::CallRecord call;
  std::optional<store::SnapshotRecord> snapshot;
  std::map<std::string, std::string> vars;  // name -> content hash
  std::vector<store::EventRecord> events;
};

std::string hash_of(const store::Store& store, store::Id version) {
  auto v = store.version(version);
  if (!v) throw store::NotFound("unknown object version " + std::to_string(version));
  return v->content_hash;
}

Facets load(const store::Store& store, StateRef ref) {
  Facets f;
  const store::VarMap* locals;
  const store::VarMap* globals;
  if (ref.kind == StateKind::Call) {
    f.call = store::require_call(store, ref.id);
    locals = &f.call.locals;
    globals = &f.call.globals;
    f.events = store.events(ref.id);
  } else {
    f.snapshot = store::require_snapshot(store, ref.id);
    f.call = store::require_call(store, f.snapshot->call);
    locals = &f.snapshot->locals;
    globals = &f.snapshot->globals;
    for (auto& e : store.events(f.call.id))
      if (e.snapshot == f.snapshot->id) f.events.push_back(std::move(e));
  }
  for (const auto& [name, v] : *globals) f.vars[name] = hash_of(store, v);
  for (const auto& [name, v] : *locals) f.vars[name] = hash_of(store, v);
  return f;
}

using EventKey = std::pair<std::vector<std::string>, std::string>;

std::map<std::string, std::vector<EventKey>> by_callable(const store::Store& store,
                                                         const std::vector<store::EventRecord>& events) {
  std::map<std::string, std::vector<EventKey>> out;
  for (const auto& e : events) {
    EventKey k;
    for (auto a : e.args) k.first.push_back(hash_of(store, a));
    k.second = hash_of(store, e.return_value);
    out[e.callable].push_back(std::move(k));
  }
  return out;
}

std::string blob_hash(const store::Store& store, const std::optional<store::Id>& blob) {
  if (!blob) return "";
  auto b = store.blob(*blob);
  return b ? b->content_hash : "";
}

}  // namespace

StateDiff compare_states(const store::Store& store, StateRef a, StateRef b) {
  if (a.kind != b.kind)
    throw CompareError("granularity mismatch: cannot compare a " + to_string(a.kind) + " with a " + to_string(b.kind));
  Facets fa = load(store, a);
  Facets fb = load(store, b);
  if (fa.call.granularity != fb.call.granularity)
    throw CompareError("granularity mismatch: " + fa.call.granularity + " call vs " + fb.call.granularity + " call");

  StateDiff d;
  for (const auto& [name, h] : fa.vars) {
    auto it = fb.vars.find(name);
    if (it == fb.vars.end()) d.removed.insert(name);
    else if (it->second != h) d.changed.push_back({name, h, it->second});
  }
  for (const auto& [name, _] : fb.vars)
    if (!fa.vars.count(name)) d.added.insert(name);

  auto ea = by_callable(store, fa.events);
  auto eb = by_callable(store, fb.events);
  std::set<std::string> callables;
  for (const auto& [c, _] : ea) callables.insert(c);
  for (const auto& [c, _] : eb) callables.insert(c);
  for (const auto& c : callables) {
    const auto& sa = ea[c];
    const auto& sb = eb[c];
    if (sa == sb) continue;
    EventDiff e{c, sa.size(), sb.size(), std::nullopt};
    std::size_t k = 0;
    while (k < sa.size() && k < sb.size() && sa[k] == sb[k]) ++k;
    e.first_divergence = k;
    d.events.push_back(e);
  }

  store::CodeVersion ca = store::require_code(store, fa.call.code);
  store::CodeVersion cb = store::require_code(store, fb.call.code);
  d.code_equal = ca.text_hash == cb.text_hash && ca.function == cb.function;
  d.code = diff_code(ca, cb);

  std::string ha = blob_hash(store, fa.call.hook_meta), hb = blob_hash(store, fb.call.hook_meta);
  if (a.kind == StateKind::Call && ha != hb) d.hooks = std::make_pair(ha, hb);

  if (a.kind == StateKind::Call) {
    std::string ra = fa.call.return_value ? hash_of(store, *fa.call.return_value) : "";
    std::string rb = fb.call.return_value ? hash_of(store, *fb.call.return_value) : "";
    if (ra != rb) d.return_value = std::make_pair(ra, rb);
  } else if (fa.snapshot->line != fb.snapshot->line) {
    // Only a difference when the lines do not correspond under the mapping.
    auto mapped = d.code.to_b(fa.snapshot->line);
    if (!mapped || *mapped != fb.snapshot->line) d.lines = std::make_pair(fa.snapshot->line, fb.snapshot->line);
  }
  return d;
}

namespace {

std::vector<store::CallRecord> window_calls(const store::Store& store, const Window& w) {
  store::require_session(store, w.session);
  std::vector<store::CallRecord> out;
  for (auto& c : store.calls(w.session)) {
    if (w.start && c.ordinal < *w.start) continue;
    if (w.end && c.ordinal > *w.end) continue;
    out.push_back(std::move(c));
  }
  return out;
}

void align_snapshots(const store::Store& store, const store::CallRecord& ca, const store::CallRecord& cb,
                     std::vector<AlignedPair>& out) {
  auto sa = store.snapshots(ca.id);
  auto sb = store.snapshots(cb.id);
  LineMapping map = diff_code(store::require_code(store, ca.code), store::require_code(store, cb.code));

  // (line in b's coordinates, occurrence) -> index in sb
  std::map<std::pair<int, int>, std::size_t> b_keys;
  std::map<int, int> seen_b;
  for (std::size_t j = 0; j < sb.size(); ++j) b_keys[{sb[j].line, seen_b[sb[j].line]++}] = j;

  std::vector<bool> used_b(sb.size(), false);
  std::map<int, int> seen_a;
  std::size_t next_b = 0;
  for (const auto& s : sa) {
    int occurrence = seen_a[s.line]++;
    std::optional<std::size_t> match;
    if (auto mapped = map.to_b(s.line)) {
      auto it = b_keys.find({*mapped, occurrence});
      if (it != b_keys.end() && !used_b[it->second]) match = it->second;
    }
    if (!match) {
      out.push_back({StateRef::snapshot(s.id), std::nullopt});
      continue;
    }
    for (; next_b < *match; ++next_b)
      if (!used_b[next_b]) {
        used_b[next_b] = true;
        out.push_back({std::nullopt, StateRef::snapshot(sb[next_b].id)});
      }
    used_b[*match] = true;
    out.push_back({StateRef::snapshot(s.id), StateRef::snapshot(sb[*match].id)});
  }
  for (std::size_t j = 0; j < sb.size(); ++j)
    if (!used_b[j]) out.push_back({std::nullopt, StateRef::snapshot(sb[j].id)});
}

}  // namespace

std::vector<AlignedPair> align(const store::Store& store, const Window& a, const Window& b) {
  auto ca = window_calls(store, a);
  auto cb = window_calls(store, b);
  std::vector<AlignedPair> out;
  std::size_t n = std::max(ca.size(), cb.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i < ca.size() && i < cb.size()) {
      out.push_back({StateRef::call(ca[i].id), StateRef::call(cb[i].id)});
      if (ca[i].granularity == "line" && cb[i].granularity == "line") align_snapshots(store, ca[i], cb[i], out);
    } else if (i < ca.size()) {
      out.push_back({StateRef::call(ca[i].id), std::nullopt});
      for (const auto& s : store.snapshots(ca[i].id)) out.push_back({StateRef::snapshot(s.id), std::nullopt});
    } else {
      out.push_back({std::nullopt, StateRef::call(cb[i].id)});
      for (const auto& s : store.snapshots(cb[i].id)) out.push_back({std::nullopt, StateRef::snapshot(s.id)});
    }
  }
  return out;
}

}  // namespace spacetime::compare
