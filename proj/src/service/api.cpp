#include "spacetime/service/api.hpp"

#include <sstream>

#include "spacetime/compare/view.hpp"
#include "spacetime/lang/errors.hpp"
#include "spacetime/lang/parser.hpp"
#include "spacetime/store/interchange.hpp"
#include "spacetime/store/queries.hpp"
#include "spacetime/store/records.hpp"

namespace spacetime::service {

namespace {

Response json_response(const json& body, int status = 200) {
  Response r;
  r.status = status;
  r.body = body.dump();
  return r;
}

Response error_response(int status, const std::string& code, const std::string& message) {
  return json_response(json{{"error", {{"code", code}, {"message", message}}}}, status);
}

ApiError bad_request(const std::string& message) { return ApiError(400, "bad_request", message); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string url_decode(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out += ' ';
    } else if (s[i] == '%' && i + 2 < s.size()) {
      out += static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

store::Id parse_id(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(text, &used);
    if (used == text.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw bad_request("invalid " + what + ": '" + text + "'");
}

std::optional<std::int64_t> opt_int(const std::map<std::string, std::string>& q, const std::string& key) {
  auto it = q.find(key);
  if (it == q.end() || it->second.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    long long v = std::stoll(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw bad_request("invalid " + key + ": '" + it->second + "'");
}

const std::string& required(const std::map<std::string, std::string>& q, const std::string& key) {
  auto it = q.find(key);
  if (it == q.end()) throw bad_request("missing query parameter '" + key + "'");
  return it->second;
}

// "call:12" or "snapshot:40"
compare::StateRef parse_state(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw bad_request("state must be call:<id> or snapshot:<id>, got '" + text + "'");
  std::string kind = text.substr(0, colon);
  store::Id id = parse_id(text.substr(colon + 1), "state id");
  if (kind == "call") return compare::StateRef{compare::StateKind::Call, id};
  if (kind == "snapshot") return compare::StateRef{compare::StateKind::Snapshot, id};
  throw bad_request("unknown state kind '" + kind + "'");
}

}  // namespace

std::pair<replay::Migrate, std::set<std::string>> parse_migrate(const std::string& text) {
  if (text == "all" || text.empty()) return {replay::Migrate::All, {}};
  auto colon = text.find(':');
  std::string mode = text.substr(0, colon);
  std::set<std::string> names;
  if (colon != std::string::npos)
    for (auto& n : split(text.substr(colon + 1), ','))
      if (!n.empty()) names.insert(n);
  if (mode == "only") return {replay::Migrate::Only, names};
  if (mode == "except") return {replay::Migrate::Except, names};
  throw std::invalid_argument("migrate must be all, only:a,b or except:a,b (got '" + text + "')");
}

replay::ReplayRequest parse_replay_request(const json& body) {
  if (!body.is_object()) throw std::invalid_argument("replay request must be a JSON object");
  static const std::set<std::string> known = {"mode",     "session",        "call",   "snapshot",      "from",
                                              "window",   "migrate",        "mocked", "manual_globals", "label",
                                              "seed",     "code_override",  "events"};
  for (const auto& [k, _] : body.items())
    if (!known.count(k)) throw std::invalid_argument("unknown replay option '" + k + "'");

  replay::ReplayRequest r;
  r.mode = body.value("mode", std::string("full"));
  if (body.contains("session")) r.session = body["session"].get<store::Id>();
  if (body.contains("call")) r.call = body["call"].get<store::Id>();
  if (body.contains("snapshot")) r.snapshot = body["snapshot"].get<store::Id>();
  if (body.contains("from")) r.from = body["from"].get<std::int64_t>();
  if (body.contains("window")) {
    const auto& w = body["window"];
    if (!w.is_array() || w.size() != 2) throw std::invalid_argument("window must be [start, end]");
    r.plan.window = std::make_pair(w[0].get<std::int64_t>(), w[1].get<std::int64_t>());
  }
  auto [mode, names] = parse_migrate(body.value("migrate", std::string("all")));
  r.plan.migrate = mode;
  r.plan.migrate_names = names;
  if (body.contains("mocked"))
    for (const auto& m : body["mocked"]) r.plan.mocked.insert(m.get<std::string>());
  if (body.contains("manual_globals")) {
    lang::Heap heap;
    for (const auto& [name, text] : body["manual_globals"].items()) {
      try {
        r.plan.manual_globals[name] = lang::parse_literal(text.get<std::string>(), heap);
      } catch (const std::runtime_error& e) {
        throw std::invalid_argument("value for global '" + name + "': " + e.what());
      }
    }
  }
  if (body.contains("code_override")) {
    for (const auto& [fn, v] : body["code_override"].items()) {
      if (v.is_string())
        r.plan.code_override[fn] = v.get<std::string>();
      else if (v.is_number_integer())
        r.plan.code_override[fn] = v.get<store::Id>();
      else
        throw std::invalid_argument("code_override for '" + fn + "' must be source text or a code version id");
    }
  }
  r.plan.label = body.value("label", std::string());
  if (body.contains("seed")) r.env.seed = body["seed"].get<std::uint64_t>();
  if (body.contains("events"))
    r.env.events = std::make_shared<lang::EventScript>(lang::EventScript::from_text(body["events"].get<std::string>()));
  return r;
}

json session_json(const store::Store& store, const store::Session& s) {
  json j = store::to_json(s);
  j["call_count"] = store.call_count(s.id);
  return j;
}

json call_json(const store::CallRecord& c) {
  return json{{"id", c.id},
              {"session", c.session},
              {"ordinal", c.ordinal},
              {"function", c.function},
              {"code", c.code},
              {"parent_call", c.parent_call ? json(*c.parent_call) : json()},
              {"granularity", c.granularity},
              {"hook_meta", c.hook_meta ? json(*c.hook_meta) : json()},
              {"error", c.error}};
}

json replay_result_json(const replay::ReplayResult& r) {
  return json{{"session", r.session},
              {"calls", r.stats.calls},
              {"snapshots", r.stats.snapshots},
              {"events", r.stats.events},
              {"skipped", r.stats.skipped},
              {"failed", r.failed()},
              {"failed_at", r.stats.failed_at ? json(*r.stats.failed_at) : json()},
              {"error", r.stats.error},
              {"mocked_served", r.mocked_served},
              {"fell_through", r.fell_through},
              {"warnings", r.warnings}};
}

Api::Api(store::Store& store, monitor::HookRegistry hooks) : store_(store), hooks_(std::move(hooks)) {
  worker_ = std::thread([this] { worker(); });
}

Api::~Api() {
  {
    std::lock_guard<std::mutex> lock(jobs_mutex_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

Response Api::handle(const std::string& method, const std::string& target, const std::string& body) {
  std::string path = target;
  std::map<std::string, std::string> query;
  if (auto q = target.find('?'); q != std::string::npos) {
    path = target.substr(0, q);
    for (const auto& part : split(target.substr(q + 1), '&')) {
      if (part.empty()) continue;
      auto eq = part.find('=');
      if (eq == std::string::npos)
        query[url_decode(part)] = "";
      else
        query[url_decode(part.substr(0, eq))] = url_decode(part.substr(eq + 1));
    }
  }
  try {
    return route(method, path, query, body);
  } catch (const ApiError& e) {
    return error_response(e.status(), e.code(), e.what());
  } catch (const store::NotFound& e) {
    return error_response(404, "not_found", e.what());
  } catch (const compare::CompareError& e) {
    return error_response(422, "incomparable", e.what());
  } catch (const replay::ReplayError& e) {
    return error_response(422, "replay_rejected", e.what());
  } catch (const json::exception& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const std::invalid_argument& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

Response Api::route(const std::string& method, const std::string& path,
                    const std::map<std::string, std::string>& query, const std::string& body) {
  auto parts = split(path, '/');
  // "/api/x/y" -> ["", "api", "x", "y"]
  if (parts.size() < 3 || !parts[0].empty() || parts[1] != "api") throw ApiError(404, "not_found", "no route " + path);
  parts.erase(parts.begin(), parts.begin() + 2);
  if (!parts.empty() && parts.back().empty()) parts.pop_back();
  const std::string& head = parts[0];
  auto n = parts.size();

  if (method == "POST") {
    if (head == "replay" && n == 1) return submit_replay(body);
    throw ApiError(405, "method_not_allowed", "POST not supported on " + path);
  }
  if (method != "GET") throw ApiError(405, "method_not_allowed", method + " not supported");

  if (head == "sessions") {
    if (n == 1) {
      json out = json::array();
      for (const auto& s : store_.sessions()) out.push_back(session_json(store_, s));
      return json_response(out);
    }
    store::Id id = parse_id(parts[1], "session id");
    auto s = store::require_session(store_, id);
    if (n == 2) return json_response(session_json(store_, s));
    if (n == 3 && parts[2] == "calls") {
      std::optional<std::string> fn;
      if (auto it = query.find("function"); it != query.end()) fn = it->second;
      json out = json::array();
      for (const auto& c : store_.calls(id, fn)) out.push_back(call_json(c));
      return json_response(out);
    }
    if (n == 3 && parts[2] == "hashes") return json_response(store::session_state_hashes(store_, id));
  } else if (head == "calls" && n >= 2) {
    store::Id id = parse_id(parts[1], "call id");
    if (n == 2) return json_response(compare::to_json(compare::view(store_, {compare::StateKind::Call, id})));
    if (n == 3 && parts[2] == "trace") {
      store::require_call(store_, id);
      json out = json::array();
      for (const auto& s : store_.snapshots(id))
        out.push_back(compare::to_json(compare::view(store_, {compare::StateKind::Snapshot, s.id})));
      return json_response(out);
    }
  } else if (head == "snapshots" && n == 2) {
    store::Id id = parse_id(parts[1], "snapshot id");
    return json_response(compare::to_json(compare::view(store_, {compare::StateKind::Snapshot, id})));
  } else if (head == "states" && n == 3) {
    auto ref = parse_state(parts[1] + ":" + parts[2]);
    return json_response(compare::to_json(compare::view(store_, ref)));
  } else if (head == "compare" && n == 1) {
    auto a = parse_state(required(query, "a"));
    auto b = parse_state(required(query, "b"));
    return json_response(compare::to_json(compare::compare_states(store_, a, b)));
  } else if (head == "align" && n == 1) {
    compare::Window a{parse_id(required(query, "a"), "session id"), opt_int(query, "a_start"), opt_int(query, "a_end")};
    compare::Window b{parse_id(required(query, "b"), "session id"), opt_int(query, "b_start"), opt_int(query, "b_end")};
    store::require_session(store_, a.session);
    store::require_session(store_, b.session);
    return json_response(compare::to_json(compare::align(store_, a, b)));
  } else if (head == "code") {
    if (n == 1) {
      std::optional<std::string> fn;
      if (auto it = query.find("function"); it != query.end()) fn = it->second;
      json out = json::array();
      for (const auto& c : store_.code_versions(fn)) out.push_back(store::to_json(c));
      return json_response(out);
    }
    if (n == 2) return json_response(store::to_json(store::require_code(store_, parse_id(parts[1], "code id"))));
  } else if (head == "blobs" && n == 2) {
    store::Id id = parse_id(parts[1], "blob id");
    auto b = store_.blob(id);
    if (!b) throw ApiError(404, "not_found", "unknown hook blob " + parts[1]);
    auto p = store_.payload(b->content_hash);
    if (!p) throw ApiError(500, "internal", "hook blob " + parts[1] + " has no payload");
    Response r;
    r.body = p->data;
    r.content_type = (b->kind == "scene" || b->kind == "json" || b->kind == "bundle") ? "application/json"
                                                                                     : "application/octet-stream";
    r.headers["X-Blob-Kind"] = b->kind;
    return r;
  } else if (head == "export" && n == 1) {
    std::optional<std::vector<store::Id>> sessions;
    if (auto it = query.find("session"); it != query.end()) {
      sessions.emplace();
      for (const auto& s : split(it->second, ',')) {
        sessions->push_back(parse_id(s, "session id"));
        store::require_session(store_, sessions->back());
      }
    }
    Response r;
    r.content_type = "application/x-ndjson";
    r.body = store::export_string(store_, sessions);
    return r;
  } else if (head == "replays" && n == 2) {
    return job_status(static_cast<int>(parse_id(parts[1], "job id")));
  }
  throw ApiError(404, "not_found", "no route " + path);
}

Response Api::submit_replay(const std::string& body) {
  json j;
  try {
    j = json::parse(body.empty() ? "{}" : body);
  } catch (const json::exception& e) {
    throw bad_request(std::string("request body is not JSON: ") + e.what());
  }
  auto request = parse_replay_request(j);
  // Reject requests that name missing rows before queueing them.
  if (request.session) store::require_session(store_, *request.session);
  if (request.call) store::require_call(store_, *request.call);
  if (request.snapshot) store::require_snapshot(store_, *request.snapshot);

  std::unique_lock<std::mutex> lock(jobs_mutex_);
  int id = next_job_++;
  bool queued_behind = busy_ || !queue_.empty();
  Job job;
  job.id = id;
  job.request = std::move(request);
  jobs_.emplace(id, std::move(job));
  queue_.push_back(id);
  jobs_cv_.notify_all();
  if (queued_behind) {
    Response r = json_response(json{{"job", id}, {"status", "queued"}}, 202);
    r.headers["Location"] = "/api/replays/" + std::to_string(id);
    return r;
  }
  // Idle service: run it now and answer with the result.
  jobs_cv_.wait(lock, [&] {
    auto& s = jobs_.at(id).status;
    return s == "done" || s == "error" || stopping_;
  });
  const Job& done = jobs_.at(id);
  if (done.status == "error") {
    const auto& e = done.result["error"];
    return error_response(done.result.value("http_status", 422), e["code"], e["message"]);
  }
  json out = done.result;
  out["job"] = id;
  out["status"] = done.status;
  return json_response(out);
}

Response Api::job_status(int id) {
  std::lock_guard<std::mutex> lock(jobs_mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw ApiError(404, "not_found", "unknown replay job " + std::to_string(id));
  json out = it->second.result.is_object() ? it->second.result : json::object();
  out.erase("http_status");
  out["job"] = id;
  out["status"] = it->second.status;
  return json_response(out);
}

void Api::worker() {
  for (;;) {
    replay::ReplayRequest request;
    int id;
    {
      std::unique_lock<std::mutex> lock(jobs_mutex_);
      jobs_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
      busy_ = true;
      jobs_.at(id).status = "running";
      request = jobs_.at(id).request;
    }
    json result;
    std::string status = "done";
    auto fail = [&](int http, const std::string& code, const std::string& message) {
      status = "error";
      result = json{{"http_status", http}, {"error", {{"code", code}, {"message", message}}}};
    };
    try {
      result = replay_result_json(replay::execute(store_, request, hooks_));
    } catch (const store::NotFound& e) {
      fail(404, "not_found", e.what());
    } catch (const replay::ReplayError& e) {
      fail(422, "replay_rejected", e.what());
    } catch (const std::exception& e) {
      fail(500, "internal", e.what());
    }
    {
      std::lock_guard<std::mutex> lock(jobs_mutex_);
      jobs_.at(id).status = status;
      jobs_.at(id).result = std::move(result);
      busy_ = false;
    }
    jobs_cv_.notify_all();
  }
}

}  // namespace spacetime::service
