#pragma once

// The HTTP API over a store, independent of the transport. Paths:
//
//   GET  /api/sessions                      GET  /api/sessions/{id}
//   GET  /api/sessions/{id}/calls[?function=f]
//   GET  /api/sessions/{id}/hashes
//   GET  /api/calls/{id}                    GET  /api/calls/{id}/trace
//   GET  /api/snapshots/{id}               GET  /api/states/{call|snapshot}/{id}
//   GET  /api/compare?a=call:1&b=call:2
//   GET  /api/align?a=S&b=S[&a_start=&a_end=&b_start=&b_end=]
//   GET  /api/code?function=f               GET  /api/code/{id}
//   GET  /api/blobs/{id}                    (raw blob bytes)
//   GET  /api/export[?session=1,2]          (interchange stream)
//   POST /api/replay                        GET  /api/replays/{job}
//
// Errors come back as {"error": {"code": ..., "message": ...}}.

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "spacetime/monitor/hooks.hpp"
#include "spacetime/replay/replay.hpp"
#include "spacetime/store/store.hpp"

namespace spacetime::service {

using json = nlohmann::json;

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

// Thrown by handlers; becomes a structured error body.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

// Parses "all", "only:a,b" or "except:a,b".
std::pair<replay::Migrate, std::set<std::string>> parse_migrate(const std::string& text);

// Builds a replay request from its JSON form:
//   {"mode": "full"|"from_step"|"window"|"function"|"from_snapshot",
//    "session": id, "call": id, "snapshot": id, "from": k, "window": [a, b],
//    "migrate": "all"|"only:a,b"|"except:a,b",
//    "manual_globals": {"name": "<guest literal>"}, "mocked": [names],
//    "code_override": {"fn": "<source>" | code version id},
//    "label": text, "seed": n, "events": "<event script text>"}
// The CLI builds the same JSON from its flags, so both front ends produce
// identical plans.
replay::ReplayRequest parse_replay_request(const json& body);

json session_json(const store::Store& store, const store::Session& s);
json call_json(const store::CallRecord& c);
json replay_result_json(const replay::ReplayResult& r);

class Api {
 public:
  Api(store::Store& store, monitor::HookRegistry hooks);
  ~Api();
  Api(const Api&) = delete;
  Api& operator=(const Api&) = delete;

  Response handle(const std::string& method, const std::string& target, const std::string& body);

 private:
  struct Job {
    int id = 0;
    replay::ReplayRequest request;
    std::string status = "queued";  // queued | running | done | error
    json result;
  };

  Response route(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query,
                 const std::string& body);
  Response submit_replay(const std::string& body);
  Response job_status(int id);
  void worker();

  store::Store& store_;
  monitor::HookRegistry hooks_;

  std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::deque<int> queue_;
  std::map<int, Job> jobs_;
  int next_job_ = 1;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace spacetime::service
