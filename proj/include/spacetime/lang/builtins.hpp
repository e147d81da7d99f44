#pragma once

// Host builtins available to Trk programs.
//
// Pure builtins (len, append, range, ...) are deterministic. External ones
// (rand_int, rand_float, clock_ms, get_events and any scripted callable) are
// the only sources of non-reproducible values and are therefore the only
// candidates for tracking and mocking.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "spacetime/lang/interpreter.hpp"

namespace spacetime::lang {

void install_standard(Env& env);

// rand_int(a, b) inclusive and rand_float() in [0, 1), from one mt19937_64.
void install_random(Env& env, std::uint64_t seed);

// clock_ms(): wall-clock milliseconds since the epoch.
void install_clock(Env& env);

// Scripted external events: one JSON object per line,
// {"callable": name, "return": value}, consumed FIFO per callable.
class EventScript {
 public:
  static EventScript from_text(std::string_view text);
  static EventScript from_file(const std::string& path);

  // Next scripted return for `callable` converted into `heap`, or nullopt
  // when the queue is exhausted.
  std::optional<Value> next(const std::string& callable, Heap& heap);
  std::size_t remaining(const std::string& callable) const;
  std::vector<std::string> callables() const;

 private:
  // Stored as JSON text so each consumer gets fresh heap objects.
  std::map<std::string, std::deque<std::string>> queues_;
};

// Registers get_events() plus every other callable named in the script that
// is not already bound. Exhausted get_events returns []; others return nil.
void install_event_script(Env& env, std::shared_ptr<EventScript> script);

// open_screen(w, h) -> native "screen"; draw(screen, shapes) -> nil.
void install_game(Env& env);

struct RuntimeConfig {
  std::uint64_t seed = 0;
  std::shared_ptr<EventScript> events;
};

// Everything above, in one call.
void install_all(Env& env, const RuntimeConfig& config);

// Converts a JSON text value (null, bool, number, string, array, object)
// into a guest value.
Value value_from_json(std::string_view json, Heap& heap);

}  // namespace spacetime::lang
