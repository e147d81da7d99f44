#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "spacetime/lang/builtins.hpp"
#include "spacetime/lang/program.hpp"
#include "spacetime/monitor/recorder.hpp"
#include "spacetime/monitor/spec.hpp"

#ifndef SPACETIME_DEMOS_DIR
#define SPACETIME_DEMOS_DIR "demos"
#endif

namespace fx {

inline std::string demo_path(const std::string& name) { return std::string(SPACETIME_DEMOS_DIR) + "/" + name; }

inline std::string read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string demo(const std::string& name) { return read(demo_path(name)); }

inline void replace(std::string& text, const std::string& from, const std::string& to) {
  auto p = text.find(from);
  if (p == std::string::npos) throw std::runtime_error("fixture text not found: " + from);
  text.replace(p, from.size(), to);
}

struct Recorded {
  spacetime::monitor::RunResult run;
  std::string output;
};

// Records `source` with its in-source pragmas.
inline Recorded record(spacetime::store::Store& store, const std::string& source, std::uint64_t seed = 1,
                       const std::string& events_path = {}, const std::string& label = "test") {
  using namespace spacetime;
  auto program = lang::load_program(source, label);
  lang::Env env;
  lang::RuntimeConfig config;
  config.seed = seed;
  if (!events_path.empty())
    config.events = std::make_shared<lang::EventScript>(lang::EventScript::from_file(events_path));
  lang::install_all(env, config);
  std::ostringstream out;
  monitor::RunOptions o;
  o.label = label;
  o.output = &out;
  auto hooks = monitor::HookRegistry::with_builtins();
  Recorded r;
  r.run = monitor::run_monitored(program, env, monitor::specs_from_pragmas(program), hooks, store, o);
  r.output = out.str();
  return r;
}

inline Recorded record_flappy(spacetime::store::Store& store) {
  return record(store, demo("flappy.trk"), 7, demo_path("flappy_events.jsonl"), "flappy");
}

}  // namespace fx
