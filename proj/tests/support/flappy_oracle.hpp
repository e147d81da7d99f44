#pragma once

// Plain re-execution of demos/flappy.trk, without the monitor or the store:
// the reference for what a branched replay should look like.

#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "spacetime/lang/builtins.hpp"
#include "spacetime/lang/interpreter.hpp"
#include "spacetime/lang/program.hpp"
#include "support/fixtures.hpp"

namespace oracle {

inline const std::vector<std::string>& flappy_state_names() {
  static const std::vector<std::string> names = {"frame",    "gravity",  "flap_speed", "width",
                                                 "height",   "bird_x",   "bird_y",     "velocity",
                                                 "pipes",    "clouds",   "score",      "alive"};
  return names;
}

// Renders every name display_game can see at entry to frame `probe`. When
// `gravity` is set, the global is overwritten just before frame `branch`.
inline std::map<std::string, std::string> plain_flappy_state(std::optional<double> gravity, int branch, int probe) {
  using namespace spacetime;
  std::string src = fx::demo("flappy.trk");
  std::string inject;
  if (gravity) inject += "    if frame == " + std::to_string(branch) + ":\n        gravity = " + std::to_string(*gravity) + "\n";
  inject += "    if frame == " + std::to_string(probe) + ":\n";
  for (const auto& n : flappy_state_names()) inject += "        print(\"@@\", \"" + n + "\", " + n + ")\n";
  fx::replace(src, "    shapes = display_game(frame)\n", inject + "    shapes = display_game(frame)\n");
  auto program = lang::load_program(src);
  lang::Env env;
  lang::RuntimeConfig config;
  config.seed = 7;
  config.events =
      std::make_shared<lang::EventScript>(lang::EventScript::from_file(fx::demo_path("flappy_events.jsonl")));
  lang::install_all(env, config);
  std::ostringstream out;
  lang::Interpreter interp(program, env);
  interp.set_output(&out);
  interp.run_top_level();

  std::map<std::string, std::string> state;
  std::istringstream lines(out.str());
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("@@ ", 0) != 0) continue;
    auto sp = line.find(' ', 3);
    state[line.substr(3, sp - 3)] = line.substr(sp + 1);
  }
  return state;
}

// Names whose values differ at entry to frame `probe` between the original
// run and one where gravity changed before frame `branch`.
inline std::set<std::string> flappy_branch_changes(double gravity, int branch, int probe) {
  auto a = plain_flappy_state(std::nullopt, branch, probe);
  auto b = plain_flappy_state(gravity, branch, probe);
  std::set<std::string> changed;
  for (const auto& [k, v] : a)
    if (b.at(k) != v) changed.insert(k);
  return changed;
}

}  // namespace oracle
