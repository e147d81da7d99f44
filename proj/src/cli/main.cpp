// spacetime: record, replay, inspect and compare Trk program executions.
//
// Exit codes: 0 success; 1 user error (bad flags, unknown ids, programs that
// fail to parse or fail while running); 2 internal error (store failures and
// anything unexpected).

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spacetime/compare/view.hpp"
#include "spacetime/lang/builtins.hpp"
#include "spacetime/lang/errors.hpp"
#include "spacetime/lang/parser.hpp"
#include "spacetime/lang/program.hpp"
#include "spacetime/monitor/recorder.hpp"
#include "spacetime/monitor/spec.hpp"
#include "spacetime/service/api.hpp"
#include "spacetime/service/server.hpp"
#include "spacetime/store/interchange.hpp"
#include "spacetime/store/queries.hpp"

namespace {

using namespace spacetime;
using json = nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::pair<std::string, std::string> split_once(const std::string& s, char sep) {
  auto p = s.find(sep);
  if (p == std::string::npos) return {"", s};
  return {s.substr(0, p), s.substr(p + 1)};
}

std::set<std::string> split_names(const std::string& s) {
  std::set<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.insert(item);
  return out;
}

std::pair<std::int64_t, std::int64_t> parse_range(const std::string& s) {
  auto [a, b] = split_once(s, ':');
  try {
    return {std::stoll(a), std::stoll(b)};
  } catch (const std::exception&) {
    throw UsageError("expected a:b, got '" + s + "'");
  }
}

compare::StateRef parse_state(const std::string& s) {
  auto [kind, id] = split_once(s, ':');
  if (kind.empty()) kind = "call";
  try {
    if (kind == "call") return {compare::StateKind::Call, std::stoll(id)};
    if (kind == "snapshot") return {compare::StateKind::Snapshot, std::stoll(id)};
  } catch (const std::exception&) {
  }
  throw UsageError("state must be call:<id> or snapshot:<id>, got '" + s + "'");
}

struct Db {
  std::string path;
  std::unique_ptr<store::Store> open() const {
    auto dir = std::filesystem::path(path).parent_path();
    if (!dir.empty() && !std::filesystem::is_directory(dir))
      throw UsageError("database directory " + dir.string() + " does not exist");
    return store::Store::open(path);
  }
};

void print_stats(std::ostream& out, store::Id session, const monitor::RecordStats& s) {
  out << "session " << session << ": " << s.calls << " calls, " << s.snapshots << " snapshots, " << s.events
      << " events, " << s.skipped << " skipped\n";
  if (!s.error.empty()) {
    out << "failed";
    if (s.failed_at) out << " at call #" << *s.failed_at;
    out << ": " << s.error << "\n";
  }
}

// ---- run ---------------------------------------------------------------------

struct RunArgs {
  std::string file;
  std::string label;
  std::uint64_t seed = 1;
  std::string events;
  std::string entry;
  std::vector<std::string> args;
  std::vector<std::string> monitor;
  std::vector<std::string> granularity;
  std::vector<std::string> track;
  std::string specs;
  bool json = false;
};

int cmd_run(const Db& db, const RunArgs& a) {
  auto program = lang::load_program(read_file(a.file), a.file);
  auto specs = a.specs.empty() ? monitor::specs_from_pragmas(program) : monitor::specs_from_json(read_file(a.specs));
  for (const auto& fn : a.monitor)
    if (!specs.count(fn)) specs[fn].function = fn;
  // --granularity [fn:]function|line, --track [fn:]a,b; without fn they
  // apply to every monitored function.
  auto targets = [&](const std::string& fn) {
    std::vector<monitor::MonitorSpec*> out;
    if (fn.empty()) {
      for (auto& [_, s] : specs) out.push_back(&s);
    } else {
      if (!specs.count(fn)) specs[fn].function = fn;
      out.push_back(&specs[fn]);
    }
    return out;
  };
  for (const auto& g : a.granularity) {
    auto [fn, level] = split_once(g, ':');
    if (level != "function" && level != "line") throw UsageError("granularity must be function or line");
    for (auto* s : targets(fn)) s->granularity = level == "line" ? lang::Granularity::Line : lang::Granularity::Function;
  }
  for (const auto& t : a.track) {
    auto [fn, names] = split_once(t, ':');
    for (auto* s : targets(fn))
      for (const auto& n : split_names(names)) s->tracked.insert(n);
  }

  lang::Env env;
  lang::RuntimeConfig config;
  config.seed = a.seed;
  if (!a.events.empty())
    config.events = std::make_shared<lang::EventScript>(lang::EventScript::from_file(a.events));
  lang::install_all(env, config);

  monitor::RunOptions options;
  options.label = a.label.empty() ? std::filesystem::path(a.file).filename().string() : a.label;
  options.entry = a.entry;
  lang::Heap heap;
  for (const auto& lit : a.args) options.args.push_back(lang::parse_literal(lit, heap));
  options.output = a.json ? nullptr : &std::cout;

  auto store = db.open();
  auto hooks = monitor::HookRegistry::with_builtins();
  auto r = monitor::run_monitored(program, env, specs, hooks, *store, options);
  if (a.json) {
    std::cout << json{{"session", r.session},
                      {"calls", r.stats.calls},
                      {"snapshots", r.stats.snapshots},
                      {"events", r.stats.events},
                      {"skipped", r.stats.skipped},
                      {"failed", r.failed()},
                      {"error", r.stats.error}}
                     .dump(2)
              << "\n";
  } else {
    print_stats(std::cout, r.session, r.stats);
  }
  return r.failed() ? 1 : 0;
}

// ---- replay ------------------------------------------------------------------

struct ReplayArgs {
  store::Id session = 0;
  std::optional<std::int64_t> from;
  std::string window;
  std::optional<store::Id> call;
  std::optional<store::Id> snapshot;
  std::vector<std::string> mock;
  std::string migrate = "all";
  std::vector<std::string> set;
  std::string code;
  std::optional<std::uint64_t> seed;
  std::string events;
  std::string label;
  bool json = false;
};

int cmd_replay(const Db& db, const ReplayArgs& a) {
  json body;
  int modes = (a.from ? 1 : 0) + (!a.window.empty() ? 1 : 0) + (a.call ? 1 : 0) + (a.snapshot ? 1 : 0);
  if (modes > 1) throw UsageError("--from, --window, --call and --snapshot are mutually exclusive");
  if (a.session) body["session"] = a.session;
  if (a.from) {
    body["mode"] = "from_step";
    body["from"] = *a.from;
  } else if (!a.window.empty()) {
    auto [s, e] = parse_range(a.window);
    body["mode"] = "window";
    body["window"] = {s, e};
  } else if (a.call) {
    body["mode"] = "function";
    body["call"] = *a.call;
  } else if (a.snapshot) {
    body["mode"] = "from_snapshot";
    body["snapshot"] = *a.snapshot;
  } else {
    if (!a.session) throw UsageError("replay needs a session, --call or --snapshot");
    body["mode"] = "full";
  }
  body["migrate"] = a.migrate;
  json mocked = json::array();
  for (const auto& m : a.mock)
    for (const auto& n : split_names(m)) mocked.push_back(n);
  body["mocked"] = mocked;
  json manual = json::object();
  for (const auto& s : a.set) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects name=value, got '" + s + "'");
    manual[s.substr(0, eq)] = s.substr(eq + 1);
  }
  body["manual_globals"] = manual;
  if (!a.code.empty()) {
    // Every function in the file replaces the one of the same name.
    auto unit = lang::parse(read_file(a.code), a.code);
    json overrides = json::object();
    for (const auto& fn : unit.functions) overrides[fn->name] = fn->source_text;
    body["code_override"] = overrides;
  }
  if (a.seed) body["seed"] = *a.seed;
  if (!a.events.empty()) body["events"] = read_file(a.events);
  if (!a.label.empty()) body["label"] = a.label;

  auto request = service::parse_replay_request(body);
  if (!a.json) request.env.output = &std::cout;
  auto store = db.open();
  auto hooks = monitor::HookRegistry::with_builtins();
  auto r = replay::execute(*store, request, hooks);
  if (a.json) {
    std::cout << service::replay_result_json(r).dump(2) << "\n";
  } else {
    print_stats(std::cout, r.session, r.stats);
    for (const auto& [c, n] : r.mocked_served) std::cout << "mocked " << c << ": " << n << " served\n";
    for (const auto& [c, n] : r.fell_through) std::cout << "live " << c << ": " << n << " calls past the trace\n";
    for (const auto& w : r.warnings) std::cout << "warning: " << w << "\n";
  }
  return r.failed() ? 1 : 0;
}

// ---- read-side commands --------------------------------------------------------

int cmd_sessions(const Db& db, bool as_json) {
  auto store = db.open();
  json out = json::array();
  for (const auto& s : store->sessions()) {
    if (as_json) {
      out.push_back(service::session_json(*store, s));
      continue;
    }
    std::cout << s.id << "\t" << s.kind << "\t" << s.status << "\t" << store->call_count(s.id) << " calls\t" << s.label;
    if (s.parent_session) std::cout << "\t(from session " << *s.parent_session << ")";
    std::cout << "\n";
  }
  if (as_json) std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_calls(const Db& db, store::Id session, const std::string& function, bool as_json) {
  auto store = db.open();
  store::require_session(*store, session);
  std::optional<std::string> fn;
  if (!function.empty()) fn = function;
  json out = json::array();
  for (const auto& c : store->calls(session, fn)) {
    if (as_json) {
      out.push_back(service::call_json(c));
      continue;
    }
    std::cout << "call " << c.id << "\t#" << c.ordinal << "\t" << c.function << "\t" << c.granularity;
    if (c.granularity == "line") std::cout << "\t" << store->snapshots(c.id).size() << " snapshots";
    if (!c.error.empty()) std::cout << "\terror: " << c.error;
    std::cout << "\n";
  }
  if (as_json) std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_inspect(const Db& db, const std::string& state, bool as_json) {
  auto store = db.open();
  auto v = compare::view(*store, parse_state(state));
  if (as_json)
    std::cout << compare::to_json(v).dump(2) << "\n";
  else
    std::cout << compare::format_view(v);
  return 0;
}

int cmd_compare(const Db& db, const std::string& a, const std::string& b, bool as_json) {
  auto store = db.open();
  auto d = compare::compare_states(*store, parse_state(a), parse_state(b));
  if (as_json)
    std::cout << compare::to_json(d).dump(2) << "\n";
  else
    std::cout << compare::format_diff(d);
  return 0;
}

int cmd_align(const Db& db, store::Id a, store::Id b, const std::string& wa, const std::string& wb, bool as_json) {
  auto store = db.open();
  store::require_session(*store, a);
  store::require_session(*store, b);
  compare::Window x{a, {}, {}}, y{b, {}, {}};
  if (!wa.empty()) std::tie(x.start, x.end) = parse_range(wa);
  if (!wb.empty()) std::tie(y.start, y.end) = parse_range(wb);
  auto pairs = compare::align(*store, x, y);
  if (as_json) {
    std::cout << compare::to_json(pairs).dump(2) << "\n";
    return 0;
  }
  auto show = [](const std::optional<compare::StateRef>& r) {
    return r ? compare::to_string(r->kind) + ":" + std::to_string(r->id) : std::string("-");
  };
  for (const auto& p : pairs) {
    std::string mark = "  ";
    if (!p.gap() && !compare::compare_states(*store, *p.a, *p.b).empty()) mark = "* ";
    std::cout << mark << show(p.a) << "\t" << show(p.b) << "\n";
  }
  return 0;
}

int cmd_hashes(const Db& db, store::Id session) {
  auto store = db.open();
  store::require_session(*store, session);
  for (const auto& h : store::session_state_hashes(*store, session)) std::cout << h << "\n";
  return 0;
}

int cmd_export(const Db& db, const std::vector<store::Id>& sessions, const std::string& out_path) {
  auto store = db.open();
  std::optional<std::vector<store::Id>> sel;
  if (!sessions.empty()) {
    for (auto s : sessions) store::require_session(*store, s);
    sel = sessions;
  }
  if (out_path.empty() || out_path == "-") {
    store::export_stream(*store, std::cout, sel);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + out_path);
    store::export_stream(*store, out, sel);
  }
  return 0;
}

int cmd_import(const Db& db, const std::string& in_path) {
  if (std::filesystem::exists(db.path) && std::filesystem::file_size(db.path) > 0)
    throw UsageError("refusing to import into existing database " + db.path);
  std::unique_ptr<store::Store> imported;
  if (in_path == "-") {
    imported = store::import_stream(std::cin);
  } else {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + in_path);
    imported = store::import_stream(in);
  }
  auto dir = std::filesystem::path(db.path).parent_path();
  if (!dir.empty() && !std::filesystem::is_directory(dir))
    throw UsageError("database directory " + dir.string() + " does not exist");
  imported->persist_to(db.path);
  auto c = imported->counts();
  std::cout << "imported " << c.sessions << " sessions, " << c.calls << " calls into " << db.path << "\n";
  return 0;
}

int cmd_serve(const Db& db, const std::string& address, unsigned short port) {
  auto store = db.open();
  service::Api api(*store, monitor::HookRegistry::with_builtins());
  service::Server server(api, *store);
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);  // server threads inherit the mask
  auto bound = server.start(address, port);
  std::cout << "listening on http://" << address << ":" << bound << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Record, replay and compare Trk program executions"};
  app.require_subcommand(1);
  std::string db_path = std::getenv("SPACETIME_DB") ? std::getenv("SPACETIME_DB") : "spacetime.db";
  app.add_option("--db", db_path, "Trace database (default $SPACETIME_DB or spacetime.db)");

  RunArgs run;
  auto* c_run = app.add_subcommand("run", "Run a program and record its monitored functions");
  c_run->add_option("file", run.file, "Trk source file")->required()->check(CLI::ExistingFile);
  c_run->add_option("--label", run.label, "Session label");
  c_run->add_option("--seed", run.seed, "Seed for rand_int/rand_float");
  c_run->add_option("--events", run.events, "Event script (JSON lines)")->check(CLI::ExistingFile);
  c_run->add_option("--entry", run.entry, "Function to call instead of the top-level code");
  c_run->add_option("--arg", run.args, "Entry argument as a guest literal (repeatable)");
  c_run->add_option("--monitor", run.monitor, "Also monitor this function (repeatable)");
  c_run->add_option("--granularity", run.granularity, "[fn:]function|line");
  c_run->add_option("--track", run.track, "[fn:]callable,callable");
  c_run->add_option("--specs", run.specs, "Monitor specs as JSON, instead of pragmas")->check(CLI::ExistingFile);
  c_run->add_flag("--json", run.json, "Machine-readable summary");

  ReplayArgs rep;
  auto* c_replay = app.add_subcommand("replay", "Re-execute recorded calls");
  c_replay->add_option("session,--session", rep.session, "Recorded session");
  c_replay->add_option("--from", rep.from, "Replay from this call ordinal to the end");
  c_replay->add_option("--window", rep.window, "Replay call ordinals a:b");
  c_replay->add_option("--call", rep.call, "Replay one recorded call");
  c_replay->add_option("--snapshot", rep.snapshot, "Resume from a line snapshot");
  c_replay->add_option("--mock", rep.mock, "Serve these tracked callables from the trace (a,b)");
  c_replay->add_option("--migrate", rep.migrate, "all | only:a,b | except:a,b");
  c_replay->add_option("--set", rep.set, "name=value: set a global (guest literal)");
  c_replay->add_option("--code", rep.code, "File whose functions replace the recorded ones")->check(CLI::ExistingFile);
  c_replay->add_option("--seed", rep.seed, "Seed for live random callables");
  c_replay->add_option("--events", rep.events, "Event script for live callables")->check(CLI::ExistingFile);
  c_replay->add_option("--label", rep.label, "Session label");
  c_replay->add_flag("--json", rep.json, "Machine-readable summary");

  bool as_json = false;
  auto* c_sessions = app.add_subcommand("sessions", "List sessions");
  c_sessions->add_flag("--json", as_json);

  store::Id calls_session = 0;
  std::string calls_function;
  auto* c_calls = app.add_subcommand("calls", "List a session's calls");
  c_calls->add_option("session", calls_session)->required();
  c_calls->add_option("--function", calls_function);
  c_calls->add_flag("--json", as_json);

  std::string state_a, state_b;
  auto* c_inspect = app.add_subcommand("inspect", "Show one state (call:<id> or snapshot:<id>)");
  c_inspect->add_option("state", state_a)->required();
  c_inspect->add_flag("--json", as_json);

  auto* c_compare = app.add_subcommand("compare", "Diff two states");
  c_compare->add_option("a", state_a)->required();
  c_compare->add_option("b", state_b)->required();
  c_compare->add_flag("--json", as_json);

  store::Id align_a = 0, align_b = 0;
  std::string window_a, window_b;
  auto* c_align = app.add_subcommand("align", "Pair up the states of two sessions");
  c_align->add_option("a", align_a)->required();
  c_align->add_option("b", align_b)->required();
  c_align->add_option("--window-a", window_a, "Call ordinals a:b in the first session");
  c_align->add_option("--window-b", window_b, "Call ordinals a:b in the second session");
  c_align->add_flag("--json", as_json);

  store::Id hash_session = 0;
  auto* c_hashes = app.add_subcommand("hashes", "Per-call state hashes of a session");
  c_hashes->add_option("session", hash_session)->required();

  std::vector<store::Id> export_sessions;
  std::string export_out;
  auto* c_export = app.add_subcommand("export", "Write the interchange stream");
  c_export->add_option("--session", export_sessions, "Only these sessions (repeatable)");
  c_export->add_option("-o,--output", export_out, "Output file (default stdout)");

  std::string import_in;
  auto* c_import = app.add_subcommand("import", "Create a database from an interchange stream");
  c_import->add_option("file", import_in)->required();

  std::string address = "127.0.0.1";
  unsigned short port = 8470;
  auto* c_serve = app.add_subcommand("serve", "Serve the HTTP/WebSocket API");
  c_serve->add_option("--address", address);
  c_serve->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  Db db{db_path};
  try {
    if (*c_run) return cmd_run(db, run);
    if (*c_replay) return cmd_replay(db, rep);
    if (*c_sessions) return cmd_sessions(db, as_json);
    if (*c_calls) return cmd_calls(db, calls_session, calls_function, as_json);
    if (*c_inspect) return cmd_inspect(db, state_a, as_json);
    if (*c_compare) return cmd_compare(db, state_a, state_b, as_json);
    if (*c_align) return cmd_align(db, align_a, align_b, window_a, window_b, as_json);
    if (*c_hashes) return cmd_hashes(db, hash_session);
    if (*c_export) return cmd_export(db, export_sessions, export_out);
    if (*c_import) return cmd_import(db, import_in);
    if (*c_serve) return cmd_serve(db, address, port);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const store::NotFound& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const lang::SyntaxError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const lang::RuntimeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const monitor::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const replay::ReplayError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const compare::CompareError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
