#include "sqlite_file.hpp"

#include <sqlite3.h>

#include <filesystem>

#include "spacetime/store/records.hpp"

namespace spacetime::store {

namespace {

const char* const kSchema = R"sql(
CREATE TABLE meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE sessions (id INTEGER PRIMARY KEY, label TEXT NOT NULL, started_at INTEGER NOT NULL,
  program_hash TEXT NOT NULL, parent_session INTEGER, parent_offset INTEGER, kind TEXT NOT NULL,
  status TEXT NOT NULL, failed_at INTEGER, error TEXT NOT NULL, program_code INTEGER,
  monitor_config TEXT NOT NULL);
CREATE TABLE calls (id INTEGER PRIMARY KEY, session INTEGER NOT NULL, ordinal INTEGER NOT NULL,
  function_name TEXT NOT NULL, code INTEGER NOT NULL, parent_call INTEGER, granularity TEXT NOT NULL,
  locals TEXT NOT NULL, globals TEXT NOT NULL, return_value INTEGER, hook_meta INTEGER, error TEXT NOT NULL);
CREATE INDEX calls_by_function ON calls (function_name, session, ordinal);
CREATE TABLE snapshots (id INTEGER PRIMARY KEY, call INTEGER NOT NULL, ordinal INTEGER NOT NULL,
  line_no INTEGER NOT NULL, locals TEXT NOT NULL, globals TEXT NOT NULL);
CREATE TABLE events (id INTEGER PRIMARY KEY, call INTEGER NOT NULL, snapshot INTEGER, callable TEXT NOT NULL,
  seq INTEGER NOT NULL, args TEXT NOT NULL, return_value INTEGER NOT NULL);
CREATE TABLE objects (id INTEGER PRIMARY KEY, session INTEGER NOT NULL, runtime_id INTEGER NOT NULL,
  first_seen INTEGER);
CREATE TABLE object_versions (id INTEGER PRIMARY KEY, object INTEGER, content_hash TEXT NOT NULL,
  kind TEXT NOT NULL, elements TEXT NOT NULL);
CREATE TABLE payloads (hash TEXT PRIMARY KEY, kind TEXT NOT NULL, data BLOB NOT NULL);
CREATE TABLE code_versions (id INTEGER PRIMARY KEY, function_name TEXT NOT NULL, source_text TEXT NOT NULL,
  text_hash TEXT NOT NULL, line_map TEXT NOT NULL);
CREATE TABLE hook_blobs (id INTEGER PRIMARY KEY, kind TEXT NOT NULL, content_hash TEXT NOT NULL);
)sql";

const char* const kTables[] = {"meta",    "sessions",        "calls",    "snapshots",     "events",
                               "objects", "object_versions", "payloads", "code_versions", "hook_blobs"};

class Stmt {
 public:
  Stmt(sqlite3* db, const char* sql, const std::string& path) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK)
      throw StoreError("corrupt store " + path + ": " + sqlite3_errmsg(db));
  }
  ~Stmt() { sqlite3_finalize(stmt_); }

  bool step() {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw StoreError(std::string("store write failed: ") + sqlite3_errmsg(db_));
  }
  void reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }

  void bind(int i, std::int64_t v) { sqlite3_bind_int64(stmt_, i, v); }
  void bind(int i, const std::string& v) { sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT); }
  void bind_blob(int i, const std::string& v) {
    sqlite3_bind_blob(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
  }
  template <typename T>
  void bind(int i, const std::optional<T>& v) {
    if (v) bind(i, static_cast<std::int64_t>(*v));
    else sqlite3_bind_null(stmt_, i);
  }

  std::int64_t i64(int c) const { return sqlite3_column_int64(stmt_, c); }
  std::optional<std::int64_t> opt(int c) const {
    if (sqlite3_column_type(stmt_, c) == SQLITE_NULL) return std::nullopt;
    return i64(c);
  }
  std::string text(int c) const {
    const void* p = sqlite3_column_blob(stmt_, c);
    int n = sqlite3_column_bytes(stmt_, c);
    return p ? std::string(static_cast<const char*>(p), static_cast<std::size_t>(n)) : std::string();
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

json parse_column(const std::string& text, const char* table, std::int64_t id) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    throw StoreError(std::string("corrupt store: malformed column in ") + table + "[" + std::to_string(id) + "]");
  }
}

}  // namespace

SqliteFile::SqliteFile(const std::string& path, bool create) : path_(path) {
  bool exists = std::filesystem::exists(path);
  if (!exists && !create) throw StoreError("store not found: " + path);
  if (!exists) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent))
      throw StoreError("cannot create store " + path + ": directory does not exist");
  }
  int flags = SQLITE_OPEN_READWRITE | (create ? SQLITE_OPEN_CREATE : 0);
  if (sqlite3_open_v2(path.c_str(), &db_, flags, nullptr) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw StoreError("cannot open store " + path + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  try {
    bool fresh = false;
    {
      Stmt count(db_, "SELECT count(*) FROM sqlite_master", path_);
      count.step();
      fresh = count.i64(0) == 0;
    }
    if (fresh) {
      exec("BEGIN");
      exec(kSchema);
      exec(("INSERT INTO meta VALUES ('format_version', '" + std::to_string(kFormatVersion) + "')").c_str());
      exec("COMMIT");
    }
    verify_schema();
  } catch (...) {
    sqlite3_close(db_);
    db_ = nullptr;
    throw;
  }
}

SqliteFile::~SqliteFile() {
  if (db_) sqlite3_close(db_);
}

void SqliteFile::exec(const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw StoreError("store " + path_ + ": " + msg);
  }
}

void SqliteFile::verify_schema() {
  for (const char* table : kTables) {
    Stmt q(db_, "SELECT count(*) FROM sqlite_master WHERE type = 'table' AND name = ?", path_);
    q.bind(1, std::string(table));
    q.step();
    if (q.i64(0) == 0) throw StoreError("corrupt store " + path_ + ": missing table '" + table + "'");
  }
  Stmt v(db_, "SELECT value FROM meta WHERE key = 'format_version'", path_);
  if (!v.step()) throw StoreError("corrupt store " + path_ + ": missing format_version in table 'meta'");
  if (v.text(0) != std::to_string(kFormatVersion))
    throw StoreError("store " + path_ + " has format version " + v.text(0) + ", expected " +
                     std::to_string(kFormatVersion));
}

bool SqliteFile::empty() {
  Stmt q(db_, "SELECT (SELECT count(*) FROM sessions) + (SELECT count(*) FROM payloads)", path_);
  q.step();
  return q.i64(0) == 0;
}

Tables SqliteFile::load() {
  Tables t;
  {
    Stmt q(db_, "SELECT id, label, started_at, program_hash, parent_session, parent_offset, kind, status, failed_at, error, "
                "program_code, monitor_config "
                "FROM sessions ORDER BY id", path_);
    while (q.step()) {
      Session s;
      s.id = q.i64(0);
      s.label = q.text(1);
      s.started_at = q.i64(2);
      s.program_hash = q.text(3);
      s.parent_session = q.opt(4);
      s.parent_offset = q.opt(5);
      s.kind = q.text(6);
      s.status = q.text(7);
      s.failed_at = q.opt(8);
      s.error = q.text(9);
      s.program_code = q.opt(10);
      s.monitor_config = q.text(11);
      t.sessions.push_back(std::move(s));
    }
  }
  {
    Stmt q(db_, "SELECT id, session, ordinal, function_name, code, parent_call, granularity, locals, globals, "
                "return_value, hook_meta, error FROM calls ORDER BY id", path_);
    while (q.step()) {
      CallRecord c;
      c.id = q.i64(0);
      c.session = q.i64(1);
      c.ordinal = q.i64(2);
      c.function = q.text(3);
      c.code = q.i64(4);
      c.parent_call = q.opt(5);
      c.granularity = q.text(6);
      c.locals = varmap_from_json(parse_column(q.text(7), "calls", c.id));
      c.globals = varmap_from_json(parse_column(q.text(8), "calls", c.id));
      c.return_value = q.opt(9);
      c.hook_meta = q.opt(10);
      c.error = q.text(11);
      t.calls.push_back(std::move(c));
    }
  }
  {
    Stmt q(db_, "SELECT id, call, ordinal, line_no, locals, globals FROM snapshots ORDER BY id", path_);
    while (q.step()) {
      SnapshotRecord s;
      s.id = q.i64(0);
      s.call = q.i64(1);
      s.ordinal = q.i64(2);
      s.line = static_cast<int>(q.i64(3));
      s.locals = varmap_from_json(parse_column(q.text(4), "snapshots", s.id));
      s.globals = varmap_from_json(parse_column(q.text(5), "snapshots", s.id));
      t.snapshots.push_back(std::move(s));
    }
  }
  {
    Stmt q(db_, "SELECT id, call, snapshot, callable, seq, args, return_value FROM events ORDER BY id", path_);
    while (q.step()) {
      EventRecord e;
      e.id = q.i64(0);
      e.call = q.i64(1);
      e.snapshot = q.opt(2);
      e.callable = q.text(3);
      e.seq = q.i64(4);
      e.args = parse_column(q.text(5), "events", e.id).get<std::vector<Id>>();
      e.return_value = q.i64(6);
      t.events.push_back(std::move(e));
    }
  }
  {
    Stmt q(db_, "SELECT id, session, runtime_id, first_seen FROM objects ORDER BY id", path_);
    while (q.step()) {
      StoredObject o;
      o.id = q.i64(0);
      o.session = q.i64(1);
      o.runtime_id = static_cast<std::uint64_t>(q.i64(2));
      o.first_seen = q.opt(3);
      t.objects.push_back(o);
    }
  }
  {
    Stmt q(db_, "SELECT id, object, content_hash, kind, elements FROM object_versions ORDER BY id", path_);
    while (q.step()) {
      ObjectVersion v;
      v.id = q.i64(0);
      v.object = q.opt(1);
      v.content_hash = q.text(2);
      v.kind = q.text(3);
      v.elements = parse_column(q.text(4), "object_versions", v.id).get<std::vector<Id>>();
      t.versions.push_back(std::move(v));
    }
  }
  {
    Stmt q(db_, "SELECT hash, kind, data FROM payloads ORDER BY rowid", path_);
    while (q.step()) t.payloads.push_back(Payload{q.text(0), q.text(1), q.text(2)});
  }
  {
    Stmt q(db_, "SELECT id, function_name, source_text, text_hash, line_map FROM code_versions ORDER BY id", path_);
    while (q.step()) {
      CodeVersion c;
      c.id = q.i64(0);
      c.function = q.text(1);
      c.source_text = q.text(2);
      c.text_hash = q.text(3);
      c.line_map = parse_column(q.text(4), "code_versions", c.id).get<std::vector<int>>();
      t.code_versions.push_back(std::move(c));
    }
  }
  {
    Stmt q(db_, "SELECT id, kind, content_hash FROM hook_blobs ORDER BY id", path_);
    while (q.step()) t.hook_blobs.push_back(HookBlob{q.i64(0), q.text(1), q.text(2)});
  }
  return t;
}

void SqliteFile::append(const Tables& rows) {
  exec("BEGIN IMMEDIATE");
  try {
    {
      Stmt q(db_, "INSERT OR REPLACE INTO sessions VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)", path_);
      for (const auto& s : rows.sessions) {
        q.bind(1, s.id);
        q.bind(2, s.label);
        q.bind(3, s.started_at);
        q.bind(4, s.program_hash);
        q.bind(5, s.parent_session);
        q.bind(6, s.parent_offset);
        q.bind(7, s.kind);
        q.bind(8, s.status);
        q.bind(9, s.failed_at);
        q.bind(10, s.error);
        q.bind(11, s.program_code);
        q.bind(12, s.monitor_config);
        q.step();
        q.reset();
      }
    }
    {
      Stmt q(db_, "INSERT INTO calls VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)", path_);
      for (const auto& c : rows.calls) {
        q.bind(1, c.id);
        q.bind(2, c.session);
        q.bind(3, c.ordinal);
        q.bind(4, c.function);
        q.bind(5, c.code);
        q.bind(6, c.parent_call);
        q.bind(7, c.granularity);
        q.bind(8, varmap_to_json(c.locals).dump());
        q.bind(9, varmap_to_json(c.globals).dump());
        q.bind(10, c.return_value);
        q.bind(11, c.hook_meta);
        q.bind(12, c.error);
        q.step();
        q.reset();
      }
    }
    {
      Stmt q(db_, "INSERT INTO snapshots VALUES (?, ?, ?, ?, ?, ?)", path_);
      for (const auto& s : rows.snapshots) {
        q.bind(1, s.id);
        q.bind(2, s.call);
        q.bind(3, s.ordinal);
        q.bind(4, static_cast<std::int64_t>(s.line));
        q.bind(5, varmap_to_json(s.locals).dump());
        q.bind(6, varmap_to_json(s.globals).dump());
        q.step();
        q.reset();
      }
    }
    {
      Stmt q(db_, "INSERT INTO events VALUES (?, ?, ?, ?, ?, ?, ?)", path_);
      for (const auto& e : rows.events) {
        q.bind(1, e.id);
        q.bind(2, e.call);
        q.bind(3, e.snapshot);
        q.bind(4, e.callable);
        q.bind(5, e.seq);
        q.bind(6, json(e.args).dump());
        q.bind(7, e.return_value);
        q.step();
        q.reset();
      }
    }
    {
      Stmt q(db_, "INSERT INTO objects VALUES (?, ?, ?, ?)", path_);
      for (const auto& o : rows.objects) {
        q.bind(1, o.id);
        q.bind(2, o.session);
        q.bind(3, static_cast<std::int64_t>(o.runtime_id));
        q.bind(4, o.first_seen);
        q.step();
        q.reset();
      }
    }
    {
      Stmt q(db_, "INSERT INTO object_versions VALUES (?, ?, ?, ?, ?)", path_);
      for (const auto& v : rows.versions) {
        q.bind(1, v.id);
        q.bind(2, v.object);
        q.bind(3, v.content_hash);
        q.bind(4, v.kind);
        q.bind(5, json(v.elements).dump());
        q.step();
        q.reset();
      }
    }
    {
      Stmt q(db_, "INSERT OR IGNORE INTO payloads VALUES (?, ?, ?)", path_);
      for (const auto& p : rows.payloads) {
        q.bind(1, p.hash);
        q.bind(2, p.kind);
        q.bind_blob(3, p.data);
        q.step();
        q.reset();
      }
    }
    {
      Stmt q(db_, "INSERT INTO code_versions VALUES (?, ?, ?, ?, ?)", path_);
      for (const auto& c : rows.code_versions) {
        q.bind(1, c.id);
        q.bind(2, c.function);
        q.bind(3, c.source_text);
        q.bind(4, c.text_hash);
        q.bind(5, json(c.line_map).dump());
        q.step();
        q.reset();
      }
    }
    {
      Stmt q(db_, "INSERT INTO hook_blobs VALUES (?, ?, ?)", path_);
      for (const auto& b : rows.hook_blobs) {
        q.bind(1, b.id);
        q.bind(2, b.kind);
        q.bind(3, b.content_hash);
        q.step();
        q.reset();
      }
    }
    exec("COMMIT");
  } catch (...) {
    sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }
}

}  // namespace spacetime::store
