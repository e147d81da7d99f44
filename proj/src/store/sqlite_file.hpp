#pragma once

#include <string>

#include "spacetime/store/store.hpp"

struct sqlite3;

namespace spacetime::store {

// One SQLite database file holding the trace tables.
class SqliteFile {
 public:
  // Opens `path`; with `create`, a missing file gets a fresh schema.
  // Throws StoreError on a corrupt file, a missing table or a format
  // version mismatch.
  SqliteFile(const std::string& path, bool create);
  ~SqliteFile();
  SqliteFile(const SqliteFile&) = delete;
  SqliteFile& operator=(const SqliteFile&) = delete;

  Tables load();
  // Inserts every row of `rows` in one transaction; sessions are upserted.
  void append(const Tables& rows);
  bool empty();

 private:
  void exec(const char* sql);
  void verify_schema();

  std::string path_;
  sqlite3* db_ = nullptr;
};

}  // namespace spacetime::store
