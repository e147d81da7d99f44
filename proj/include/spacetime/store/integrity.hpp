#pragma once

#include <string>

#include "spacetime/store/store.hpp"

namespace spacetime::store {

// A row that is malformed or references something that does not exist.
class IntegrityError : public StoreError {
 public:
  IntegrityError(std::string table, Id id, const std::string& message)
      : StoreError(table + "[" + std::to_string(id) + "]: " + message), table_(std::move(table)), id_(id) {}

  const std::string& table() const { return table_; }
  Id id() const { return id_; }

 private:
  std::string table_;
  Id id_;
};

// Checks id ordering, every cross-table reference, and recomputes payload
// and code hashes.
void check_integrity(const Tables& t);

}  // namespace spacetime::store
