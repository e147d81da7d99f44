#pragma once

// A lowered, executable program: parsed units plus a flat (jump-based) body
// per function. The flat form is what lets execution resume at an arbitrary
// statement line.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "spacetime/lang/ast.hpp"

namespace spacetime::lang {

enum class FlatOp {
  Exec,      // simple statement; break/continue carry a jump target
  Branch,    // if/elif condition; target = false branch
  LoopHead,  // while condition; target = loop exit
  ForInit,   // evaluate iterable into the loop slot (silent)
  ForNext,   // advance loop slot; target = loop exit
  Jump,      // synthetic, never reported as a line
};

struct FlatEntry {
  int line = 0;
  FlatOp op = FlatOp::Exec;
  const Stmt* stmt = nullptr;
  int target = -1;
  int slot = -1;  // for-loop iteration slot
};

struct FlatBody {
  std::vector<FlatEntry> entries;
  // Statement line -> first entry index for that line.
  std::map<int, int> line_index;
  // Lines where execution cannot resume: for headers and anything nested in
  // a for body (the iterator state is not part of the captured locals).
  std::set<int> non_resumable;
  std::set<std::string> declared_globals;
  // Parameters plus every name bound in the body (assignment or loop
  // variable) that is not declared global. Reads of these never fall back
  // to globals.
  std::set<std::string> locals;
  int loop_slots = 0;

  bool is_statement_line(int line) const { return line_index.count(line) != 0; }
  bool is_resumable(int line) const { return is_statement_line(line) && !non_resumable.count(line); }
};

FlatBody lower_function(const FunctionDef& fn);
FlatBody lower_block(const std::vector<StmtPtr>& body);

class Program {
 public:
  Program() = default;

  const FunctionDef* find(std::string_view name) const;
  const FunctionDef& function(std::string_view name) const;  // throws RuntimeError
  const FlatBody& flat(std::string_view name) const;
  const FlatBody& top_level_flat() const { return *top_level_flat_; }
  const std::vector<std::shared_ptr<SourceUnit>>& units() const { return units_; }
  std::vector<std::string> function_names() const;

  // Hex digest over every function's source text plus top-level source.
  const std::string& hash() const { return hash_; }

  // Returns a copy where `fn` replaces the function of the same name.
  Program with_override(std::shared_ptr<FunctionDef> fn) const;

  friend Program lower(std::vector<std::shared_ptr<SourceUnit>> units);

 private:
  void rehash();

  std::vector<std::shared_ptr<SourceUnit>> units_;
  std::map<std::string, std::shared_ptr<FunctionDef>, std::less<>> functions_;
  std::map<std::string, std::shared_ptr<const FlatBody>, std::less<>> flat_;
  std::shared_ptr<const FlatBody> top_level_flat_ = std::make_shared<FlatBody>();
  std::string top_text_;
  std::string hash_;
};

Program lower(std::vector<std::shared_ptr<SourceUnit>> units);
Program lower(SourceUnit unit);

// Convenience: parse + lower a single source text.
Program load_program(std::string_view source, std::string path = "<input>");
Program load_program_file(const std::string& path);

}  // namespace spacetime::lang
