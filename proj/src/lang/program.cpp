#include "spacetime/lang/program.hpp"

#include <fstream>
#include <sstream>

#include "spacetime/lang/errors.hpp"
#include "spacetime/lang/parser.hpp"
#include "spacetime/common/sha256.hpp"

namespace spacetime::lang {

namespace {

class Lowerer {
 public:
  explicit Lowerer(FlatBody& out) : out_(out) {}

  void block(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) stmt(*s);
  }

 private:
  struct Loop {
    int continue_target;
    std::vector<int> breaks;
    bool is_for;
  };

  int emit(FlatOp op, const Stmt* s, int line) {
    FlatEntry e;
    e.op = op;
    e.stmt = s;
    e.line = line;
    out_.entries.push_back(e);
    int index = static_cast<int>(out_.entries.size()) - 1;
    if (op != FlatOp::Jump) {
      out_.line_index.emplace(line, index);
      if (for_depth_ > 0) out_.non_resumable.insert(line);
    }
    return index;
  }

  int here() const { return static_cast<int>(out_.entries.size()); }

  void collect_globals(const Stmt& s) {
    if (s.kind == StmtKind::Global) out_.declared_globals.insert(s.names.begin(), s.names.end());
  }

  void stmt(const Stmt& s) {
    collect_globals(s);
    switch (s.kind) {
      case StmtKind::If: {
        int branch = emit(FlatOp::Branch, &s, s.line);
        block(s.body);
        if (!s.orelse.empty()) {
          int jump = emit(FlatOp::Jump, nullptr, 0);
          out_.entries[branch].target = here();
          block(s.orelse);
          out_.entries[jump].target = here();
        } else {
          out_.entries[branch].target = here();
        }
        break;
      }
      case StmtKind::While: {
        int head = emit(FlatOp::LoopHead, &s, s.line);
        loops_.push_back({head, {}, false});
        block(s.body);
        int back = emit(FlatOp::Jump, nullptr, 0);
        out_.entries[back].target = head;
        finish_loop(head);
        break;
      }
      case StmtKind::For: {
        int slot = out_.loop_slots++;
        out_.non_resumable.insert(s.line);
        int init = emit(FlatOp::ForInit, &s, s.line);
        out_.entries[init].slot = slot;
        int next = emit(FlatOp::ForNext, &s, s.line);
        out_.entries[next].slot = slot;
        loops_.push_back({next, {}, true});
        ++for_depth_;
        block(s.body);
        --for_depth_;
        int back = emit(FlatOp::Jump, nullptr, 0);
        out_.entries[back].target = next;
        finish_loop(next);
        break;
      }
      case StmtKind::Break:
      case StmtKind::Continue: {
        int index = emit(FlatOp::Exec, &s, s.line);
        if (loops_.empty()) {
          // Reported at run time so the flat and tree executors agree.
          break;
        }
        if (s.kind == StmtKind::Continue) {
          out_.entries[index].target = loops_.back().continue_target;
        } else {
          loops_.back().breaks.push_back(index);
        }
        break;
      }
      default:
        emit(FlatOp::Exec, &s, s.line);
    }
  }

  void finish_loop(int head) {
    out_.entries[head].target = here();
    for (int b : loops_.back().breaks) out_.entries[b].target = here();
    loops_.pop_back();
  }

  FlatBody& out_;
  std::vector<Loop> loops_;
  int for_depth_ = 0;
};

}  // namespace

FlatBody lower_block(const std::vector<StmtPtr>& body) {
  FlatBody out;
  Lowerer(out).block(body);
  return out;
}

namespace {

void collect_bound(const std::vector<StmtPtr>& body, std::set<std::string>& out) {
  for (const auto& s : body) {
    if (s->kind == StmtKind::Assign && s->target->kind == ExprKind::Name) out.insert(s->target->name);
    if (s->kind == StmtKind::For) out.insert(s->loop_var);
    collect_bound(s->body, out);
    collect_bound(s->orelse, out);
  }
}

}  // namespace

FlatBody lower_function(const FunctionDef& fn) {
  FlatBody out = lower_block(fn.body);
  out.locals.insert(fn.params.begin(), fn.params.end());
  collect_bound(fn.body, out.locals);
  for (const auto& g : out.declared_globals) out.locals.erase(g);
  return out;
}

const FunctionDef* Program::find(std::string_view name) const {
  auto it = functions_.find(name);
  return it == functions_.end() ? nullptr : it->second.get();
}

const FunctionDef& Program::function(std::string_view name) const {
  const FunctionDef* fn = find(name);
  if (!fn) throw RuntimeError("unknown function '" + std::string(name) + "'");
  return *fn;
}

const FlatBody& Program::flat(std::string_view name) const {
  auto it = flat_.find(name);
  if (it == flat_.end()) throw RuntimeError("unknown function '" + std::string(name) + "'");
  return *it->second;
}

std::vector<std::string> Program::function_names() const {
  std::vector<std::string> out;
  for (const auto& [name, fn] : functions_) out.push_back(name);
  return out;
}

void Program::rehash() {
  std::string material;
  for (const auto& [name, fn] : functions_) material += "fn:" + name + "\n" + fn->source_text + "\x1f";
  material += "top:\n" + top_text_;
  hash_ = sha256_hex(material);
}

Program Program::with_override(std::shared_ptr<FunctionDef> fn) const {
  Program copy = *this;
  std::string name = fn->name;
  copy.flat_[name] = std::make_shared<const FlatBody>(lower_function(*fn));
  copy.functions_[name] = std::move(fn);
  copy.rehash();
  return copy;
}

Program lower(std::vector<std::shared_ptr<SourceUnit>> units) {
  Program p;
  auto top = std::make_shared<FlatBody>();
  for (const auto& unit : units) {
    for (const auto& fn : unit->functions) {
      if (p.functions_.count(fn->name))
        throw SyntaxError(unit->path, fn->def_line, 1, "duplicate function name '" + fn->name + "'");
      p.functions_[fn->name] = fn;
      p.flat_[fn->name] = std::make_shared<const FlatBody>(lower_function(*fn));
    }
  }
  if (units.size() == 1) {
    *top = lower_block(units.front()->top_level);
  } else {
    // Multi-unit programs execute top-level code unit by unit; lowering the
    // concatenation keeps a single entry list.
    for (const auto& unit : units) {
      FlatBody part = lower_block(unit->top_level);
      int offset = static_cast<int>(top->entries.size());
      for (auto e : part.entries) {
        if (e.target >= 0) e.target += offset;
        if (e.slot >= 0) e.slot += top->loop_slots;
        top->entries.push_back(e);
      }
      for (auto [line, index] : part.line_index) top->line_index.emplace(line, index + offset);
      top->loop_slots += part.loop_slots;
    }
  }
  for (const auto& unit : units) {
    std::set<int> excluded;
    for (const auto& fn : unit->functions) {
      for (int l = fn->def_line; l <= fn->end_line; ++l) excluded.insert(l);
      if (fn->pragma) excluded.insert(fn->pragma->line);
    }
    std::istringstream lines(unit->source);
    std::string text;
    for (int number = 1; std::getline(lines, text); ++number)
      if (!excluded.count(number)) p.top_text_ += text + "\n";
  }
  p.top_level_flat_ = top;
  p.units_ = std::move(units);
  p.rehash();
  return p;
}

Program lower(SourceUnit unit) {
  std::vector<std::shared_ptr<SourceUnit>> units;
  units.push_back(std::make_shared<SourceUnit>(std::move(unit)));
  return lower(std::move(units));
}

Program load_program(std::string_view source, std::string path) { return lower(parse(source, std::move(path))); }

Program load_program_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open program file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_program(ss.str(), path);
}

}  // namespace spacetime::lang
