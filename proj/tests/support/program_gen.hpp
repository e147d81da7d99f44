#pragma once

// Random, always-terminating Trk programs for property tests. Every program
// defines globals g0..g2, a helper h0 that reads g1, and a function f(a, b)
// that may read or write globals, loop, branch, build lists and call
// rand_int. Arithmetic is reduced modulo small primes so nothing overflows.

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace gen {

struct Options {
  bool use_rand = false;     // emit rand_int calls
  bool write_globals = true;  // `global g0` plus writes
  int statements = 8;
};

class ProgramGen {
 public:
  explicit ProgramGen(std::uint32_t seed, Options o = {}) : rng_(seed), o_(o) {}

  // Full program; top level calls f a few times and prints the result.
  std::string program() {
    std::ostringstream out;
    out << "g0 = " << pick(0, 9) << "\n";
    out << "g1 = " << pick(0, 9) << "\n";
    out << "g2 = [1, 2, 3]\n\n";
    out << "def h0(p):\n    return (p + g1) % 101\n\n";
    out << function("f");
    out << "\nr = 0\nk = 0\nwhile k < 3:\n    r = (r + f(k, " << pick(1, 9) << ")) % 1009\n    k = k + 1\nprint(r)\n";
    return out.str();
  }

  std::string function(const std::string& name) {
    std::ostringstream out;
    out << "def " << name << "(a, b):\n";
    writes_global_ = o_.write_globals && pick(0, 1) == 1;
    if (writes_global_) out << "    global g0\n";
    std::vector<std::string> vars = {"a", "b"};
    loop_ = 0;
    block(out, 1, vars, o_.statements);
    out << "    return " << expr(vars, 2) << "\n";
    return out.str();
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::string atom(const std::vector<std::string>& vars) {
    switch (pick(0, 5)) {
      case 0: return std::to_string(pick(0, 20));
      case 1: return "g0";
      case 2: return "h0(" + vars[pick(0, (int)vars.size() - 1)] + ")";
      case 3: return "len(g2)";
      case 4:
        if (o_.use_rand) return "rand_int(0, 9)";
        [[fallthrough]];
      default: return vars[pick(0, (int)vars.size() - 1)];
    }
  }

  std::string expr(const std::vector<std::string>& vars, int depth) {
    if (depth == 0 || pick(0, 2) == 0) return atom(vars);
    static const char* ops[] = {"+", "-", "*"};
    return "(" + expr(vars, depth - 1) + " " + ops[pick(0, 2)] + " " + expr(vars, depth - 1) + ") % 97";
  }

  std::string cond(const std::vector<std::string>& vars) {
    static const char* cmp[] = {"<", "<=", "==", "!=", ">", ">="};
    return expr(vars, 1) + " " + cmp[pick(0, 5)] + " " + expr(vars, 1);
  }

  void block(std::ostringstream& out, int indent, std::vector<std::string> vars, int n) {
    std::string pad(indent * 4, ' ');
    for (int i = 0; i < n; ++i) {
      int kind = indent > 3 ? 0 : pick(0, 6);
      switch (kind) {
        case 0:
        case 1: {
          std::string v = "v" + std::to_string(pick(0, 4));
          out << pad << v << " = " << expr(vars, 2) << "\n";
          if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
          break;
        }
        case 2:
          out << pad << "if " << cond(vars) << ":\n";
          block(out, indent + 1, vars, pick(1, 3));
          if (pick(0, 1)) {
            out << pad << "else:\n";
            block(out, indent + 1, vars, pick(1, 2));
          }
          break;
        case 3: {
          std::string c = "i" + std::to_string(loop_++);
          out << pad << c << " = 0\n" << pad << "while " << c << " < " << pick(1, 4) << ":\n";
          auto inner = vars;
          inner.push_back(c);
          block(out, indent + 1, inner, pick(1, 3));
          out << pad << "    " << c << " = " << c << " + 1\n";
          vars.push_back(c);
          break;
        }
        case 4: {
          std::string c = "e" + std::to_string(loop_++);
          out << pad << "for " << c << " in range(" << pick(0, 3) << "):\n";
          auto inner = vars;
          inner.push_back(c);
          block(out, indent + 1, inner, pick(1, 2));
          break;
        }
        case 5:
          if (writes_global_) {
            out << pad << "g0 = " << expr(vars, 1) << " % 50\n";
            break;
          }
          [[fallthrough]];
        default:
          out << pad << "t = [" << expr(vars, 1) << ", " << expr(vars, 1) << "]\n";
          out << pad << "append(t, " << atom(vars) << ")\n";
          break;
      }
    }
  }

  std::mt19937 rng_;
  Options o_;
  bool writes_global_ = false;
  int loop_ = 0;
};

}  // namespace gen
