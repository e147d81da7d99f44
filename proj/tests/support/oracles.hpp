#pragma once

// Independent reference implementations the tests check recorded traces
// against. None of these touch the interpreter.

#include <cstdint>
#include <string>
#include <vector>

#include "spacetime/lang/interpreter.hpp"

namespace oracle {

// One executed line of demos/binary_search.trk (relative to its def line),
// with the locals as they are just before that line runs.
struct BinarySearchStep {
  int line = 0;
  std::optional<std::int64_t> left, right, mid;
};

struct BinarySearchTrace {
  std::vector<BinarySearchStep> steps;
  std::int64_t result = 0;
};

// Mirrors the demo source line by line:
//   2 left = 0 / 3 right = len-1 / 4 while / 5 mid / 6 if == / 7 return mid
//   8 if < / 9 left = / 11 right = / 12 return -1
inline BinarySearchTrace binary_search(const std::vector<std::int64_t>& items, std::int64_t target) {
  BinarySearchTrace t;
  std::optional<std::int64_t> left, right, mid;
  auto step = [&](int line) { t.steps.push_back({line, left, right, mid}); };
  step(2);
  left = 0;
  step(3);
  right = static_cast<std::int64_t>(items.size()) - 1;
  for (;;) {
    step(4);
    if (!(*left <= *right)) break;
    step(5);
    mid = (*left + *right) / 2;
    step(6);
    if (items[*mid] == target) {
      step(7);
      t.result = *mid;
      return t;
    }
    step(8);
    if (items[*mid] < target) {
      step(9);
      left = *mid + 1;
    } else {
      step(11);
      right = *mid - 1;
    }
  }
  step(12);
  t.result = -1;
  return t;
}

// Counts executed statement lines by walking the tree-mode interpreter with
// a sink that only counts, for comparison with what the recorder stores.
struct LineCounter : spacetime::lang::InstrumentationSink {
  std::string function;
  std::vector<int> lines;  // absolute
  std::size_t calls = 0;

  explicit LineCounter(std::string fn) : function(std::move(fn)) {}
  spacetime::lang::Observe observe(const spacetime::lang::FunctionDef& fn) override {
    return fn.name == function ? spacetime::lang::Observe::Line : spacetime::lang::Observe::None;
  }
  void on_call(const spacetime::lang::Frame&) override { ++calls; }
  void on_line(const spacetime::lang::Frame&, int line) override { lines.push_back(line); }
  void on_return(const spacetime::lang::Frame&, const spacetime::lang::Value&) override {}
};

}  // namespace oracle
