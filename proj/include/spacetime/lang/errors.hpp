#pragma once

#include <stdexcept>
#include <string>

namespace spacetime::lang {

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(std::string path, int line, int column, const std::string& message)
      : std::runtime_error(path + ":" + std::to_string(line) + ":" + std::to_string(column) +
                           ": syntax error: " + message),
        path_(std::move(path)),
        line_(line),
        column_(column),
        detail_(message) {}

  const std::string& path() const { return path_; }
  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string path_;
  int line_;
  int column_;
  std::string detail_;
};

// Guest-level failure: undefined name, type error, bad index, overflow, and
// misuse of the embedding API (unknown function, arity, bad entry line).
class RuntimeError : public std::runtime_error {
 public:
  RuntimeError(const std::string& message, int line = 0, std::string function = {})
      : std::runtime_error(format(message, line, function)),
        detail_(message),
        line_(line),
        function_(std::move(function)) {}

  const std::string& detail() const { return detail_; }
  int line() const { return line_; }
  const std::string& function() const { return function_; }

 private:
  static std::string format(const std::string& message, int line, const std::string& function) {
    std::string out = "runtime error";
    if (!function.empty()) out += " in " + function;
    if (line > 0) out += " at line " + std::to_string(line);
    return out + ": " + message;
  }

  std::string detail_;
  int line_;
  std::string function_;
};

}  // namespace spacetime::lang
