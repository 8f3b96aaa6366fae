#include "cbma/error.hpp"

#include <atomic>
#include <iostream>

namespace cbma {

namespace {

void default_sink(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::atomic<WarningSink> g_sink{&default_sink};

std::string with_line(const std::string& message, std::size_t line) {
  if (line == 0) return message;
  return "line " + std::to_string(line) + ": " + message;
}

}  // namespace

ParseError::ParseError(const std::string& message, std::size_t line)
    : Error(with_line(message, line)), line_(line) {}

void warn(const std::string& message) { g_sink.load()(message); }

WarningSink set_warning_sink(WarningSink sink) {
  return g_sink.exchange(sink ? sink : &default_sink);
}

}  // namespace cbma
