#include "gscan/core.hpp"

#include <iostream>
#include <mutex>

namespace gscan {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kMissingCell: return "MissingCell";
    case ErrorCode::kNonPositiveExpected: return "NonPositiveExpected";
    case ErrorCode::kDuplicateCell: return "DuplicateCell";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kUnknownArea: return "UnknownArea";
    case ErrorCode::kWindowCoversAll: return "WindowCoversAll";
    case ErrorCode::kInfeasibleConstraints: return "InfeasibleConstraints";
    case ErrorCode::kNumericalOverflow: return "NumericalOverflow";
    case ErrorCode::kNoConvergence: return "NoConvergence";
  }
  return "Unknown";
}

namespace {
std::mutex g_warn_mutex;
std::function<void(const std::string&)> g_warn_sink;
}  // namespace

void set_warning_sink(std::function<void(const std::string&)> sink) {
  std::lock_guard lock(g_warn_mutex);
  g_warn_sink = std::move(sink);
}

void warn(const std::string& message) {
  std::lock_guard lock(g_warn_mutex);
  if (g_warn_sink) {
    g_warn_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

std::string_view to_string(Direction d) {
  return d == Direction::kHigh ? "high" : "low";
}

Direction direction_from_string(std::string_view s) {
  if (s == "high" || s == "High" || s == "H") return Direction::kHigh;
  if (s == "low" || s == "Low" || s == "L") return Direction::kLow;
  fail(ErrorCode::kInvalidInput, "unknown direction '" + std::string(s) + "'");
}

}  // namespace gscan
