#pragma once

// Shared vocabulary types: error reporting, lattice cells, scan direction and
// deterministic seed derivation.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gscan {

enum class ErrorCode {
  kInvalidInput,
  kIo,
  kMissingCell,
  kNonPositiveExpected,
  kDuplicateCell,
  kDegenerateInput,
  kUnknownArea,
  kWindowCoversAll,
  kInfeasibleConstraints,
  kNumericalOverflow,
  kNoConvergence,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Numerical failures map to a different process exit status than bad input.
  bool is_numerical() const noexcept {
    return code_ == ErrorCode::kNumericalOverflow ||
           code_ == ErrorCode::kNoConvergence ||
           code_ == ErrorCode::kInfeasibleConstraints;
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

// Non-fatal diagnostics (disconnected graphs, collapsed columns, ...). The
// default sink writes to stderr.
void set_warning_sink(std::function<void(const std::string&)> sink);
void warn(const std::string& message);

// One spatial unit at one time period. Both indices are 0-based.
struct StCell {
  std::size_t area = 0;
  std::size_t period = 0;

  friend bool operator==(const StCell&, const StCell&) = default;
  // Canonical order: period-major, matching the cell linearization.
  friend std::strong_ordering operator<=>(const StCell& a, const StCell& b) {
    if (auto c = a.period <=> b.period; c != 0) return c;
    return a.area <=> b.area;
  }
};

enum class Direction { kHigh, kLow };

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

// splitmix64 finalizer; used to derive independent RNG streams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for stream `index` under a master seed. Streams are independent of
// the order and the thread on which they are consumed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// Tags so that different consumers of one master seed never share a stream.
namespace stream {
inline constexpr std::uint64_t kNull = 0x6e756c6cULL;
inline constexpr std::uint64_t kCylinderNull = 0x63796c6eULL;
inline constexpr std::uint64_t kBatch = 0x62617463ULL;
inline constexpr std::uint64_t kPosterior = 0x706f7374ULL;
inline constexpr std::uint64_t kExpected = 0x65787063ULL;
inline constexpr std::uint64_t kGeometry = 0x67656f6dULL;
inline constexpr std::uint64_t kSpatial = 0x78693030ULL;
inline constexpr std::uint64_t kTemporal = 0x67616d6dULL;
inline constexpr std::uint64_t kInteraction = 0x64656c74ULL;
inline constexpr std::uint64_t kPoisson = 0x706f6973ULL;
}  // namespace stream

}  // namespace gscan
