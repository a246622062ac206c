#pragma once

#include <array>
#include <compare>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gridsense {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

enum class Phase : std::uint8_t { a = 0, b = 1, c = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::a, Phase::b, Phase::c};

inline char phase_char(Phase p) {
  return static_cast<char>('a' + static_cast<int>(p));
}

/// Nominal angle of the direct-sequence phase set: a=0, b=-120, c=+120 degrees.
inline double nominal_angle_deg(Phase p) {
  switch (p) {
    case Phase::a: return 0.0;
    case Phase::b: return -120.0;
    case Phase::c: return 120.0;
  }
  return 0.0;
}

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// A single phase conductor of a bus; the atom of the network index space.
struct BusPhase {
  int bus = 0;
  Phase phase = Phase::a;

  friend auto operator<=>(const BusPhase&, const BusPhase&) = default;
};

/// Error taxonomy shared by the whole engine; kinds map 1:1 onto the
/// CLI exit codes and the C API status values.
enum class ErrorKind { argument = 1, validation = 2, numerical = 3, io = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& m) : Error(ErrorKind::argument, m) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error(ErrorKind::validation, m) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& m) : Error(ErrorKind::numerical, m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};

/// Subset of {a,b,c} with stable slot numbering (a before b before c).
class PhaseMask {
 public:
  PhaseMask() = default;

  static PhaseMask abc() {
    PhaseMask m;
    m.set(Phase::a);
    m.set(Phase::b);
    m.set(Phase::c);
    return m;
  }

  void set(Phase p) { present_[static_cast<int>(p)] = true; }
  bool has(Phase p) const { return present_[static_cast<int>(p)]; }

  int count() const {
    return static_cast<int>(present_[0]) + static_cast<int>(present_[1]) +
           static_cast<int>(present_[2]);
  }
  bool empty() const { return count() == 0; }

  /// Position of `p` among the present phases, or -1.
  int slot(Phase p) const {
    if (!has(p)) return -1;
    int s = 0;
    for (Phase q : kAllPhases) {
      if (q == p) return s;
      if (has(q)) ++s;
    }
    return -1;
  }

  /// Phase occupying slot `s` (0-based); throws on out-of-range.
  Phase at(int s) const {
    int i = 0;
    for (Phase q : kAllPhases) {
      if (!has(q)) continue;
      if (i == s) return q;
      ++i;
    }
    throw ArgumentError("phase slot " + std::to_string(s) + " out of range");
  }

  std::array<Phase, 3> list() const {
    std::array<Phase, 3> out{};
    int i = 0;
    for (Phase q : kAllPhases)
      if (has(q)) out[i++] = q;
    return out;
  }

  /// True if every phase of `other` is also present here.
  bool contains(const PhaseMask& other) const {
    for (Phase q : kAllPhases)
      if (other.has(q) && !has(q)) return false;
    return true;
  }

  std::string to_string() const {
    std::string s;
    for (Phase q : kAllPhases)
      if (has(q)) s += phase_char(q);
    return s;
  }

  friend bool operator==(const PhaseMask&, const PhaseMask&) = default;

 private:
  std::array<bool, 3> present_{false, false, false};
};

}  // namespace gridsense
