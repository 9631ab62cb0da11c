#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fpgcn {

// Base for every error the library raises. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (MIR source, manifests, report files, model files).
class ParseError : public Error {
public:
  ParseError(std::string message, std::size_t line, std::size_t column = 0)
      : Error(format_location(message, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  static std::string format_location(const std::string &message, std::size_t line,
                                     std::size_t column) {
    std::string where = "line " + std::to_string(line);
    if (column > 0)
      where += ", column " + std::to_string(column);
    return where + ": " + message;
  }

  std::size_t line_;
  std::size_t column_;
};

// Well-formed input that violates a semantic rule (unknown method, no
// statement at a line, unreachable exit, dimension mismatch, ...).
class ValidationError : public Error {
public:
  using Error::Error;
};

// splitmix64-seeded xoshiro256**. All randomness in the library goes through
// this generator so results do not depend on the standard library's
// distribution implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto &word : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      word = z ^ (z >> 31);
    }
  }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  template <typename T> const T &pick(const std::vector<T> &items) {
    return items[below(items.size())];
  }

  template <typename T> void shuffle(std::vector<T> &items) {
    for (std::size_t i = items.size(); i > 1; --i)
      std::swap(items[i - 1], items[below(i)]);
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
};

// Nine significant digits: enough for a float to survive a text round trip.
inline std::string format_g9(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

inline std::string format_fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

// Backslash escapes for whitespace and backslash so a token or node text can
// be written as one space-free field, or as the last field of a line.
inline std::string escape_text(std::string_view text, bool escape_space) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
    case '\\': out += "\\\\"; break;
    case '\n': out += "\\n"; break;
    case '\r': out += "\\r"; break;
    case '\t': out += "\\t"; break;
    case ' ':
      if (escape_space) {
        out += "\\s";
        break;
      }
      [[fallthrough]];
    default: out += c;
    }
  }
  return out;
}

inline std::string unescape_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\' || i + 1 == text.size()) {
      out += text[i];
      continue;
    }
    switch (text[++i]) {
    case 'n': out += '\n'; break;
    case 'r': out += '\r'; break;
    case 't': out += '\t'; break;
    case 's': out += ' '; break;
    default: out += text[i];
    }
  }
  return out;
}

} // namespace fpgcn
