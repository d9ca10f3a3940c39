#pragma once

// Rewrites numerals in running text as normalized scientific notation,
// e.g. "314.1" -> "3141[EXP]2".
//
// Numeric grammar (a literal must match all of it):
//   [+-]? ( D{1,3} (',' D{3})+ | D+ ) ( '.' D+ )? ( [eE] [+-]? D+ )?
//   |  [+-]? '.' D+ ( [eE] [+-]? D+ )?
// A literal is only rewritten when it is not glued to a word character on
// either side ("3D", "x86" stay as they are) and is not already part of a
// "<digits>[EXP]<exponent>" group.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace scalarprobe::canon {

inline constexpr std::string_view kExpToken = "[EXP]";

// Literals whose decimal exponent exceeds this in magnitude are left untouched.
inline constexpr int kMaxAbsExponent = 308;

struct NumericLiteral {
  std::size_t offset = 0;  // byte offset of raw_text within the scanned text
  std::string raw_text;
  bool negative = false;
  std::string significand_digits;  // no leading/trailing zeros; "0" for zero
  int exponent = 0;                // value = d1.d2d3... x 10^exponent
};

struct CanonicalizationStats {
  std::uint64_t literals_rewritten = 0;
  std::uint64_t literals_skipped = 0;
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;

  CanonicalizationStats& operator+=(const CanonicalizationStats& other);
  friend bool operator==(const CanonicalizationStats&, const CanonicalizationStats&) = default;
};

struct ScanResult {
  std::vector<NumericLiteral> literals;
  std::uint64_t skipped = 0;
};

// Finds every rewritable literal, left to right, non-overlapping.
ScanResult scan_numbers(std::string_view text);

// "<->?<digits>[EXP]<exponent>"
std::string to_scientific(const NumericLiteral& lit);

using Rational = boost::multiprecision::cpp_rational;

// Inverse of to_scientific. Throws ValidationError on malformed input.
Rational from_scientific(std::string_view s);

// Serial rewrite of an in-memory buffer.
std::string canonicalize_text(std::string_view text, CanonicalizationStats* stats = nullptr);

// Same result as canonicalize_text, with the buffer cut at whitespace into
// roughly chunk_bytes pieces that are rewritten in parallel.
std::string canonicalize_text_parallel(std::string_view text, CanonicalizationStats* stats = nullptr,
                                       std::size_t chunk_bytes = 1 << 16);

struct StreamOptions {
  std::size_t block_bytes = 1 << 22;
  std::size_t chunk_bytes = 1 << 16;
};

// Reads `in` to exhaustion and writes the rewritten text to `out`. Blocks are
// cut after whitespace so no literal is ever split. Throws IoError carrying
// the input byte offset on stream failure.
CanonicalizationStats canonicalize_stream(std::istream& in, std::ostream& out,
                                          const StreamOptions& options = {});

}  // namespace scalarprobe::canon
