#include "scalarprobe/canonicalizer.hpp"

#include "scalarprobe/error.hpp"

#include <omp.h>

#include <charconv>
#include <istream>
#include <ostream>

namespace scalarprobe::canon {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Letters, digits, underscore and any non-ASCII byte (part of a UTF-8 word).
bool is_word(char c) {
  auto u = static_cast<unsigned char>(c);
  return is_digit(c) || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || c == '_' || u >= 0x80;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool digit_at(std::string_view s, std::size_t i) { return i < s.size() && is_digit(s[i]); }

bool ends_with_exp_token(std::string_view text, std::size_t pos) {
  return pos >= kExpToken.size() && text.substr(pos - kExpToken.size(), kExpToken.size()) == kExpToken;
}

// Where a literal may begin: a digit, or a sign / point directly followed by one.
bool starts_number(std::string_view text, std::size_t i) {
  char c = text[i];
  if (is_digit(c)) return true;
  if (c == '.') return digit_at(text, i + 1);
  if (c == '+' || c == '-') {
    return digit_at(text, i + 1) || (i + 2 < text.size() && text[i + 1] == '.' && digit_at(text, i + 2));
  }
  return false;
}

enum class Parse { kOk, kMalformed, kOutOfRange };

// Validates a mantissa run ([0-9.,]* with separators always followed by a
// digit) and normalizes it into `lit`.
Parse normalize(std::string_view mantissa, std::string_view exp_digits, bool exp_negative,
                NumericLiteral& lit) {
  std::string int_digits;
  std::string frac_digits;

  std::size_t dot = mantissa.find('.');
  if (dot != std::string_view::npos && mantissa.find('.', dot + 1) != std::string_view::npos) {
    return Parse::kMalformed;
  }
  std::string_view int_part = mantissa.substr(0, dot);
  std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : mantissa.substr(dot + 1);
  if (frac_part.find(',') != std::string_view::npos) return Parse::kMalformed;

  if (int_part.find(',') != std::string_view::npos) {
    // Thousands grouping: 1-3 leading digits, then groups of exactly three.
    std::size_t first = int_part.find(',');
    if (first == 0 || first > 3) return Parse::kMalformed;
    std::size_t pos = first;
    while (pos != std::string_view::npos) {
      std::size_t next = int_part.find(',', pos + 1);
      std::size_t group_end = next == std::string_view::npos ? int_part.size() : next;
      if (group_end - pos - 1 != 3) return Parse::kMalformed;
      pos = next;
    }
    for (char c : int_part) {
      if (c != ',') int_digits.push_back(c);
    }
  } else {
    int_digits.assign(int_part);
  }
  frac_digits.assign(frac_part);

  long long shift = 0;
  if (!exp_digits.empty()) {
    std::size_t nz = exp_digits.find_first_not_of('0');
    std::string_view significant = nz == std::string_view::npos ? std::string_view{"0"} : exp_digits.substr(nz);
    if (significant.size() > 6) return Parse::kOutOfRange;
    std::from_chars(significant.data(), significant.data() + significant.size(), shift);
    if (exp_negative) shift = -shift;
  }

  std::string all = int_digits + frac_digits;
  std::size_t first_nonzero = all.find_first_not_of('0');
  if (first_nonzero == std::string::npos) {
    lit.negative = false;
    lit.significand_digits = "0";
    lit.exponent = 0;
    return Parse::kOk;
  }
  std::size_t last_nonzero = all.find_last_not_of('0');
  long long exponent = static_cast<long long>(int_digits.size()) - 1 -
                       static_cast<long long>(first_nonzero) + shift;
  if (exponent > kMaxAbsExponent || exponent < -kMaxAbsExponent) return Parse::kOutOfRange;
  lit.significand_digits = all.substr(first_nonzero, last_nonzero - first_nonzero + 1);
  lit.exponent = static_cast<int>(exponent);
  return Parse::kOk;
}

}  // namespace

CanonicalizationStats& CanonicalizationStats::operator+=(const CanonicalizationStats& other) {
  literals_rewritten += other.literals_rewritten;
  literals_skipped += other.literals_skipped;
  bytes_in += other.bytes_in;
  bytes_out += other.bytes_out;
  return *this;
}

ScanResult scan_numbers(std::string_view text) {
  ScanResult result;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (!starts_number(text, i) || (i > 0 && is_word(text[i - 1]))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    bool negative = false;
    if (text[i] == '+' || text[i] == '-') {
      negative = text[i] == '-';
      ++i;
    }
    // Mantissa run: digits, plus '.' / ',' whenever a digit follows.
    const std::size_t mantissa_start = i;
    while (i < n && (is_digit(text[i]) || ((text[i] == '.' || text[i] == ',') && digit_at(text, i + 1)))) {
      ++i;
    }
    std::string_view mantissa = text.substr(mantissa_start, i - mantissa_start);

    std::string_view exp_digits;
    bool exp_negative = false;
    if (i < n && (text[i] == 'e' || text[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < n && (text[j] == '+' || text[j] == '-')) {
        exp_negative = text[j] == '-';
        ++j;
      }
      if (digit_at(text, j)) {
        std::size_t exp_start = j;
        while (digit_at(text, j)) ++j;
        exp_digits = text.substr(exp_start, j - exp_start);
        i = j;
      }
    }
    const std::size_t end = i;

    // Glued to a word, or already canonical: not a literal at all.
    if ((end < n && is_word(text[end])) || ends_with_exp_token(text, start) ||
        text.substr(end, kExpToken.size()) == kExpToken) {
      // Step over the rest of the word so its inner digits are not picked up.
      while (i < n && is_word(text[i])) ++i;
      continue;
    }

    NumericLiteral lit;
    if (normalize(mantissa, exp_digits, exp_negative, lit) != Parse::kOk) {
      ++result.skipped;
      continue;
    }
    if (lit.significand_digits != "0") lit.negative = negative;
    lit.offset = start;
    lit.raw_text.assign(text.substr(start, end - start));
    result.literals.push_back(std::move(lit));
  }
  return result;
}

std::string to_scientific(const NumericLiteral& lit) {
  std::string out;
  if (lit.negative && lit.significand_digits != "0") out.push_back('-');
  out += lit.significand_digits;
  out += kExpToken;
  out += std::to_string(lit.exponent);
  return out;
}

Rational from_scientific(std::string_view s) {
  auto fail = [&] { return ValidationError("malformed scientific literal: '" + std::string(s) + "'"); };
  std::size_t token = s.find(kExpToken);
  if (token == std::string_view::npos) throw fail();
  std::string_view mantissa = s.substr(0, token);
  std::string_view exponent = s.substr(token + kExpToken.size());

  bool negative = false;
  if (!mantissa.empty() && mantissa.front() == '-') {
    negative = true;
    mantissa.remove_prefix(1);
  }
  if (mantissa.empty()) throw fail();
  for (char c : mantissa) {
    if (!is_digit(c)) throw fail();
  }
  bool exp_negative = false;
  if (!exponent.empty() && exponent.front() == '-') {
    exp_negative = true;
    exponent.remove_prefix(1);
  }
  if (exponent.empty() || exponent.size() > 9) throw fail();
  for (char c : exponent) {
    if (!is_digit(c)) throw fail();
  }
  long long exp_value = 0;
  std::from_chars(exponent.data(), exponent.data() + exponent.size(), exp_value);
  if (exp_negative) exp_value = -exp_value;

  using boost::multiprecision::cpp_int;
  // A leading 0 would make cpp_int parse the digits as octal.
  std::string_view digits = mantissa.substr(std::min(mantissa.find_first_not_of('0'), mantissa.size() - 1));
  cpp_int significand{std::string(digits)};
  long long scale = exp_value - static_cast<long long>(mantissa.size() - 1);
  cpp_int power = boost::multiprecision::pow(cpp_int(10), static_cast<unsigned>(scale < 0 ? -scale : scale));
  Rational value = scale >= 0 ? Rational(significand * power) : Rational(significand, power);
  return negative ? Rational(-value) : value;
}

std::string canonicalize_text(std::string_view text, CanonicalizationStats* stats) {
  ScanResult scan = scan_numbers(text);
  std::string out;
  out.reserve(text.size() + text.size() / 8);
  std::size_t cursor = 0;
  for (const NumericLiteral& lit : scan.literals) {
    out.append(text.substr(cursor, lit.offset - cursor));
    out += to_scientific(lit);
    cursor = lit.offset + lit.raw_text.size();
  }
  out.append(text.substr(cursor));
  if (stats != nullptr) {
    stats->literals_rewritten += scan.literals.size();
    stats->literals_skipped += scan.skipped;
    stats->bytes_in += text.size();
    stats->bytes_out += out.size();
  }
  return out;
}

std::string canonicalize_text_parallel(std::string_view text, CanonicalizationStats* stats,
                                       std::size_t chunk_bytes) {
  if (chunk_bytes == 0) chunk_bytes = 1;
  // Cut points sit just after a whitespace byte, so every chunk sees the same
  // left/right context a serial pass would.
  std::vector<std::size_t> cuts{0};
  std::size_t pos = 0;
  while (text.size() - pos > chunk_bytes) {
    std::size_t target = pos + chunk_bytes;
    while (target < text.size() && !is_space(text[target - 1])) ++target;
    if (target >= text.size()) break;
    cuts.push_back(target);
    pos = target;
  }
  cuts.push_back(text.size());

  const auto n_chunks = static_cast<std::ptrdiff_t>(cuts.size() - 1);
  std::vector<std::string> pieces(cuts.size() - 1);
  std::vector<CanonicalizationStats> piece_stats(cuts.size() - 1);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < n_chunks; ++c) {
    pieces[c] = canonicalize_text(text.substr(cuts[c], cuts[c + 1] - cuts[c]), &piece_stats[c]);
  }

  std::string out;
  std::size_t total = 0;
  for (const auto& p : pieces) total += p.size();
  out.reserve(total);
  for (std::size_t c = 0; c < pieces.size(); ++c) {
    out += pieces[c];
    if (stats != nullptr) *stats += piece_stats[c];
  }
  return out;
}

CanonicalizationStats canonicalize_stream(std::istream& in, std::ostream& out, const StreamOptions& options) {
  CanonicalizationStats stats;
  std::string buffer;
  std::string block(options.block_bytes == 0 ? 1 : options.block_bytes, '\0');
  std::uint64_t consumed = 0;

  auto flush = [&](std::size_t upto) {
    std::string rewritten =
        canonicalize_text_parallel(std::string_view(buffer).substr(0, upto), &stats, options.chunk_bytes);
    out.write(rewritten.data(), static_cast<std::streamsize>(rewritten.size()));
    if (!out) throw IoError("write failed", consumed);
    consumed += upto;
    buffer.erase(0, upto);
  };

  while (true) {
    in.read(block.data(), static_cast<std::streamsize>(block.size()));
    std::streamsize got = in.gcount();
    if (in.bad()) throw IoError("read failed", consumed + buffer.size());
    buffer.append(block.data(), static_cast<std::size_t>(got));
    if (in.eof() || got == 0) break;

    std::size_t last_space = buffer.find_last_of(" \t\n\r\f\v");
    if (last_space != std::string::npos) flush(last_space + 1);
  }
  if (!buffer.empty()) flush(buffer.size());
  out.flush();
  if (!out) throw IoError("flush failed", consumed);
  return stats;
}

}  // namespace scalarprobe::canon
