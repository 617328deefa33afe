#include "curate/text.hpp"

#include <unicode/bytestream.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <stdexcept>

namespace curate::text {
namespace {

bool is_ascii(std::string_view s) {
  for (unsigned char c : s)
    if (c >= 0x80) return false;
  return true;
}

// Callers validate UTF-8 before reaching these helpers; malformed bytes
// decode as U+FFFD (negative from U8_NEXT) and are treated as non-space.
template <typename Fn>
void for_each_code_point(std::string_view s, Fn&& fn) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto len = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  while (i < len) {
    std::int32_t start = i;
    UChar32 c;
    U8_NEXT(p, i, len, c);
    fn(c, static_cast<std::size_t>(start), static_cast<std::size_t>(i));
  }
}

bool is_space(UChar32 c) { return c >= 0 && u_isUWhiteSpace(c); }

}  // namespace

std::size_t find_invalid_utf8(std::string_view s) {
  std::size_t bad = std::string_view::npos;
  const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto len = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  while (i < len) {
    std::int32_t start = i;
    UChar32 c;
    U8_NEXT(p, i, len, c);
    if (c < 0) {
      bad = static_cast<std::size_t>(start);
      break;
    }
  }
  return bad;
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> words;
  std::size_t word_start = std::string_view::npos;
  for_each_code_point(s, [&](UChar32 c, std::size_t begin, std::size_t) {
    if (is_space(c)) {
      if (word_start != std::string_view::npos) {
        words.push_back(s.substr(word_start, begin - word_start));
        word_start = std::string_view::npos;
      }
    } else if (word_start == std::string_view::npos) {
      word_start = begin;
    }
  });
  if (word_start != std::string_view::npos) words.push_back(s.substr(word_start));
  return words;
}

std::string to_lower(std::string_view s) {
  if (is_ascii(s)) {
    std::string out(s);
    for (auto& c : out)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
  }
  auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<std::int32_t>(s.size())));
  u.toLower(icu::Locale::getRoot());
  std::string out;
  u.toUTF8String(out);
  return out;
}

bool is_blank(std::string_view line) {
  bool blank = true;
  for_each_code_point(line, [&](UChar32 c, std::size_t, std::size_t) {
    if (!is_space(c)) blank = false;
  });
  return blank;
}

std::string_view trim(std::string_view s) {
  std::size_t first = s.size();
  std::size_t last = 0;
  for_each_code_point(s, [&](UChar32 c, std::size_t begin, std::size_t end) {
    if (!is_space(c)) {
      if (first == s.size()) first = begin;
      last = end;
    }
  });
  if (first == s.size()) return {};
  return s.substr(first, last - first);
}

std::string nfc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normaliser unavailable");
  icu::StringPiece piece(s.data(), static_cast<std::int32_t>(s.size()));
  if (norm->isNormalizedUTF8(piece, status) && U_SUCCESS(status)) return std::string(s);
  status = U_ZERO_ERROR;
  std::string out;
  icu::StringByteSink<std::string> sink(&out);
  norm->normalizeUTF8(0, piece, sink, nullptr, status);
  if (U_FAILURE(status)) throw std::runtime_error("NFC normalisation failed");
  return out;
}

std::size_t count_code_points(std::string_view s) {
  std::size_t n = 0;
  for_each_code_point(s, [&](UChar32, std::size_t, std::size_t) { ++n; });
  return n;
}

CharCounts count_chars(std::string_view s) {
  CharCounts counts;
  for_each_code_point(s, [&](UChar32 c, std::size_t, std::size_t) {
    if (is_space(c)) return;
    ++counts.non_space;
    if (c >= 0 && u_isUAlphabetic(c)) ++counts.alphabetic;
  });
  return counts;
}

}  // namespace curate::text
