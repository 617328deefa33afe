#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by ingestion, shingling, heuristics and tokenisation.
namespace curate::text {

/// Byte offset of the first invalid UTF-8 sequence, or npos if valid.
std::size_t find_invalid_utf8(std::string_view s);

/// Splits on Unicode White_Space code points; empty pieces are dropped.
std::vector<std::string_view> split_words(std::string_view s);

/// Full Unicode lowercasing (root locale).
std::string to_lower(std::string_view s);

bool is_blank(std::string_view line);

/// Strips leading and trailing Unicode whitespace.
std::string_view trim(std::string_view s);

std::string nfc(std::string_view s);

std::size_t count_code_points(std::string_view s);

struct CharCounts {
  std::size_t non_space = 0;
  std::size_t alphabetic = 0;
};
CharCounts count_chars(std::string_view s);

}  // namespace curate::text
