#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sigkit {

// All annotation offsets count Unicode scalar values, not bytes.

class Utf8Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::u32string decode_utf8(std::string_view utf8);
std::string encode_utf8(std::u32string_view text);
std::string encode_utf8(char32_t cp);

std::size_t scalar_length(std::string_view utf8);

/// Substring by scalar offsets [start, end). Throws std::out_of_range.
std::string scalar_slice(std::string_view utf8, std::size_t start, std::size_t end);

bool is_space(char32_t c);
bool is_ascii_digit(char32_t c);
bool is_ascii_alpha(char32_t c);
bool is_thai(char32_t c);

/// ASCII-only lowercase; other scalars pass through unchanged.
std::string ascii_lower(std::string_view s);
std::string trim(std::string_view s);
/// Trims and collapses internal whitespace runs to one space.
std::string squeeze_spaces(std::string_view s);

}  // namespace sigkit
