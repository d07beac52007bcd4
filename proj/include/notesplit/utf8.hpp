#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace notesplit::utf8 {

/// Decodes UTF-8 into scalar values. Ill-formed sequences become U+FFFD.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view text);
void append(std::string& out, char32_t cp);

/// Number of Unicode scalar values in `text`.
std::size_t length(std::string_view text);

/// Byte offset of every scalar boundary: result[i] is the byte offset of
/// scalar i, and result.back() == text.size().
std::vector<std::size_t> boundaries(std::string_view text);

bool is_letter(char32_t cp);
bool is_alnum(char32_t cp);
bool is_space(char32_t cp);

/// CR and CRLF become LF.
std::string normalize_newlines(std::string_view text);

}  // namespace notesplit::utf8
