#include "notesplit/tokenizer.hpp"

#include <unicode/uchar.h>

#include "notesplit/utf8.hpp"

namespace notesplit {

std::vector<std::string> Tokenizer::operator()(std::string_view text) const {
  std::vector<std::string> tokens;
  std::string current;
  for (char32_t cp : utf8::decode(text)) {
    if (utf8::is_alnum(cp)) {
      if (lowercase_) cp = static_cast<char32_t>(u_tolower(static_cast<UChar32>(cp)));
      utf8::append(current, cp);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace notesplit
