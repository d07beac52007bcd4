#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace notesplit {

/// Splits text into maximal runs of letters and digits.
class Tokenizer {
 public:
  explicit Tokenizer(bool lowercase = true) : lowercase_(lowercase) {}

  std::vector<std::string> operator()(std::string_view text) const;

  bool lowercase() const { return lowercase_; }

 private:
  bool lowercase_;
};

}  // namespace notesplit
