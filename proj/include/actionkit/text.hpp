#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace actionkit {

// Decodes UTF-8 into code points. Invalid bytes are passed through one by
// one (as U+DC80..U+DCFF) so that decoding never fails.
std::u32string utf8_codepoints(std::string_view text);

// Whitespace tokenization; no stemming or punctuation splitting.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace actionkit
