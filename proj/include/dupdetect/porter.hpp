#pragma once

#include <string>
#include <string_view>

namespace dupdetect {

// Porter stemmer (reference C implementation's rule set). Tokens containing
// anything other than ASCII lowercase letters are returned unchanged.
std::string porter_stem(std::string_view token);

}  // namespace dupdetect
