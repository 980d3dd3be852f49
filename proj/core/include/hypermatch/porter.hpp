#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hypermatch {

/// Porter stemmer, reference (ANSI C) variant. Words that are not entirely
/// lowercase ASCII letters are returned unchanged.
std::string porter_stem(std::string_view word);

/// Lowercases ASCII letters, then stems each token.
std::vector<std::string> stem_tokens(const std::vector<std::string>& tokens);

}  // namespace hypermatch
