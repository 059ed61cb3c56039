#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace distillrank {

/// True iff the byte sequence is well-formed UTF-8 (rejects overlong forms,
/// surrogates, and codepoints above U+10FFFF).
bool utf8_valid(std::string_view s);

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v);

/// Strict double parse of the whole token. Throws ParseError-free: returns
/// false on failure (caller attaches location context).
bool parse_double(std::string_view token, double& out);

/// Strict non-negative integer parse of the whole token.
bool parse_int(std::string_view token, long long& out);

std::vector<std::string_view> split_whitespace(std::string_view line);

std::string_view trim(std::string_view s);

}  // namespace distillrank
