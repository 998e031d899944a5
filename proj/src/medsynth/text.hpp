#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Unicode helpers over UTF-8 strings. Backed by ICU.
namespace medsynth::text {

bool is_punctuation(char32_t cp);
bool is_space(char32_t cp);

// Decodes UTF-8; invalid sequences decode to U+FFFD one byte at a time.
std::vector<char32_t> decode(std::string_view utf8);
std::string encode(char32_t cp);

std::string lowercase(std::string_view utf8);
std::string nfc(std::string_view utf8);

std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);

bool iequals(std::string_view a, std::string_view b);
bool starts_with(std::string_view s, std::string_view prefix);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Platform-independent 64-bit FNV-1a.
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace medsynth::text
