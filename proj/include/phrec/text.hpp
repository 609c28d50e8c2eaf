#ifndef PHREC_TEXT_HPP
#define PHREC_TEXT_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace phrec {

// Applied before tokenization for scripts without whitespace word boundaries
// (e.g. an external Mandarin segmenter that inserts spaces).
using PreTokenizer = std::function<std::string(const std::string&)>;

bool is_punct_codepoint(std::uint32_t cp);
bool is_space_codepoint(std::uint32_t cp);
std::uint32_t lowercase_codepoint(std::uint32_t cp);

// Punctuation acts as a token separator, everything is lowercased where the
// script has case, tokens are split on whitespace. Invalid UTF-8 bytes pass
// through as Latin-1 codepoints.
std::vector<std::string> normalize_text(const std::string& raw,
                                        const PreTokenizer& pre_tokenize = nullptr);

// Appends a UTF-8 encoded codepoint to out.
void utf8_append(std::string& out, std::uint32_t cp);

} // namespace phrec

#endif
