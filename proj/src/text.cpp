#include "phrec/text.hpp"

#include <algorithm>
#include <iterator>

namespace phrec {

namespace {

struct CpRange {
    std::uint32_t lo;
    std::uint32_t hi;
};
struct CpPair {
    std::uint32_t from;
    std::uint32_t to;
};

#include "unicode_tables.inc"

template <std::size_t N>
bool in_ranges(const CpRange (&table)[N], std::uint32_t cp) {
    auto it = std::upper_bound(std::begin(table), std::end(table), cp,
                               [](std::uint32_t c, const CpRange& r) { return c < r.lo; });
    if (it == std::begin(table)) return false;
    --it;
    return cp <= it->hi;
}

// Decodes one codepoint starting at i, advancing i. Bytes that do not form
// valid UTF-8 are taken as Latin-1.
std::uint32_t decode_utf8(const std::string& s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    std::uint32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return b0;
    }
    if (i + len > s.size()) {
        ++i;
        return b0;
    }
    for (int k = 1; k < len; ++k) {
        const auto bk = static_cast<unsigned char>(s[i + k]);
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return b0;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += len;
    return cp;
}

} // namespace

bool is_punct_codepoint(std::uint32_t cp) { return in_ranges(kPunctRanges, cp); }

bool is_space_codepoint(std::uint32_t cp) {
    if (cp == '\t' || cp == '\n' || cp == '\v' || cp == '\f' || cp == '\r') return true;
    return in_ranges(kSpaceRanges, cp);
}

std::uint32_t lowercase_codepoint(std::uint32_t cp) {
    auto it = std::lower_bound(std::begin(kLowerPairs), std::end(kLowerPairs), cp,
                               [](const CpPair& p, std::uint32_t c) { return p.from < c; });
    if (it != std::end(kLowerPairs) && it->from == cp) return it->to;
    return cp;
}

void utf8_append(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::vector<std::string> normalize_text(const std::string& raw, const PreTokenizer& pre_tokenize) {
    const std::string text = pre_tokenize ? pre_tokenize(raw) : raw;
    std::vector<std::string> tokens;
    std::string cur;
    std::size_t i = 0;
    while (i < text.size()) {
        const std::uint32_t cp = decode_utf8(text, i);
        if (is_punct_codepoint(cp) || is_space_codepoint(cp)) {
            if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
            continue;
        }
        utf8_append(cur, lowercase_codepoint(cp));
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

} // namespace phrec
