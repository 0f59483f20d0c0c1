#include "qtokens/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include "qtokens/error.hpp"

namespace qtokens {
namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

template <typename Fn>
void for_each_word(std::string_view text, Fn&& fn) {
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && is_space(text[i])) ++i;
        std::size_t j = i;
        while (j < n && !is_space(text[j])) ++j;
        if (j > i) fn(text.substr(i, j - i));
        i = j;
    }
}

std::size_t utf8_char_len(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xe) return 3;
    if ((lead >> 3) == 0x1e) return 4;
    return 1;  // stray continuation byte
}

}  // namespace

Tokenizer Tokenizer::whitespace() { return Tokenizer{}; }

Tokenizer Tokenizer::byte() {
    Tokenizer t;
    t.mode_ = TokenizerMode::byte;
    return t;
}

Tokenizer Tokenizer::from_vocabulary(std::vector<std::string> entries) {
    Tokenizer t;
    t.mode_ = TokenizerMode::vocabulary;
    auto set = std::make_shared<std::unordered_set<std::string>>();
    for (auto& e : entries) {
        if (e.empty()) continue;
        t.max_entry_len_ = std::max(t.max_entry_len_, e.size());
        set->insert(std::move(e));
    }
    if (set->empty()) throw Error("vocabulary is empty");
    t.vocab_ = std::move(set);
    return t;
}

Tokenizer Tokenizer::from_vocabulary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open vocabulary file: " + path.string());
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        entries.push_back(line);
    }
    auto t = from_vocabulary(std::move(entries));
    t.vocab_path_ = path.string();
    return t;
}

Tokenizer Tokenizer::parse(std::string_view spec) {
    if (spec == "whitespace") return whitespace();
    if (spec == "byte") return byte();
    if (spec.substr(0, 6) == "vocab:" && spec.size() > 6)
        return from_vocabulary(std::filesystem::path(std::string(spec.substr(6))));
    throw Error("unknown tokenizer '" + std::string(spec) +
                                "' (expected whitespace, byte or vocab:<path>)");
}

std::string Tokenizer::name() const {
    switch (mode_) {
        case TokenizerMode::whitespace: return "whitespace";
        case TokenizerMode::byte: return "byte";
        case TokenizerMode::vocabulary: return "vocab:" + vocab_path_;
    }
    return "unknown";
}

TokenSeq Tokenizer::tokenize(std::string_view text) const {
    TokenSeq out;
    switch (mode_) {
        case TokenizerMode::whitespace:
            for_each_word(text, [&](std::string_view w) { out.emplace_back(w); });
            break;
        case TokenizerMode::byte: {
            static constexpr char kHex[] = "0123456789abcdef";
            out.reserve(text.size());
            for (unsigned char c : text) out.push_back(std::string{kHex[c >> 4], kHex[c & 0xf]});
            break;
        }
        case TokenizerMode::vocabulary:
            for_each_word(text, [&](std::string_view w) {
                std::size_t i = 0;
                while (i < w.size()) {
                    std::size_t best = 0;
                    const std::size_t longest = std::min(max_entry_len_, w.size() - i);
                    for (std::size_t len = longest; len > 0; --len) {
                        if (vocab_->count(std::string(w.substr(i, len)))) {
                            best = len;
                            break;
                        }
                    }
                    if (best == 0) {
                        out.emplace_back(kUnknownToken);
                        i += std::min(utf8_char_len(static_cast<unsigned char>(w[i])), w.size() - i);
                    } else {
                        out.emplace_back(w.substr(i, best));
                        i += best;
                    }
                }
            });
            break;
    }
    return out;
}

std::size_t Tokenizer::count(std::string_view text) const {
    if (mode_ == TokenizerMode::byte) return text.size();
    if (mode_ == TokenizerMode::whitespace) {
        std::size_t n = 0;
        for_each_word(text, [&](std::string_view) { ++n; });
        return n;
    }
    return tokenize(text).size();
}

}  // namespace qtokens
