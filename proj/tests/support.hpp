#pragma once

#include <qtokens/corpus.hpp>
#include <qtokens/hash.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing {

// Hand-rolled generators for the property tests. Everything is driven by
// SplitMix so failures replay exactly.

inline std::vector<std::string> random_tokens(qtokens::SplitMix& rng, std::size_t n, std::size_t vocab) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(rng.below(vocab)));
    return out;
}

inline std::string join(const std::vector<std::string>& tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) s += ' ';
        s += tokens[i];
    }
    return s;
}

inline std::string random_text(qtokens::SplitMix& rng, std::size_t n, std::size_t vocab) {
    return join(random_tokens(rng, n, vocab));
}

inline std::string random_hex(qtokens::SplitMix& rng, std::size_t bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(bytes);
    while (s.size() < bytes) {
        const auto v = rng.next();
        for (int k = 0; k < 16 && s.size() < bytes; ++k) s += digits[(v >> (4 * k)) & 0xf];
    }
    return s;
}

inline qtokens::Corpus corpus_of(const std::vector<std::string>& texts, const std::string& prefix = "doc") {
    return qtokens::Corpus::from_texts(texts, qtokens::Tokenizer::whitespace(), prefix);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("qtokens-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
