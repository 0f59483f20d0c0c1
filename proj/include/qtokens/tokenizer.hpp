#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace qtokens {

using TokenSeq = std::vector<std::string>;

enum class TokenizerMode { whitespace, byte, vocabulary };

/// Deterministic text tokenizer.
///
/// - whitespace: split on ASCII whitespace runs.
/// - byte: one token per UTF-8 byte (rendered as its two-digit hex code).
/// - vocabulary: each whitespace word is segmented by greedy longest match
///   against a vocabulary file (one entry per line); code points not covered
///   by any entry become `kUnknownToken`.
class Tokenizer {
public:
    static constexpr std::string_view kUnknownToken = "[UNK]";

    Tokenizer() = default;

    static Tokenizer whitespace();
    static Tokenizer byte();
    static Tokenizer from_vocabulary(const std::filesystem::path& path);
    static Tokenizer from_vocabulary(std::vector<std::string> entries);

    /// Parses the CLI spelling: `whitespace`, `byte`, or `vocab:<path>`.
    static Tokenizer parse(std::string_view spec);

    TokenizerMode mode() const { return mode_; }
    std::string name() const;

    TokenSeq tokenize(std::string_view text) const;
    std::size_t count(std::string_view text) const;

private:
    TokenizerMode mode_ = TokenizerMode::whitespace;
    std::shared_ptr<const std::unordered_set<std::string>> vocab_;
    std::size_t max_entry_len_ = 0;
    std::string vocab_path_;
};

}  // namespace qtokens
