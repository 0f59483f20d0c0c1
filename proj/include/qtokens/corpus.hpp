#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "qtokens/tokenizer.hpp"

namespace qtokens {

struct Document {
    std::string id;
    std::string text;
    std::uint64_t byte_len = 0;
    std::uint64_t token_count = 0;
};

Document make_document(std::string id, std::string text, const Tokenizer& tokenizer);

/// Ordered document collection with unique ids and a cached token total.
class Corpus {
public:
    Corpus() = default;

    /// Throws if two documents share an id.
    explicit Corpus(std::vector<Document> documents);

    static Corpus from_texts(const std::vector<std::string>& texts, const Tokenizer& tokenizer,
                             const std::string& id_prefix = "doc");

    const std::vector<Document>& documents() const { return docs_; }
    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    std::uint64_t total_tokens() const { return total_tokens_; }
    std::uint64_t total_bytes() const;

    const Document& operator[](std::size_t i) const { return docs_[i]; }
    auto begin() const { return docs_.begin(); }
    auto end() const { return docs_.end(); }

private:
    std::vector<Document> docs_;
    std::uint64_t total_tokens_ = 0;
};

/// Streams a JSONL file one document at a time. Each non-blank line must be a
/// JSON object with a string field "text" and an optional string "id"; a
/// missing id becomes "<filename>:<line>".
void for_each_jsonl(const std::filesystem::path& path, const Tokenizer& tokenizer,
                    const std::function<void(Document&&)>& fn);

Corpus load_jsonl(const std::filesystem::path& path, const Tokenizer& tokenizer = Tokenizer::whitespace());
Corpus parse_jsonl(std::istream& in, const std::string& source_name, const Tokenizer& tokenizer);

void write_jsonl(const Corpus& corpus, std::ostream& out);
void write_jsonl(const Corpus& corpus, const std::filesystem::path& path);

/// Seeded per-document sampling key in [0, 1). Used for nested sampling here
/// and for whole-document sampling during syntheticity scoring.
double sampling_key(const std::string& doc_id, std::uint64_t seed);

/// Returns the ceil(fraction * size) documents with the smallest sampling keys,
/// in corpus order. Samples taken with one seed are nested across fractions.
Corpus sample_fraction(const Corpus& corpus, double fraction, std::uint64_t seed);

/// Round-robin partition into n_shards corpora.
std::vector<Corpus> shard(const Corpus& corpus, std::size_t n_shards);

std::uint64_t count_tokens(const Corpus& corpus, const Tokenizer& tokenizer);

/// Tokenizes every document (in corpus order).
std::vector<TokenSeq> tokenize_all(const Corpus& corpus, const Tokenizer& tokenizer, unsigned threads = 1);

}  // namespace qtokens
