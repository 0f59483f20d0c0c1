#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qtokens/corpus.hpp"

namespace qtokens {

/// Streaming gzip byte counter: feed chunks, then finish() to get the
/// compressed size. Only counts are kept, never the compressed stream.
class CompressionCounter {
public:
    explicit CompressionCounter(int level = 6);
    ~CompressionCounter();
    CompressionCounter(const CompressionCounter&) = delete;
    CompressionCounter& operator=(const CompressionCounter&) = delete;

    void feed(std::string_view bytes);
    void finish();

    std::uint64_t input_bytes() const { return in_bytes_; }
    std::uint64_t output_bytes() const { return out_bytes_; }

private:
    void pump(int flush);

    struct Stream;
    std::unique_ptr<Stream> stream_;
    std::uint64_t in_bytes_ = 0;
    std::uint64_t out_bytes_ = 0;
    bool finished_ = false;
};

struct CompressionOptions {
    int level = 6;
    std::string separator = "\n";
};

/// Original bytes of the separator-joined documents over their gzip size.
double compression_ratio(const Corpus& corpus, const CompressionOptions& opts = {});

/// Dr = 1 / CR. Higher means more diverse.
double diversity_score(const Corpus& corpus, const CompressionOptions& opts = {});

double type_token_ratio(const TokenSeq& tokens);
double mattr(const TokenSeq& tokens, std::size_t window);
double ngram_diversity(const TokenSeq& tokens, std::size_t n);

/// Mean over documents (with at least n tokens) of log(1 + number of n-gram
/// positions whose n-gram also occurs in some other document).
double self_repetition(const std::vector<TokenSeq>& documents, std::size_t n);

struct DiversityOptions {
    CompressionOptions compression;
    std::size_t mattr_window = 50;
    std::vector<std::size_t> ngram_orders{2, 3, 4};
    std::size_t self_repetition_n = 4;
    unsigned threads = 1;
};

struct DiversityReport {
    double cr = 0.0;
    double dr = 0.0;
    double ttr = 0.0;
    double mattr = 0.0;
    std::map<std::size_t, double> ngram_diversity;
    std::optional<double> self_repetition;
    std::uint64_t documents = 0;
    std::uint64_t tokens = 0;
    std::uint64_t bytes = 0;
    std::vector<std::string> warnings;
};

/// Token metrics run over the corpus' documents concatenated in order.
DiversityReport diversity_report(const Corpus& corpus, const Tokenizer& tokenizer,
                                 const DiversityOptions& opts = {});

std::string to_json(const DiversityReport& report);

struct CorrelationMatrix {
    std::vector<std::string> metrics;
    // values[i][j] is empty when metric i or j is constant across corpora.
    std::vector<std::vector<std::optional<double>>> values;
    std::vector<std::string> undefined_metrics;

    std::optional<double> at(std::string_view a, std::string_view b) const;
};

/// Pairwise Pearson r between per-corpus metric scores (needs >= 3 corpora).
CorrelationMatrix metric_correlation_matrix(const std::vector<DiversityReport>& reports);
CorrelationMatrix metric_correlation_matrix(const std::vector<Corpus>& corpora, const Tokenizer& tokenizer,
                                            const DiversityOptions& opts = {});

}  // namespace qtokens
