#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "qtokens/corpus.hpp"

namespace qtokens {

/// One window of tokens to score. Every token gets log P(token | earlier
/// tokens of the same window).
struct ScoreRequest {
    std::string id;
    TokenSeq tokens;
};

/// Teacher model interface. Implementations return natural-log
/// probabilities, one vector per request and aligned with it.
class LikelihoodScorer {
public:
    explicit LikelihoodScorer(std::size_t context_len = 1024);
    virtual ~LikelihoodScorer() = default;

    virtual std::string kind() const = 0;
    virtual std::vector<std::vector<double>> score(const std::vector<ScoreRequest>& batch) = 0;

    std::size_t context_len() const { return context_len_; }
    void set_context_len(std::size_t n);

private:
    std::size_t context_len_;
};

/// Assigns every token probability 1/vocab_size.
class UniformScorer final : public LikelihoodScorer {
public:
    explicit UniformScorer(std::uint64_t vocab_size, std::size_t context_len = 1024);
    std::string kind() const override { return "uniform"; }
    std::vector<std::vector<double>> score(const std::vector<ScoreRequest>& batch) override;

private:
    double logp_;
};

/// k-gram language model with add-alpha smoothing over the reference
/// vocabulary plus one unknown symbol. Contexts are the previous k-1 tokens;
/// positions before the start of a window are filled with a begin marker.
class KGramScorer final : public LikelihoodScorer {
public:
    static constexpr std::string_view kBegin = "<s>";
    static constexpr std::string_view kUnknown = "<unk>";

    KGramScorer(const std::vector<TokenSeq>& reference, std::size_t k, double smoothing,
                std::size_t context_len = 1024);

    std::string kind() const override { return "builtin-kgram"; }
    std::vector<std::vector<double>> score(const std::vector<ScoreRequest>& batch) override;

    std::size_t order() const { return k_; }
    double smoothing() const { return alpha_; }
    /// Vocabulary size including the unknown symbol.
    std::size_t vocabulary_size() const { return vocab_.size() + 1; }
    std::vector<std::string> vocabulary() const;

    /// P(word | context); only the last k-1 context tokens matter and a short
    /// context is padded with the begin marker.
    double probability(std::span<const std::string> context, const std::string& word) const;
    double log_probability(std::span<const std::string> context, const std::string& word) const;

private:
    std::uint32_t id_of(const std::string& token) const;
    std::string context_key(std::span<const std::uint32_t> ids, std::size_t end) const;

    std::size_t k_;
    double alpha_;
    std::unordered_map<std::string, std::uint32_t> vocab_;  // ids start at 2
    std::unordered_map<std::string, std::uint64_t> context_counts_;
    std::unordered_map<std::string, std::uint64_t> joint_counts_;
};

std::unique_ptr<KGramScorer> train_kgram_scorer(const Corpus& reference, const Tokenizer& tokenizer,
                                                std::size_t k, double smoothing,
                                                std::size_t context_len = 1024);

struct SyntheticityResult {
    double avg_nll = 0.0;      // nats per token
    double perplexity = 1.0;   // exp(avg_nll)
    double s = 1.0;            // 1 / perplexity
    std::uint64_t m_tokens = 0;
    std::uint64_t documents_scored = 0;
    double sample_fraction = 1.0;
};

struct ScoreOptions {
    double sample_fraction = 0.25;
    std::uint64_t seed = 42;
};

/// Samples whole documents, cuts each into non-overlapping windows of at most
/// context_len tokens and averages the negative log-likelihood of every token.
/// The sampled documents are scored in id order, so the result does not
/// depend on corpus order.
SyntheticityResult score_corpus(LikelihoodScorer& scorer, const Corpus& corpus, const Tokenizer& tokenizer,
                                const ScoreOptions& opts = {});

SyntheticityResult result_from_nll(double total_nll, std::uint64_t m_tokens);

std::string to_json(const SyntheticityResult& result);

}  // namespace qtokens
