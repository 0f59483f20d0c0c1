#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qtokens/corpus.hpp"
#include "qtokens/hash.hpp"

namespace qtokens {

struct FeatureVector {
    std::vector<std::uint64_t> buckets;
    std::pair<std::size_t, std::size_t> n_range{1, 2};
    std::uint64_t total = 0;

    void add(const FeatureVector& other);
};

struct FeatureOptions {
    std::pair<std::size_t, std::size_t> n_range{1, 2};
    std::size_t n_buckets = std::size_t{1} << 16;
    std::uint64_t seed = kDefaultHashSeed;
};

/// Bucket index of an n-gram (tokens joined by U+001F) under the feature hash.
std::size_t feature_bucket(const std::string& ngram, std::size_t n_buckets, std::uint64_t seed = kDefaultHashSeed);

/// Hashed counts of every token n-gram with n in n_range.
FeatureVector hashed_ngram_features(const TokenSeq& tokens, const FeatureOptions& opts = {});
FeatureVector hashed_ngram_features(const Document& doc, const Tokenizer& tokenizer, const FeatureOptions& opts = {});

/// Sum of per-document features for a whole corpus.
FeatureVector aggregate_features(const Corpus& corpus, const Tokenizer& tokenizer, const FeatureOptions& opts = {},
                                 unsigned threads = 1);

struct ImportanceWeights {
    std::vector<double> log_weights;
    double temperature = 1.0;
};

/// log w(doc) = sum_b count_doc[b] * (log p_target[b] - log p_raw[b]), both
/// distributions add-`smoothing` smoothed over all buckets, divided by
/// `temperature`.
ImportanceWeights importance_weights(const FeatureVector& raw, const FeatureVector& target,
                                     const std::vector<FeatureVector>& docs, double smoothing = 1.0,
                                     double temperature = 1.0);

enum class SelectMode { topk, gumbel_sample };
SelectMode parse_select_mode(const std::string& name);

struct Selection {
    Corpus corpus;
    std::uint64_t tokens = 0;
    std::vector<std::string> warnings;
};

/// Walks documents by descending (optionally Gumbel-perturbed) log-weight,
/// ties by id, and stops at the first document that would overflow the
/// budget. Output keeps corpus order.
Selection select_by_weight(const Corpus& corpus, const ImportanceWeights& weights, std::uint64_t budget_tokens,
                           SelectMode mode = SelectMode::topk, std::uint64_t seed = 42);

/// Keeps the first occurrence of each exact text.
Corpus dedup_exact(const Corpus& corpus);

enum class Representative { longest, first };

struct NearDedupOptions {
    std::size_t shingle_n = 5;
    std::size_t n_hashes = 128;
    std::size_t bands = 16;
    std::uint64_t seed = 42;
    Representative keep = Representative::longest;
    unsigned threads = 1;
};

std::vector<std::uint64_t> minhash_signature(const TokenSeq& tokens, const NearDedupOptions& opts);

/// Connected components of documents whose MinHash signatures agree on at
/// least one band. Returns the component id of every document.
std::vector<std::size_t> near_duplicate_clusters(const Corpus& corpus, const Tokenizer& tokenizer,
                                                 const NearDedupOptions& opts = {});

/// One survivor per near-duplicate cluster (longest by tokens, ties to the
/// earliest), in corpus order.
Corpus dedup_near(const Corpus& corpus, const Tokenizer& tokenizer, const NearDedupOptions& opts = {});

}  // namespace qtokens
