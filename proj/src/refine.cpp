#include "qtokens/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "qtokens/error.hpp"
#include "qtokens/parallel.hpp"

namespace qtokens {

void FeatureVector::add(const FeatureVector& other) {
    if (buckets.empty()) {
        buckets.assign(other.buckets.size(), 0);
        n_range = other.n_range;
    }
    if (other.buckets.size() != buckets.size()) throw Error("feature vectors have different bucket counts");
    for (std::size_t i = 0; i < buckets.size(); ++i) buckets[i] += other.buckets[i];
    total += other.total;
}

std::size_t feature_bucket(const std::string& ngram, std::size_t n_buckets, std::uint64_t seed) {
    return static_cast<std::size_t>(hash_string(ngram, seed) % n_buckets);
}

FeatureVector hashed_ngram_features(const TokenSeq& tokens, const FeatureOptions& opts) {
    const auto [lo, hi] = opts.n_range;
    if (opts.n_buckets == 0) throw Error("n_buckets must be positive");
    if (lo < 1 || lo > hi) throw Error("invalid n-gram range");
    FeatureVector f;
    f.buckets.assign(opts.n_buckets, 0);
    f.n_range = opts.n_range;
    std::string key;
    for (std::size_t n = lo; n <= hi; ++n) {
        if (tokens.size() < n) break;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            key = tokens[i];
            for (std::size_t k = 1; k < n; ++k) {
                key.push_back('\x1f');
                key += tokens[i + k];
            }
            ++f.buckets[feature_bucket(key, opts.n_buckets, opts.seed)];
            ++f.total;
        }
    }
    return f;
}

FeatureVector hashed_ngram_features(const Document& doc, const Tokenizer& tokenizer, const FeatureOptions& opts) {
    return hashed_ngram_features(tokenizer.tokenize(doc.text), opts);
}

FeatureVector aggregate_features(const Corpus& corpus, const Tokenizer& tokenizer, const FeatureOptions& opts,
                                 unsigned threads) {
    std::vector<FeatureVector> per(corpus.size());
    parallel_for(corpus.size(), threads,
                 [&](std::size_t i) { per[i] = hashed_ngram_features(corpus[i], tokenizer, opts); });
    FeatureVector agg;
    agg.buckets.assign(opts.n_buckets, 0);
    agg.n_range = opts.n_range;
    for (const auto& f : per) agg.add(f);
    return agg;
}

ImportanceWeights importance_weights(const FeatureVector& raw, const FeatureVector& target,
                                     const std::vector<FeatureVector>& docs, double smoothing, double temperature) {
    if (!(smoothing > 0.0) || !std::isfinite(smoothing)) throw Error("smoothing must be positive");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw Error("temperature must be positive");
    if (raw.total == 0) throw Error("raw feature distribution is empty");
    if (target.total == 0) throw Error("target feature distribution is empty");
    if (raw.buckets.size() != target.buckets.size()) throw Error("feature vectors have different bucket counts");

    // Pseudocounts scale with each distribution's total, which makes the
    // smoothed probabilities depend only on relative frequencies.
    const std::size_t nb = raw.buckets.size();
    const double uniform = 1.0 / static_cast<double>(nb);
    auto smoothed_log = [&](const FeatureVector& f, std::size_t b) {
        const double freq = static_cast<double>(f.buckets[b]) / static_cast<double>(f.total);
        return std::log((freq + smoothing * uniform) / (1.0 + smoothing));
    };
    std::vector<double> log_ratio(nb);
    for (std::size_t b = 0; b < nb; ++b) log_ratio[b] = smoothed_log(target, b) - smoothed_log(raw, b);

    ImportanceWeights w;
    w.temperature = temperature;
    w.log_weights.reserve(docs.size());
    for (const auto& d : docs) {
        if (d.buckets.size() != nb) throw Error("document feature vector has the wrong bucket count");
        double s = 0.0;
        for (std::size_t b = 0; b < nb; ++b)
            if (d.buckets[b]) s += static_cast<double>(d.buckets[b]) * log_ratio[b];
        w.log_weights.push_back(s / temperature);
    }
    return w;
}

SelectMode parse_select_mode(const std::string& name) {
    if (name == "topk") return SelectMode::topk;
    if (name == "gumbel-sample" || name == "gumbel") return SelectMode::gumbel_sample;
    throw Error("unknown selection mode '" + name + "' (expected topk or gumbel-sample)");
}

Selection select_by_weight(const Corpus& corpus, const ImportanceWeights& weights, std::uint64_t budget_tokens,
                           SelectMode mode, std::uint64_t seed) {
    if (weights.log_weights.size() != corpus.size())
        throw Error("weights cover " + std::to_string(weights.log_weights.size()) + " documents, corpus has " +
                    std::to_string(corpus.size()));
    if (budget_tokens == 0) throw Error("token budget must be at least 1");

    std::vector<double> key(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const double w = weights.log_weights[i];
        if (!std::isfinite(w)) throw Error("non-finite weight for document " + corpus[i].id);
        key[i] = w;
        if (mode == SelectMode::gumbel_sample) {
            double u = unit_interval(hash_string(corpus[i].id, seed ^ 0x67756d62656cULL));
            u = std::max(u, 0x1.0p-60);
            key[i] += -std::log(-std::log(u));
        }
    }
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (key[a] != key[b]) return key[a] > key[b];
        return corpus[a].id < corpus[b].id;
    });

    std::vector<std::size_t> chosen;
    std::uint64_t used = 0;
    for (auto i : order) {
        const auto t = corpus[i].token_count;
        if (used + t > budget_tokens) break;
        used += t;
        chosen.push_back(i);
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<Document> docs;
    docs.reserve(chosen.size());
    for (auto i : chosen) docs.push_back(corpus[i]);

    Selection sel{Corpus(std::move(docs)), used, {}};
    if (sel.corpus.empty() && !corpus.empty())
        sel.warnings.push_back("token budget " + std::to_string(budget_tokens) +
                               " is smaller than the first candidate document; selection is empty");
    return sel;
}

Corpus dedup_exact(const Corpus& corpus) {
    std::unordered_set<std::string_view> seen;
    std::vector<Document> out;
    for (const auto& d : corpus)
        if (seen.insert(d.text).second) out.push_back(d);
    return Corpus(std::move(out));
}

std::vector<std::uint64_t> minhash_signature(const TokenSeq& tokens, const NearDedupOptions& opts) {
    std::vector<std::uint64_t> shingles;
    const std::size_t n = opts.shingle_n;
    std::string key;
    auto add = [&](std::size_t start, std::size_t len) {
        key.clear();
        for (std::size_t k = 0; k < len; ++k) {
            if (k) key.push_back('\x1f');
            key += tokens[start + k];
        }
        shingles.push_back(fnv1a64(key));
    };
    if (tokens.size() < n) {
        if (!tokens.empty()) add(0, tokens.size());
    } else {
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) add(i, n);
    }
    std::vector<std::uint64_t> sig(opts.n_hashes, UINT64_MAX);
    for (std::size_t h = 0; h < opts.n_hashes; ++h) {
        const std::uint64_t salt = splitmix64(opts.seed * 0x100000001b3ULL + h);
        std::uint64_t m = UINT64_MAX;
        for (auto s : shingles) m = std::min(m, splitmix64(s ^ salt));
        sig[h] = m;
    }
    return sig;
}

namespace {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<std::size_t> near_duplicate_clusters(const Corpus& corpus, const Tokenizer& tokenizer,
                                                 const NearDedupOptions& opts) {
    if (opts.shingle_n < 1) throw Error("shingle_n must be at least 1");
    if (opts.bands == 0 || opts.n_hashes == 0 || opts.n_hashes % opts.bands != 0)
        throw Error("n_hashes (" + std::to_string(opts.n_hashes) + ") must be a positive multiple of bands (" +
                    std::to_string(opts.bands) + ")");
    const std::size_t rows = opts.n_hashes / opts.bands;
    std::vector<std::vector<std::uint64_t>> sigs(corpus.size());
    parallel_for(corpus.size(), opts.threads,
                 [&](std::size_t i) { sigs[i] = minhash_signature(tokenizer.tokenize(corpus[i].text), opts); });

    UnionFind uf(corpus.size());
    for (std::size_t band = 0; band < opts.bands; ++band) {
        std::unordered_map<std::uint64_t, std::size_t> first_in_bucket;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            std::uint64_t h = splitmix64(band);
            for (std::size_t r = 0; r < rows; ++r) h = splitmix64(h ^ sigs[i][band * rows + r]);
            auto [it, inserted] = first_in_bucket.emplace(h, i);
            if (!inserted) uf.unite(it->second, i);
        }
    }
    std::vector<std::size_t> cluster(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) cluster[i] = uf.find(i);
    return cluster;
}

Corpus dedup_near(const Corpus& corpus, const Tokenizer& tokenizer, const NearDedupOptions& opts) {
    const auto cluster = near_duplicate_clusters(corpus, tokenizer, opts);
    std::unordered_map<std::size_t, std::size_t> rep;  // cluster -> chosen index
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto [it, inserted] = rep.emplace(cluster[i], i);
        if (inserted || opts.keep == Representative::first) continue;
        if (corpus[i].token_count > corpus[it->second].token_count) it->second = i;
    }
    std::vector<bool> keep(corpus.size(), false);
    for (const auto& [_, i] : rep) keep[i] = true;
    std::vector<Document> out;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (keep[i]) out.push_back(corpus[i]);
    return Corpus(std::move(out));
}

}  // namespace qtokens
