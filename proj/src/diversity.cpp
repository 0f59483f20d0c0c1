#include "qtokens/diversity.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "qtokens/error.hpp"
#include "qtokens/parallel.hpp"
#include "qtokens/stats.hpp"

namespace qtokens {

struct CompressionCounter::Stream {
    z_stream z{};
    unsigned char buf[1 << 15];
};

CompressionCounter::CompressionCounter(int level) : stream_(std::make_unique<Stream>()) {
    if (level < 0 || level > 9) throw Error("compression level must be in [0, 9]");
    // windowBits 15 + 16 selects gzip framing.
    if (deflateInit2(&stream_->z, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error("deflateInit2 failed");
}

CompressionCounter::~CompressionCounter() { deflateEnd(&stream_->z); }

void CompressionCounter::pump(int flush) {
    auto& z = stream_->z;
    int rc;
    do {
        z.next_out = stream_->buf;
        z.avail_out = sizeof(stream_->buf);
        rc = deflate(&z, flush);
        if (rc == Z_STREAM_ERROR) throw Error("deflate failed");
        out_bytes_ += sizeof(stream_->buf) - z.avail_out;
    } while (z.avail_out == 0 || (flush == Z_FINISH && rc != Z_STREAM_END));
}

void CompressionCounter::feed(std::string_view bytes) {
    if (finished_) throw Error("CompressionCounter already finished");
    auto& z = stream_->z;
    while (!bytes.empty()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size(), 1u << 30));
        z.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
        z.avail_in = chunk;
        pump(Z_NO_FLUSH);
        in_bytes_ += chunk;
        bytes.remove_prefix(chunk);
    }
}

void CompressionCounter::finish() {
    if (finished_) return;
    stream_->z.next_in = nullptr;
    stream_->z.avail_in = 0;
    pump(Z_FINISH);
    finished_ = true;
}

double compression_ratio(const Corpus& corpus, const CompressionOptions& opts) {
    if (corpus.empty()) throw Error("cannot compress empty corpus");
    CompressionCounter counter(opts.level);
    bool first = true;
    for (const auto& d : corpus) {
        if (!first) counter.feed(opts.separator);
        counter.feed(d.text);
        first = false;
    }
    counter.finish();
    if (counter.input_bytes() == 0) throw Error("cannot compress empty corpus");
    return static_cast<double>(counter.input_bytes()) / static_cast<double>(counter.output_bytes());
}

double diversity_score(const Corpus& corpus, const CompressionOptions& opts) {
    return 1.0 / compression_ratio(corpus, opts);
}

namespace {

std::string ngram_key(const TokenSeq& tokens, std::size_t pos, std::size_t n) {
    std::string key = tokens[pos];
    for (std::size_t k = 1; k < n; ++k) {
        key.push_back('\x1f');
        key += tokens[pos + k];
    }
    return key;
}

}  // namespace

double type_token_ratio(const TokenSeq& tokens) {
    if (tokens.empty()) throw Error("type-token ratio of empty sequence");
    std::unordered_set<std::string_view> types(tokens.begin(), tokens.end());
    return static_cast<double>(types.size()) / static_cast<double>(tokens.size());
}

double mattr(const TokenSeq& tokens, std::size_t window) {
    if (window == 0) throw Error("MATTR window must be positive");
    if (tokens.empty()) throw Error("MATTR of empty sequence");
    if (tokens.size() <= window) return type_token_ratio(tokens);

    // Sliding window with per-type counts; the distinct-type count of each
    // window is summed as an integer so the mean is exact up to one division.
    std::unordered_map<std::string_view, std::size_t> counts;
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < window; ++i)
        if (counts[tokens[i]]++ == 0) ++distinct;
    std::uint64_t total_distinct = distinct;
    const std::size_t n_windows = tokens.size() - window + 1;
    for (std::size_t start = 1; start < n_windows; ++start) {
        if (--counts[tokens[start - 1]] == 0) --distinct;
        if (counts[tokens[start + window - 1]]++ == 0) ++distinct;
        total_distinct += distinct;
    }
    return static_cast<double>(total_distinct) /
           (static_cast<double>(n_windows) * static_cast<double>(window));
}

double ngram_diversity(const TokenSeq& tokens, std::size_t n) {
    if (n == 0) throw Error("n-gram order must be positive");
    if (tokens.size() < n)
        throw Error("sequence of " + std::to_string(tokens.size()) + " tokens is shorter than n=" +
                    std::to_string(n));
    const std::size_t total = tokens.size() - n + 1;
    std::unordered_set<std::string> unique;
    unique.reserve(total);
    for (std::size_t i = 0; i < total; ++i) unique.insert(ngram_key(tokens, i, n));
    return static_cast<double>(unique.size()) / static_cast<double>(total);
}

double self_repetition(const std::vector<TokenSeq>& documents, std::size_t n) {
    if (n == 0) throw Error("n-gram order must be positive");
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < documents.size(); ++i)
        if (documents[i].size() >= n) eligible.push_back(i);
    if (eligible.size() < 2)
        throw Error("self-repetition needs at least 2 documents with >= " + std::to_string(n) + " tokens");

    // Number of distinct documents containing each n-gram.
    std::unordered_map<std::string, std::size_t> doc_freq;
    std::vector<std::vector<std::string>> grams(eligible.size());
    for (std::size_t e = 0; e < eligible.size(); ++e) {
        const auto& toks = documents[eligible[e]];
        auto& g = grams[e];
        g.reserve(toks.size() - n + 1);
        for (std::size_t i = 0; i + n <= toks.size(); ++i) g.push_back(ngram_key(toks, i, n));
        std::unordered_set<std::string_view> distinct(g.begin(), g.end());
        for (auto k : distinct) ++doc_freq[std::string(k)];
    }
    double total = 0.0;
    for (const auto& g : grams) {
        std::size_t shared = 0;
        for (const auto& k : g)
            if (doc_freq[k] >= 2) ++shared;
        total += std::log1p(static_cast<double>(shared));
    }
    return total / static_cast<double>(grams.size());
}

DiversityReport diversity_report(const Corpus& corpus, const Tokenizer& tokenizer, const DiversityOptions& opts) {
    DiversityReport r;
    r.documents = corpus.size();
    r.bytes = corpus.total_bytes();
    r.cr = compression_ratio(corpus, opts.compression);
    r.dr = 1.0 / r.cr;
    if (r.cr < 1.0) r.warnings.push_back("compression ratio below 1: input is effectively incompressible");

    const auto docs = tokenize_all(corpus, tokenizer, opts.threads);
    TokenSeq flat;
    for (const auto& d : docs) flat.insert(flat.end(), d.begin(), d.end());
    r.tokens = flat.size();
    if (flat.empty()) {
        r.warnings.push_back("corpus has no tokens; token metrics skipped");
        return r;
    }
    r.ttr = type_token_ratio(flat);
    r.mattr = mattr(flat, opts.mattr_window);
    for (auto n : opts.ngram_orders) {
        if (flat.size() >= n)
            r.ngram_diversity[n] = ngram_diversity(flat, n);
        else
            r.warnings.push_back("too few tokens for " + std::to_string(n) + "-gram diversity");
    }
    try {
        r.self_repetition = self_repetition(docs, opts.self_repetition_n);
    } catch (const Error& e) {
        r.warnings.push_back(std::string("self-repetition skipped: ") + e.what());
    }
    return r;
}

std::string to_json(const DiversityReport& r) {
    nlohmann::ordered_json j;
    j["documents"] = r.documents;
    j["tokens"] = r.tokens;
    j["bytes"] = r.bytes;
    j["cr"] = r.cr;
    j["dr"] = r.dr;
    j["ttr"] = r.ttr;
    j["mattr"] = r.mattr;
    for (const auto& [n, v] : r.ngram_diversity) j["ngram_diversity_" + std::to_string(n)] = v;
    j["self_repetition"] = r.self_repetition ? nlohmann::ordered_json(*r.self_repetition) : nullptr;
    j["warnings"] = r.warnings;
    return j.dump();
}

std::optional<double> CorrelationMatrix::at(std::string_view a, std::string_view b) const {
    auto ia = std::find(metrics.begin(), metrics.end(), a);
    auto ib = std::find(metrics.begin(), metrics.end(), b);
    if (ia == metrics.end() || ib == metrics.end()) throw Error("unknown metric");
    return values[static_cast<std::size_t>(ia - metrics.begin())][static_cast<std::size_t>(ib - metrics.begin())];
}

CorrelationMatrix metric_correlation_matrix(const std::vector<DiversityReport>& reports) {
    if (reports.size() < 3) throw Error("metric correlation needs at least 3 corpora");
    std::vector<std::pair<std::string, std::vector<double>>> columns;
    auto add = [&](std::string name, auto&& get) {
        std::vector<double> v;
        for (const auto& r : reports) {
            auto x = get(r);
            if (!x) return;  // metric missing for some corpus
            v.push_back(*x);
        }
        columns.emplace_back(std::move(name), std::move(v));
    };
    add("cr", [](const DiversityReport& r) { return std::optional(r.cr); });
    add("dr", [](const DiversityReport& r) { return std::optional(r.dr); });
    add("ttr", [](const DiversityReport& r) { return std::optional(r.ttr); });
    add("mattr", [](const DiversityReport& r) { return std::optional(r.mattr); });
    for (const auto& [n, _] : reports.front().ngram_diversity) {
        add("ngram_diversity_" + std::to_string(n), [n = n](const DiversityReport& r) -> std::optional<double> {
            auto it = r.ngram_diversity.find(n);
            if (it == r.ngram_diversity.end()) return std::nullopt;
            return it->second;
        });
    }
    add("self_repetition", [](const DiversityReport& r) { return r.self_repetition; });

    CorrelationMatrix m;
    const std::size_t k = columns.size();
    std::vector<bool> constant(k);
    for (std::size_t i = 0; i < k; ++i) {
        m.metrics.push_back(columns[i].first);
        const auto& v = columns[i].second;
        constant[i] = std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
        if (constant[i]) m.undefined_metrics.push_back(columns[i].first);
    }
    m.values.assign(k, std::vector<std::optional<double>>(k));
    for (std::size_t i = 0; i < k; ++i) {
        if (constant[i]) continue;
        m.values[i][i] = 1.0;
        for (std::size_t j = i + 1; j < k; ++j) {
            if (constant[j]) continue;
            const double r = pearson(columns[i].second, columns[j].second);
            m.values[i][j] = r;
            m.values[j][i] = r;
        }
    }
    return m;
}

CorrelationMatrix metric_correlation_matrix(const std::vector<Corpus>& corpora, const Tokenizer& tokenizer,
                                            const DiversityOptions& opts) {
    if (corpora.size() < 3) throw Error("metric correlation needs at least 3 corpora");
    std::vector<DiversityReport> reports(corpora.size());
    parallel_for(corpora.size(), opts.threads, [&](std::size_t i) {
        auto o = opts;
        o.threads = 1;
        reports[i] = diversity_report(corpora[i], tokenizer, o);
    });
    return metric_correlation_matrix(reports);
}

}  // namespace qtokens
