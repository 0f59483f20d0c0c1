#include "qtokens/syntheticity.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "qtokens/error.hpp"

namespace qtokens {

namespace {
constexpr std::uint32_t kBeginId = 0;
constexpr std::uint32_t kUnknownId = 1;
}  // namespace

LikelihoodScorer::LikelihoodScorer(std::size_t context_len) { set_context_len(context_len); }

void LikelihoodScorer::set_context_len(std::size_t n) {
    if (n == 0) throw Error("context length must be positive");
    context_len_ = n;
}

UniformScorer::UniformScorer(std::uint64_t vocab_size, std::size_t context_len)
    : LikelihoodScorer(context_len) {
    if (vocab_size == 0) throw Error("uniform scorer needs a non-empty vocabulary");
    logp_ = -std::log(static_cast<double>(vocab_size));
}

std::vector<std::vector<double>> UniformScorer::score(const std::vector<ScoreRequest>& batch) {
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto& r : batch) out.emplace_back(r.tokens.size(), logp_);
    return out;
}

KGramScorer::KGramScorer(const std::vector<TokenSeq>& reference, std::size_t k, double smoothing,
                         std::size_t context_len)
    : LikelihoodScorer(context_len), k_(k), alpha_(smoothing) {
    if (k == 0) throw Error("k-gram order must be at least 1");
    if (!(smoothing > 0.0) || !std::isfinite(smoothing)) throw Error("smoothing must be positive");
    std::size_t longest = 0;
    for (const auto& doc : reference) longest = std::max(longest, doc.size());
    if (reference.empty() || longest == 0) throw Error("reference corpus is empty");
    if (k > longest)
        throw Error("k=" + std::to_string(k) + " exceeds the longest reference document (" +
                    std::to_string(longest) + " tokens)");

    for (const auto& doc : reference)
        for (const auto& t : doc) vocab_.try_emplace(t, static_cast<std::uint32_t>(vocab_.size() + 2));

    std::vector<std::uint32_t> ids;
    for (const auto& doc : reference) {
        ids.assign(k_ - 1, kBeginId);
        for (const auto& t : doc) ids.push_back(vocab_.at(t));
        for (std::size_t i = k_ - 1; i < ids.size(); ++i) {
            std::string ctx = context_key(ids, i);
            ++context_counts_[ctx];
            ctx.append(reinterpret_cast<const char*>(&ids[i]), sizeof(std::uint32_t));
            ++joint_counts_[ctx];
        }
    }
}

std::uint32_t KGramScorer::id_of(const std::string& token) const {
    auto it = vocab_.find(token);
    return it == vocab_.end() ? kUnknownId : it->second;
}

// Packs ids[end-k+1, end) as raw bytes.
std::string KGramScorer::context_key(std::span<const std::uint32_t> ids, std::size_t end) const {
    std::string key(sizeof(std::uint32_t) * (k_ - 1), '\0');
    std::memcpy(key.data(), ids.data() + (end - (k_ - 1)), key.size());
    return key;
}

std::vector<std::string> KGramScorer::vocabulary() const {
    std::vector<std::string> v(vocab_.size() + 1);
    v[0] = std::string(kUnknown);
    for (const auto& [tok, id] : vocab_) v[id - 1] = tok;
    return v;
}

double KGramScorer::log_probability(std::span<const std::string> context, const std::string& word) const {
    std::vector<std::uint32_t> ids(k_ - 1, kBeginId);
    const std::size_t take = std::min(context.size(), k_ - 1);
    for (std::size_t i = 0; i < take; ++i) ids[k_ - 1 - take + i] = id_of(context[context.size() - take + i]);
    ids.push_back(id_of(word));

    std::string key = context_key(ids, k_ - 1);
    auto c = context_counts_.find(key);
    const double ctx_count = c == context_counts_.end() ? 0.0 : static_cast<double>(c->second);
    key.append(reinterpret_cast<const char*>(&ids.back()), sizeof(std::uint32_t));
    auto j = joint_counts_.find(key);
    const double joint = j == joint_counts_.end() ? 0.0 : static_cast<double>(j->second);
    const double v = static_cast<double>(vocabulary_size());
    return std::log(joint + alpha_) - std::log(ctx_count + alpha_ * v);
}

double KGramScorer::probability(std::span<const std::string> context, const std::string& word) const {
    return std::exp(log_probability(context, word));
}

std::vector<std::vector<double>> KGramScorer::score(const std::vector<ScoreRequest>& batch) {
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto& r : batch) {
        std::vector<double> lp;
        lp.reserve(r.tokens.size());
        std::span<const std::string> toks(r.tokens);
        for (std::size_t i = 0; i < toks.size(); ++i) lp.push_back(log_probability(toks.first(i), toks[i]));
        out.push_back(std::move(lp));
    }
    return out;
}

std::unique_ptr<KGramScorer> train_kgram_scorer(const Corpus& reference, const Tokenizer& tokenizer, std::size_t k,
                                                double smoothing, std::size_t context_len) {
    if (reference.empty()) throw Error("reference corpus is empty");
    return std::make_unique<KGramScorer>(tokenize_all(reference, tokenizer), k, smoothing, context_len);
}

SyntheticityResult result_from_nll(double total_nll, std::uint64_t m_tokens) {
    if (m_tokens == 0) throw Error("corpus has no scoreable tokens");
    SyntheticityResult r;
    r.m_tokens = m_tokens;
    r.avg_nll = total_nll / static_cast<double>(m_tokens);
    if (r.avg_nll < 0.0) r.avg_nll = 0.0;  // only reachable through rounding of log(1)
    r.perplexity = std::exp(r.avg_nll);
    r.s = 1.0 / r.perplexity;
    return r;
}

SyntheticityResult score_corpus(LikelihoodScorer& scorer, const Corpus& corpus, const Tokenizer& tokenizer,
                                const ScoreOptions& opts) {
    if (corpus.empty()) throw Error("cannot score an empty corpus");
    const Corpus sampled = sample_fraction(corpus, opts.sample_fraction, opts.seed);
    std::vector<const Document*> order;
    order.reserve(sampled.size());
    for (const auto& d : sampled) order.push_back(&d);
    std::sort(order.begin(), order.end(), [](const Document* a, const Document* b) { return a->id < b->id; });

    const std::size_t window = scorer.context_len();
    long double total_nll = 0.0L;
    std::uint64_t m = 0;
    for (const Document* doc : order) {
        const TokenSeq tokens = tokenizer.tokenize(doc->text);
        if (tokens.empty()) continue;
        std::vector<ScoreRequest> batch;
        for (std::size_t start = 0, w = 0; start < tokens.size(); start += window, ++w) {
            const std::size_t end = std::min(tokens.size(), start + window);
            batch.push_back({doc->id + "#" + std::to_string(w),
                             TokenSeq(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(end))});
        }
        std::vector<std::vector<double>> logprobs;
        try {
            logprobs = scorer.score(batch);
        } catch (const std::exception& e) {
            throw Error("scoring document '" + doc->id + "' failed: " + e.what());
        }
        if (logprobs.size() != batch.size())
            throw Error("scoring document '" + doc->id + "' failed: scorer returned " +
                        std::to_string(logprobs.size()) + " results for " + std::to_string(batch.size()) +
                        " windows");
        for (std::size_t b = 0; b < batch.size(); ++b) {
            if (logprobs[b].size() != batch[b].tokens.size())
                throw Error("scoring document '" + doc->id + "' failed: length mismatch in window " + batch[b].id);
            for (double lp : logprobs[b]) {
                if (!std::isfinite(lp) || lp > 0.0)
                    throw Error("scoring document '" + doc->id + "' failed: invalid log-probability " +
                                std::to_string(lp));
                total_nll -= lp;
            }
            m += logprobs[b].size();
        }
    }
    auto r = result_from_nll(static_cast<double>(total_nll), m);
    r.documents_scored = order.size();
    r.sample_fraction = opts.sample_fraction;
    return r;
}

std::string to_json(const SyntheticityResult& r) {
    nlohmann::ordered_json j{{"avg_nll", r.avg_nll},       {"perplexity", r.perplexity},
                             {"s", r.s},                   {"m_tokens", r.m_tokens},
                             {"documents_scored", r.documents_scored}, {"sample_fraction", r.sample_fraction}};
    return j.dump();
}

}  // namespace qtokens
