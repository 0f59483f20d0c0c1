#include "qtokens/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "qtokens/error.hpp"
#include "qtokens/hash.hpp"
#include "qtokens/parallel.hpp"

namespace qtokens {

Document make_document(std::string id, std::string text, const Tokenizer& tokenizer) {
    Document d;
    d.id = std::move(id);
    d.byte_len = text.size();
    d.token_count = tokenizer.count(text);
    d.text = std::move(text);
    return d;
}

Corpus::Corpus(std::vector<Document> documents) : docs_(std::move(documents)) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(docs_.size());
    for (const auto& d : docs_) {
        if (!seen.insert(d.id).second) throw Error("duplicate document id: " + d.id);
        total_tokens_ += d.token_count;
    }
}

Corpus Corpus::from_texts(const std::vector<std::string>& texts, const Tokenizer& tokenizer,
                          const std::string& id_prefix) {
    std::vector<Document> docs;
    docs.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i)
        docs.push_back(make_document(id_prefix + std::to_string(i), texts[i], tokenizer));
    return Corpus(std::move(docs));
}

std::uint64_t Corpus::total_bytes() const {
    std::uint64_t n = 0;
    for (const auto& d : docs_) n += d.byte_len;
    return n;
}

namespace {

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; });
}

Document parse_line(const std::string& line, std::size_t line_no, const std::string& source,
                    const Tokenizer& tokenizer) {
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw Error(where + ": expected a JSON object");
    auto text = obj.find("text");
    if (text == obj.end()) throw Error(where + ": missing field text");
    if (!text->is_string()) throw Error(where + ": field text is not a string");
    std::string id;
    if (auto it = obj.find("id"); it != obj.end() && !it->is_null()) {
        if (it->is_string())
            id = it->get<std::string>();
        else if (it->is_number_integer())
            id = std::to_string(it->get<long long>());
        else
            throw Error(where + ": field id must be a string");
    } else {
        id = source + ":" + std::to_string(line_no);
    }
    return make_document(std::move(id), text->get<std::string>(), tokenizer);
}

void stream_lines(std::istream& in, const std::string& source, const Tokenizer& tokenizer,
                  const std::function<void(Document&&)>& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        fn(parse_line(line, line_no, source, tokenizer));
    }
}

}  // namespace

void for_each_jsonl(const std::filesystem::path& path, const Tokenizer& tokenizer,
                    const std::function<void(Document&&)>& fn) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    stream_lines(in, path.filename().string(), tokenizer, fn);
}

Corpus parse_jsonl(std::istream& in, const std::string& source_name, const Tokenizer& tokenizer) {
    std::vector<Document> docs;
    stream_lines(in, source_name, tokenizer, [&](Document&& d) { docs.push_back(std::move(d)); });
    return Corpus(std::move(docs));
}

Corpus load_jsonl(const std::filesystem::path& path, const Tokenizer& tokenizer) {
    std::vector<Document> docs;
    for_each_jsonl(path, tokenizer, [&](Document&& d) { docs.push_back(std::move(d)); });
    return Corpus(std::move(docs));
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
    for (const auto& d : corpus) {
        nlohmann::json obj{{"id", d.id}, {"text", d.text}};
        out << obj.dump() << '\n';
    }
}

void write_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_jsonl(corpus, out);
    if (!out) throw Error("write failed: " + path.string());
}

double sampling_key(const std::string& doc_id, std::uint64_t seed) {
    return unit_interval(hash_string(doc_id, seed));
}

Corpus sample_fraction(const Corpus& corpus, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw Error("sample fraction must lie in (0, 1], got " + std::to_string(fraction));
    const std::size_t n = corpus.size();
    const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
    if (keep >= n) return corpus;

    std::vector<std::pair<std::uint64_t, std::size_t>> keyed(n);
    for (std::size_t i = 0; i < n; ++i) keyed[i] = {hash_string(corpus[i].id, seed), i};
    std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(keep), keyed.end());
    std::vector<std::size_t> chosen(keep);
    for (std::size_t i = 0; i < keep; ++i) chosen[i] = keyed[i].second;
    std::sort(chosen.begin(), chosen.end());

    std::vector<Document> out;
    out.reserve(keep);
    for (auto i : chosen) out.push_back(corpus[i]);
    return Corpus(std::move(out));
}

std::vector<Corpus> shard(const Corpus& corpus, std::size_t n_shards) {
    if (n_shards == 0) throw Error("n_shards must be at least 1");
    std::vector<std::vector<Document>> parts(n_shards);
    for (std::size_t i = 0; i < corpus.size(); ++i) parts[i % n_shards].push_back(corpus[i]);
    std::vector<Corpus> out;
    out.reserve(n_shards);
    for (auto& p : parts) out.emplace_back(std::move(p));
    return out;
}

std::uint64_t count_tokens(const Corpus& corpus, const Tokenizer& tokenizer) {
    std::uint64_t total = 0;
    for (const auto& d : corpus) total += tokenizer.count(d.text);
    return total;
}

std::vector<TokenSeq> tokenize_all(const Corpus& corpus, const Tokenizer& tokenizer, unsigned threads) {
    std::vector<TokenSeq> out(corpus.size());
    parallel_for(corpus.size(), threads, [&](std::size_t i) { out[i] = tokenizer.tokenize(corpus[i].text); });
    return out;
}

}  // namespace qtokens
