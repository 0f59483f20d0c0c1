// qtokens: corpus quality metrics and the effective-token scaling law.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "qtokens/corpus.hpp"
#include "qtokens/csv.hpp"
#include "qtokens/diversity.hpp"
#include "qtokens/error.hpp"
#include "qtokens/external_scorer.hpp"
#include "qtokens/fitting.hpp"
#include "qtokens/fixtures.hpp"
#include "qtokens/refine.hpp"
#include "qtokens/report.hpp"
#include "qtokens/scaling_law.hpp"
#include "qtokens/svg.hpp"
#include "qtokens/syntheticity.hpp"

using namespace qtokens;

namespace {

struct Global {
    std::uint64_t seed = 42;
    unsigned threads = 1;
    std::string tokenizer = "whitespace";
};

struct ScorerArgs {
    std::string spec;  // none | kgram:<reference.jsonl> | external:<endpoint>
    std::size_t kgram_order = 3;
    double smoothing = 1.0;
    double sample_fraction = 0.25;
    std::size_t context_len = 1024;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--scorer", spec,
                        "Teacher scorer: none, kgram:<reference.jsonl> or external:<endpoint> "
                        "(default: $QTOKENS_SCORER if set, else none)");
        cmd->add_option("--kgram-order", kgram_order, "Order k of the built-in k-gram scorer")->capture_default_str();
        cmd->add_option("--smoothing", smoothing, "Add-alpha smoothing of the k-gram scorer")->capture_default_str();
        cmd->add_option("--sample-fraction", sample_fraction, "Fraction of documents scored")->capture_default_str();
        cmd->add_option("--context-len", context_len, "Scoring window in tokens")->capture_default_str();
    }

    std::unique_ptr<LikelihoodScorer> make(const Tokenizer& tok) const {
        std::string s = spec;
        if (s.empty()) {
            const char* env = std::getenv("QTOKENS_SCORER");
            if (env && *env) s = std::string("external:") + env;
        }
        if (s.empty() || s == "none") return nullptr;
        if (s.rfind("kgram:", 0) == 0) {
            const auto ref = load_jsonl(s.substr(6), tok);
            return train_kgram_scorer(ref, tok, kgram_order, smoothing, context_len);
        }
        if (s.rfind("external:", 0) == 0) {
            ExternalScorer::Options o;
            o.context_len = context_len;
            return external_scorer_connect(s.substr(9), o);
        }
        throw Error("unknown scorer '" + s + "' (expected none, kgram:<path> or external:<endpoint>)");
    }
};

std::string num(double v) { return svg::fmt(v, 10); }

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

ScalingConstants load_constants(const std::string& spec) {
    if (spec == "published" || spec == "chinchilla-refit") return ScalingConstants::preset(spec);
    return ScalingConstants::from_json(read_text(spec));
}

void print_warnings(const std::string& source, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << source << ": " << w << "\n";
}

// ---------------------------------------------------------------- score

int cmd_score(const Global& g, const std::vector<std::string>& inputs, const ScorerArgs& sa, std::size_t window,
              int level) {
    const auto tok = Tokenizer::parse(g.tokenizer);
    auto scorer = sa.make(tok);
    DiversityOptions opts;
    opts.mattr_window = window;
    opts.compression.level = level;
    opts.threads = g.threads;

    std::string out = "corpus,documents,tokens,bytes,cr,dr,ttr,mattr";
    for (auto n : opts.ngram_orders) out += ",ngram_diversity_" + std::to_string(n);
    out += ",self_repetition,avg_nll,perplexity,s,seed\n";
    for (const auto& path : inputs) {
        const auto corpus = load_jsonl(path, tok);
        const auto r = diversity_report(corpus, tok, opts);
        print_warnings(path, r.warnings);
        out += csv::escape(path) + "," + std::to_string(r.documents) + "," + std::to_string(r.tokens) + "," +
               std::to_string(r.bytes) + "," + num(r.cr) + "," + num(r.dr) + "," + num(r.ttr) + "," + num(r.mattr);
        for (auto n : opts.ngram_orders) {
            auto it = r.ngram_diversity.find(n);
            out += "," + (it == r.ngram_diversity.end() ? std::string{} : num(it->second));
        }
        out += "," + (r.self_repetition ? num(*r.self_repetition) : std::string{});
        if (scorer) {
            const auto s = score_corpus(*scorer, corpus, tok, {sa.sample_fraction, g.seed});
            out += "," + num(s.avg_nll) + "," + num(s.perplexity) + "," + num(s.s);
        } else {
            out += ",,,";
        }
        out += "," + std::to_string(g.seed) + "\n";
    }
    std::cout << out;
    return 0;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
    std::string experiments;
    std::string quality;
    bool fixture = false;
    std::string form = "F1";
    std::string init;
    int max_evals = 2000;
    int max_iterations = 200;
    std::size_t bootstrap_n = 100;
    bool clamp = false;
    int restarts = 0;
    std::string out;
};

int cmd_fit(const Global& g, const FitArgs& a) {
    std::vector<ExperimentPoint> points;
    if (a.fixture) {
        points = fixtures().points();
    } else {
        if (a.experiments.empty()) throw Error("fit needs --experiments <csv> or --fixture");
        std::vector<QualityRow> quality;
        if (!a.quality.empty()) {
            std::ifstream qin(a.quality);
            if (!qin) throw Error("cannot open " + a.quality);
            quality = parse_quality_csv(qin);
        }
        std::ifstream in(a.experiments);
        if (!in) throw Error("cannot open " + a.experiments);
        points = read_experiments_csv(in, a.quality.empty() ? nullptr : &quality);
    }
    FitOptions o;
    o.form = parse_form(a.form);
    o.max_evals = a.max_evals;
    o.max_iterations = a.max_iterations;
    o.clamp_during_fit = a.clamp;
    o.restarts = a.restarts;
    o.seed = g.seed;
    auto init = a.init.empty() ? ScalingConstants::fit_initial_guess(o.form) : load_constants(a.init);
    init.form = o.form;

    auto rep = fit_constants(points, init, o);
    if (a.bootstrap_n > 0) {
        const auto bs = bootstrap_se(points, rep, a.bootstrap_n, g.seed, o, g.threads);
        rep.se = bs.se;
        rep.bootstrap_resamples = a.bootstrap_n;
        rep.bootstrap_failures = bs.failures;
    }
    write_output(a.out, rep.to_json());
    return 0;
}

// ---------------------------------------------------------------- predict / invert

int cmd_predict(const std::string& constants, const std::string& form, const QualityInputs& in) {
    auto k = load_constants(constants);
    if (!form.empty()) k.form = parse_form(form);
    const double dq = effective_tokens(in, k);
    const double g = predict_accuracy(in, k);
    std::cout << "accuracy,effective_tokens\n" << num(g) << "," << num(dq) << "\n";
    return 0;
}

int cmd_invert(const std::string& constants, double n_millions, double loss) {
    const auto k = load_constants(constants);
    std::cout << num(invert_effective_tokens(k, n_millions, loss)) << "\n";
    return 0;
}

// ---------------------------------------------------------------- select / dedup

nlohmann::ordered_json quality_summary(const Corpus& c, const Tokenizer& tok, LikelihoodScorer* scorer,
                                       const ScorerArgs& sa, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["documents"] = c.size();
    j["tokens"] = c.total_tokens();
    if (c.empty() || c.total_bytes() == 0)
        j["dr"] = nullptr;
    else
        j["dr"] = diversity_score(c);
    if (scorer && !c.empty())
        j["s"] = score_corpus(*scorer, c, tok, {sa.sample_fraction, seed}).s;
    else
        j["s"] = nullptr;
    return j;
}

struct SelectArgs {
    std::string input, target, out, report;
    std::uint64_t budget = 0;
    std::string mode = "topk";
    std::size_t ngram_lo = 1, ngram_hi = 2;
    std::size_t buckets = std::size_t{1} << 16;
    double smoothing = 1.0;
    double temperature = 1.0;
};

int cmd_select(const Global& g, const SelectArgs& a, const ScorerArgs& sa) {
    const auto tok = Tokenizer::parse(g.tokenizer);
    const auto raw = load_jsonl(a.input, tok);
    const auto target = load_jsonl(a.target, tok);
    FeatureOptions fo;
    fo.n_range = {a.ngram_lo, a.ngram_hi};
    fo.n_buckets = a.buckets;
    std::vector<FeatureVector> doc_features(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) doc_features[i] = hashed_ngram_features(raw[i], tok, fo);
    FeatureVector raw_agg;
    raw_agg.buckets.assign(fo.n_buckets, 0);
    for (const auto& f : doc_features) raw_agg.add(f);
    const auto target_agg = aggregate_features(target, tok, fo, g.threads);
    const auto weights = importance_weights(raw_agg, target_agg, doc_features, a.smoothing, a.temperature);
    const auto sel = select_by_weight(raw, weights, a.budget, parse_select_mode(a.mode), g.seed);
    print_warnings("select", sel.warnings);
    write_jsonl(sel.corpus, a.out);
    if (!a.report.empty()) {
        auto scorer = sa.make(tok);
        nlohmann::ordered_json rep;
        rep["command"] = "select";
        rep["mode"] = a.mode;
        rep["budget_tokens"] = a.budget;
        rep["seed"] = g.seed;
        rep["before"] = quality_summary(raw, tok, scorer.get(), sa, g.seed);
        rep["after"] = quality_summary(sel.corpus, tok, scorer.get(), sa, g.seed);
        rep["warnings"] = sel.warnings;
        write_output(a.report, rep.dump(2) + "\n");
    }
    return 0;
}

struct DedupArgs {
    std::string input, out, report;
    std::string mode = "both";
    NearDedupOptions near;
    std::string keep = "longest";
};

int cmd_dedup(const Global& g, DedupArgs a, const ScorerArgs& sa) {
    const auto tok = Tokenizer::parse(g.tokenizer);
    const auto corpus = load_jsonl(a.input, tok);
    if (a.keep == "longest")
        a.near.keep = Representative::longest;
    else if (a.keep == "first")
        a.near.keep = Representative::first;
    else
        throw Error("--keep must be longest or first");
    a.near.seed = g.seed;
    a.near.threads = g.threads;
    Corpus out = corpus;
    if (a.mode == "exact" || a.mode == "both") out = dedup_exact(out);
    if (a.mode == "near" || a.mode == "both") out = dedup_near(out, tok, a.near);
    if (a.mode != "exact" && a.mode != "near" && a.mode != "both") throw Error("--mode must be exact, near or both");
    write_jsonl(out, a.out);
    if (!a.report.empty()) {
        auto scorer = sa.make(tok);
        nlohmann::ordered_json rep;
        rep["command"] = "dedup";
        rep["mode"] = a.mode;
        rep["seed"] = g.seed;
        rep["before"] = quality_summary(corpus, tok, scorer.get(), sa, g.seed);
        rep["after"] = quality_summary(out, tok, scorer.get(), sa, g.seed);
        write_output(a.report, rep.dump(2) + "\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qtokens: data-quality metrics and the effective-token scaling law"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->capture_default_str();
    app.add_option("--tokenizer", g.tokenizer, "whitespace | byte | vocab:<path>")->capture_default_str();

    // score
    auto* score = app.add_subcommand("score", "Diversity (and optionally syntheticity) per JSONL corpus, as CSV");
    std::vector<std::string> score_inputs;
    ScorerArgs score_scorer;
    std::size_t mattr_window = 50;
    int level = 6;
    score->add_option("inputs", score_inputs, "JSONL corpora")->required()->check(CLI::ExistingFile);
    score->add_option("--mattr-window", mattr_window, "MATTR window")->capture_default_str();
    score->add_option("--level", level, "gzip level")->capture_default_str()->check(CLI::Range(0, 9));
    score_scorer.add_to(score);

    // fit
    auto* fit = app.add_subcommand("fit", "Fit scaling-law constants; writes a FitReport JSON");
    FitArgs fa;
    fit->add_option("--experiments", fa.experiments, "Experiments CSV");
    fit->add_option("--quality", fa.quality, "Quality table CSV (data_label,fraction_pct,diversity,syntheticity)");
    fit->add_flag("--fixture", fa.fixture, "Use the embedded 207-run fixture");
    fit->add_option("--form", fa.form, "Effective-token form F1..F4")->capture_default_str();
    fit->add_option("--init", fa.init, "Initial constants: preset name or JSON file (default: published guesses)");
    fit->add_option("--max-evals", fa.max_evals, "Maximum model evaluations")->capture_default_str();
    fit->add_option("--max-iterations", fa.max_iterations, "Maximum LM iterations")->capture_default_str();
    fit->add_option("--bootstrap-n", fa.bootstrap_n, "Bootstrap resamples for standard errors (0 = off)")
        ->capture_default_str();
    fit->add_flag("--clamp", fa.clamp, "Clamp predictions to [0,1] while fitting");
    fit->add_option("--restarts", fa.restarts, "Extra randomized starts")->capture_default_str();
    fit->add_option("-o,--out", fa.out, "Output path (default stdout)");

    // predict
    auto* predict = app.add_subcommand("predict", "Predict accuracy and effective tokens");
    std::string constants = "published", form;
    QualityInputs qin;
    predict->add_option("--constants", constants, "Preset (published, chinchilla-refit) or JSON file")
        ->capture_default_str();
    predict->add_option("--form", form, "Override the functional form");
    predict->add_option("--n-millions", qin.n_millions, "Model size in millions of parameters")->required();
    predict->add_option("--d-tokens", qin.d, "Training tokens")->required();
    predict->add_option("--dr", qin.dr, "Diversity Dr")->required();
    predict->add_option("--s", qin.s, "Syntheticity S")->required();

    // invert
    auto* invert = app.add_subcommand("invert", "Effective tokens needed to reach a score at a model size");
    std::string inv_constants = "published";
    double inv_n = 0.0, inv_loss = 0.0;
    invert->add_option("--constants", inv_constants, "Preset or JSON file")->capture_default_str();
    invert->add_option("--n-millions", inv_n, "Model size in millions of parameters")->required();
    invert->add_option("--loss", inv_loss, "Target (unclamped) score")->required();

    // select
    auto* select = app.add_subcommand("select", "Importance-sampling selection against a target corpus");
    SelectArgs sel;
    ScorerArgs sel_scorer;
    select->add_option("--input", sel.input, "Raw JSONL corpus")->required()->check(CLI::ExistingFile);
    select->add_option("--target", sel.target, "Target JSONL corpus")->required()->check(CLI::ExistingFile);
    select->add_option("--budget", sel.budget, "Token budget")->required();
    select->add_option("--mode", sel.mode, "topk | gumbel-sample")->capture_default_str();
    select->add_option("--out", sel.out, "Output JSONL")->required();
    select->add_option("--report", sel.report, "Sidecar JSON report");
    select->add_option("--ngram-lo", sel.ngram_lo, "Smallest n-gram order")->capture_default_str();
    select->add_option("--ngram-hi", sel.ngram_hi, "Largest n-gram order")->capture_default_str();
    select->add_option("--buckets", sel.buckets, "Feature hash buckets")->capture_default_str();
    select->add_option("--feature-smoothing", sel.smoothing, "Feature distribution smoothing")->capture_default_str();
    select->add_option("--temperature", sel.temperature, "Importance weight temperature")->capture_default_str();
    sel_scorer.add_to(select);

    // dedup
    auto* dedup = app.add_subcommand("dedup", "Exact and MinHash-LSH near-duplicate removal");
    DedupArgs da;
    ScorerArgs dd_scorer;
    dedup->add_option("--input", da.input, "Input JSONL")->required()->check(CLI::ExistingFile);
    dedup->add_option("--out", da.out, "Output JSONL")->required();
    dedup->add_option("--report", da.report, "Sidecar JSON report");
    dedup->add_option("--mode", da.mode, "exact | near | both")->capture_default_str();
    dedup->add_option("--shingle", da.near.shingle_n, "Shingle size in tokens")->capture_default_str();
    dedup->add_option("--hashes", da.near.n_hashes, "MinHash permutations")->capture_default_str();
    dedup->add_option("--bands", da.near.bands, "LSH bands")->capture_default_str();
    dedup->add_option("--keep", da.keep, "Cluster representative: longest | first")->capture_default_str();
    dd_scorer.add_to(dedup);

    // report
    auto* report = app.add_subcommand("report", "Render SVG/CSV figures from a FitReport");
    std::string report_in, out_dir;
    report->add_option("--fit", report_in, "FitReport JSON")->required()->check(CLI::ExistingFile);
    report->add_option("--out-dir", out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);
    if (g.threads == 0) g.threads = std::max(1u, std::thread::hardware_concurrency());

    try {
        if (*score) return cmd_score(g, score_inputs, score_scorer, mattr_window, level);
        if (*fit) return cmd_fit(g, fa);
        if (*predict) return cmd_predict(constants, form, qin);
        if (*invert) return cmd_invert(inv_constants, inv_n, inv_loss);
        if (*select) return cmd_select(g, sel, sel_scorer);
        if (*dedup) return cmd_dedup(g, da, dd_scorer);
        if (*report) {
            const auto files = write_report(FitReport::from_json(read_text(report_in)), out_dir);
            std::cout << files.pred_vs_true.string() << "\n"
                      << files.acc_vs_dq.string() << "\n"
                      << files.q_surface.string() << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
