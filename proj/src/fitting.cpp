#include "qtokens/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "qtokens/csv.hpp"
#include "qtokens/error.hpp"
#include "qtokens/hash.hpp"
#include "qtokens/parallel.hpp"

namespace qtokens {

using Params = ScalingConstants::Vector;
constexpr std::size_t kP = ScalingConstants::kParams;

void validate(const ExperimentPoint& p) {
    auto bad = [&](const std::string& what) {
        return Error("invalid experiment point (" + p.label + ", " + std::to_string(p.fraction_pct) + "%, " +
                     std::to_string(p.n_millions) + "M): " + what);
    };
    if (!(p.n_millions > 0.0) || !std::isfinite(p.n_millions)) throw bad("model size must be positive");
    if (!(p.d_tokens > 0.0) || !std::isfinite(p.d_tokens)) throw bad("token count must be positive");
    if (!(p.dr > 0.0) || !std::isfinite(p.dr)) throw bad("diversity must be positive");
    if (!(p.s > 0.0) || !std::isfinite(p.s)) throw bad("syntheticity must be positive");
    if (!(p.accuracy >= 0.0 && p.accuracy <= 1.0)) throw bad("accuracy must lie in [0, 1]");
}

// ---------------------------------------------------------------- tables

std::vector<ExperimentPoint> join_fixture_tables(const std::vector<ResultRow>& results,
                                                 const std::vector<QualityRow>& quality) {
    std::map<std::pair<std::string, int>, const QualityRow*> index;
    for (const auto& q : quality) {
        if (!index.emplace(std::pair{q.label, q.fraction_pct}, &q).second)
            throw Error("duplicate quality row for (" + q.label + ", " + std::to_string(q.fraction_pct) + "%)");
    }
    std::vector<ExperimentPoint> out;
    std::vector<std::string> missing;
    out.reserve(results.size());
    for (const auto& r : results) {
        auto it = index.find({r.label, r.fraction_pct});
        if (it == index.end()) {
            missing.push_back("(" + r.label + ", " + std::to_string(r.fraction_pct) + "%)");
            continue;
        }
        ExperimentPoint p;
        p.n_millions = r.model_size_m;
        p.d_tokens = r.n_tokens;
        p.dr = it->second->diversity;
        p.s = it->second->syntheticity;
        p.accuracy = r.accuracy_pct / 100.0;
        p.train_loss = r.train_loss;
        p.eval_loss = r.eval_loss;
        p.label = r.label;
        p.fraction_pct = r.fraction_pct;
        out.push_back(std::move(p));
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        std::string msg = "no quality row for key(s):";
        for (const auto& m : missing) msg += " " + m;
        throw Error(msg);
    }
    return out;
}

std::vector<QualityRow> parse_quality_csv(std::istream& in) {
    csv::Table t(in);
    std::vector<QualityRow> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        QualityRow q;
        q.label = t.text(r, "data_label");
        q.fraction_pct = static_cast<int>(t.integer(r, "fraction_pct"));
        q.diversity = t.number(r, "diversity");
        q.syntheticity = t.number(r, "syntheticity");
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<ResultRow> parse_results_csv(std::istream& in) {
    csv::Table t(in);
    std::vector<ResultRow> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        ResultRow row;
        row.model_size_m = t.number(r, "model_size_m");
        row.label = t.text(r, "data_label");
        row.fraction_pct = static_cast<int>(t.integer(r, "fraction_pct"));
        row.n_tokens = t.number(r, "n_tokens");
        row.train_loss = t.optional_number(r, "train_loss");
        row.eval_loss = t.optional_number(r, "eval_loss");
        row.accuracy_pct = t.number(r, "accuracy_pct");
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<ExperimentPoint> read_experiments_csv(std::istream& in, const std::vector<QualityRow>* quality) {
    csv::Table t(in);
    std::map<std::pair<std::string, int>, const QualityRow*> index;
    if (quality)
        for (const auto& q : *quality) index[{q.label, q.fraction_pct}] = &q;

    std::vector<ExperimentPoint> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        ExperimentPoint p;
        p.n_millions = t.number(r, "model_size_m");
        p.label = t.text(r, "data_label");
        p.fraction_pct = static_cast<int>(t.integer(r, "fraction_pct"));
        p.d_tokens = t.number(r, "n_tokens");
        p.train_loss = t.optional_number(r, "train_loss");
        p.eval_loss = t.optional_number(r, "eval_loss");
        p.accuracy = t.number(r, "accuracy_pct") / 100.0;
        auto dr = t.optional_number(r, "diversity");
        auto s = t.optional_number(r, "syntheticity");
        if (!dr || !s) {
            auto it = index.find({p.label, p.fraction_pct});
            if (it == index.end())
                throw Error("row " + std::to_string(r + 1) + ": no diversity/syntheticity for (" + p.label + ", " +
                            std::to_string(p.fraction_pct) + "%)");
            if (!dr) dr = it->second->diversity;
            if (!s) s = it->second->syntheticity;
        }
        p.dr = *dr;
        p.s = *s;
        try {
            validate(p);
        } catch (const Error& e) {
            throw Error("row " + std::to_string(r + 1) + ": " + e.what());
        }
        out.push_back(std::move(p));
    }
    return out;
}

void write_experiments_csv(const std::vector<ExperimentPoint>& points, std::ostream& out) {
    out << "model_size_m,data_label,fraction_pct,n_tokens,train_loss,eval_loss,accuracy_pct,diversity,syntheticity\n";
    auto opt = [](const std::optional<double>& v) {
        if (!v) return std::string{};
        std::ostringstream s;
        s.precision(17);
        s << *v;
        return s.str();
    };
    std::ostringstream line;
    line.precision(17);
    for (const auto& p : points) {
        line.str({});
        line << p.n_millions << ',' << csv::escape(p.label) << ',' << p.fraction_pct << ',' << p.d_tokens << ','
             << opt(p.train_loss) << ',' << opt(p.eval_loss) << ',' << p.accuracy * 100.0 << ',' << p.dr << ','
             << p.s << '\n';
        out << line.str();
    }
}

// ---------------------------------------------------------------- fitting

double fit_prediction(const ExperimentPoint& p, const ScalingConstants& k, bool clamp) {
    return clamp ? predict_accuracy(p.inputs(), k) : predict_unclamped(p.inputs(), k);
}

namespace {

struct Problem {
    const std::vector<ExperimentPoint>& points;
    DqForm form;
    bool clamp;

    // Residuals predicted - observed; false if any is non-finite.
    bool residuals(const Params& p, Eigen::VectorXd& r) const {
        const auto k = ScalingConstants::from_vector(p, form);
        r.resize(static_cast<Eigen::Index>(points.size()));
        for (std::size_t i = 0; i < points.size(); ++i) {
            double v;
            try {
                v = fit_prediction(points[i], k, clamp);
            } catch (const Error&) {
                return false;
            }
            if (!std::isfinite(v)) return false;
            r[static_cast<Eigen::Index>(i)] = v - points[i].accuracy;
        }
        return true;
    }
};

struct LmResult {
    Params params{};
    double sse = 0.0;
    double initial_sse = 0.0;
    int evals = 0;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
};

Params add(const Params& p, const Eigen::VectorXd& delta) {
    Params out = p;
    for (std::size_t j = 0; j < kP; ++j) out[j] += delta[static_cast<Eigen::Index>(j)];
    return out;
}

// Forward differences; falls back to a backward step when the forward point
// is not finite, and to a zero column when neither is.
void jacobian(const Problem& prob, const Params& p, const Eigen::VectorXd& r, double step, Eigen::MatrixXd& jac,
              int& evals) {
    Eigen::VectorXd r_step(r.size());
    for (std::size_t j = 0; j < kP; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        const double h = step * (p[j] != 0.0 ? std::abs(p[j]) : 1.0);
        Params q = p;
        q[j] = p[j] + h;
        ++evals;
        if (prob.residuals(q, r_step)) {
            jac.col(col) = (r_step - r) / h;
            continue;
        }
        q[j] = p[j] - h;
        ++evals;
        if (prob.residuals(q, r_step))
            jac.col(col) = (r - r_step) / h;
        else
            jac.col(col).setZero();
    }
}

// Solves min ||J d + r||^2 + lambda ||D d||^2 through the stacked system,
// which avoids squaring the condition number of J.
Eigen::VectorXd damped_step(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r, const Eigen::VectorXd& scale,
                            double lambda) {
    if (lambda == 0.0) return jac.completeOrthogonalDecomposition().solve(-r);
    const auto m = jac.rows();
    const auto n = jac.cols();
    Eigen::MatrixXd aug(m + n, n);
    aug.topRows(m) = jac;
    aug.bottomRows(n) = (std::sqrt(lambda) * scale).asDiagonal();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + n);
    rhs.head(m) = -r;
    return aug.colPivHouseholderQr().solve(rhs);
}

LmResult levenberg_marquardt(const Problem& prob, const Params& init, const FitOptions& opts) {
    LmResult out;
    const auto m = static_cast<Eigen::Index>(prob.points.size());
    Eigen::VectorXd r(m), r_trial(m);
    Params p = init;
    ++out.evals;
    if (!prob.residuals(p, r)) throw Error("model is not finite at the initial guess");
    double sse = r.squaredNorm();
    out.initial_sse = sse;
    Eigen::MatrixXd jac(m, static_cast<Eigen::Index>(kP));
    Eigen::VectorXd scale = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kP));
    double radius = -1.0;
    double lambda = opts.initial_damping;

    auto finish = [&](bool converged, const char* why) {
        out.converged = converged;
        out.stop_reason = why;
    };

    while (true) {
        if (sse == 0.0) {
            finish(true, "exact fit");
            break;
        }
        if (out.iterations >= opts.max_iterations) {
            finish(false, "max_iterations reached");
            break;
        }
        if (out.evals + static_cast<int>(kP) + 1 > opts.max_evals) {
            finish(false, "max_evals reached");
            break;
        }
        ++out.iterations;
        jacobian(prob, p, r, opts.fd_step, jac, out.evals);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r;

        // Column scaling: running maximum of Jacobian column norms.
        for (Eigen::Index j = 0; j < scale.size(); ++j) {
            scale[j] = std::max(scale[j], std::sqrt(jtj(j, j)));
            if (!(scale[j] > 0.0)) scale[j] = 1.0;
        }
        if (radius < 0.0) {
            double norm = 0.0;
            for (std::size_t j = 0; j < kP; ++j) norm += std::pow(scale[static_cast<Eigen::Index>(j)] * p[j], 2);
            radius = norm > 0.0 ? opts.step_bound * std::sqrt(norm) : opts.step_bound;
        }

        bool accepted = false;
        bool stop = false;
        double improvement = 1.0;
        while (!accepted) {
            if (out.evals >= opts.max_evals) {
                finish(false, "max_evals reached");
                stop = true;
                break;
            }
            Eigen::VectorXd delta;
            if (opts.damping == Damping::multiplicative) {
                if (lambda > 1e16) {
                    finish(true, "no further decrease (damping saturated)");
                    stop = true;
                    break;
                }
                delta = damped_step(jac, r, scale, lambda);
            } else {
                if (radius < 1e-30) {
                    finish(true, "no further decrease (trust region collapsed)");
                    stop = true;
                    break;
                }
                auto scaled_norm = [&](const Eigen::VectorXd& d) { return scale.cwiseProduct(d).norm(); };
                delta = damped_step(jac, r, scale, 0.0);
                if (!(scaled_norm(delta) <= 1.1 * radius)) {
                    // Bisect (geometrically) for the damping that puts the
                    // scaled step on the trust radius.
                    double lo = 0.0, hi = 1.0;
                    for (int k = 0; k < 400 && scaled_norm(damped_step(jac, r, scale, hi)) > radius; ++k) hi *= 10.0;
                    for (int k = 0; k < 60; ++k) {
                        const double mid = lo > 0.0 ? std::sqrt(lo * hi) : hi * 1e-6;
                        if (scaled_norm(damped_step(jac, r, scale, mid)) > radius)
                            lo = mid;
                        else
                            hi = mid;
                        if (lo > 0.0 && hi / lo < 1.01) break;
                    }
                    delta = damped_step(jac, r, scale, hi);
                }
            }
            if (!delta.allFinite()) {
                lambda *= 10.0;
                radius *= 0.5;
                continue;
            }
            const Params trial = add(p, delta);
            ++out.evals;
            const bool finite = prob.residuals(trial, r_trial);
            const double new_sse = finite ? r_trial.squaredNorm() : INFINITY;

            bool take;
            if (opts.damping == Damping::multiplicative) {
                take = new_sse < sse;
                lambda = take ? std::max(lambda / 10.0, 1e-300) : lambda * 10.0;
            } else {
                const double predicted = -(2.0 * grad.dot(delta) + delta.dot(jtj * delta));
                const double rho = predicted > 0.0 ? (sse - new_sse) / predicted : -1.0;
                const double step_norm = scale.cwiseProduct(delta).norm();
                if (rho < 0.25)
                    radius = 0.5 * std::min(radius, step_norm);
                else if (rho > 0.75)
                    radius = std::max(radius, 2.0 * step_norm);
                take = rho > 1e-4 && new_sse < sse;
            }
            if (!take) continue;
            improvement = (sse - new_sse) / sse;
            p = trial;
            r = r_trial;
            sse = new_sse;
            accepted = true;
        }
        if (stop) break;
        if (improvement < opts.rel_tolerance) {
            finish(true, "relative SSE improvement below tolerance");
            break;
        }
    }
    out.params = p;
    out.sse = sse;
    return out;
}

}  // namespace

FitReport fit_constants(const std::vector<ExperimentPoint>& points, const ScalingConstants& init,
                        const FitOptions& opts) {
    if (points.size() < kP + 1)
        throw Error("need at least " + std::to_string(kP + 1) + " points to fit " + std::to_string(kP) +
                    " constants, got " + std::to_string(points.size()));
    for (const auto& p : points) validate(p);
    const auto init_vec = init.to_vector();
    for (double v : init_vec)
        if (!std::isfinite(v)) throw Error("initial guess must be finite");
    if (opts.max_evals < 1 || opts.max_iterations < 0) throw Error("invalid iteration caps");

    const Problem prob{points, opts.form, opts.clamp_during_fit};
    LmResult best = levenberg_marquardt(prob, init_vec, opts);
    int total_evals = best.evals;
    SplitMix rng(splitmix64(opts.seed ^ 0x7265737461727473ULL));
    for (int restart = 0; restart < opts.restarts; ++restart) {
        Params start = init_vec;
        for (auto& v : start) v *= 0.5 + rng.uniform();  // factor in [0.5, 1.5)
        try {
            LmResult trial = levenberg_marquardt(prob, start, opts);
            total_evals += trial.evals;
            if (trial.sse < best.sse) {
                trial.initial_sse = best.initial_sse;
                best = trial;
            }
        } catch (const Error&) {
            // non-finite start; skip it
        }
    }

    FitReport rep;
    rep.constants = ScalingConstants::from_vector(best.params, opts.form);
    rep.sse = best.sse;
    rep.initial_sse = best.initial_sse;
    rep.n_points = points.size();
    rep.n_evals = total_evals;
    rep.n_iterations = best.iterations;
    rep.converged = best.converged;
    rep.stop_reason = best.stop_reason;
    rep.clamp_during_fit = opts.clamp_during_fit;
    rep.seed = opts.seed;
    rep.points = points;

    std::vector<double> predicted, observed;
    double sse = 0.0;
    for (const auto& p : points) {
        PointFit f;
        f.predicted = fit_prediction(p, rep.constants, opts.clamp_during_fit);
        f.residual = f.predicted - p.accuracy;
        f.d_q = effective_tokens(p.inputs(), rep.constants);
        sse += f.residual * f.residual;
        predicted.push_back(f.predicted);
        observed.push_back(p.accuracy);
        rep.residuals.push_back(f.residual);
        rep.point_fits.push_back(f);
    }
    rep.sse = sse;
    try {
        rep.r2 = r_squared(predicted, observed);
    } catch (const Error&) {
        rep.r2 = std::numeric_limits<double>::quiet_NaN();
    }
    try {
        rep.pearson = pearson(predicted, observed);
    } catch (const Error&) {
        rep.pearson.reset();
    }
    return rep;
}

std::vector<std::size_t> bootstrap_indices(std::size_t n_points, std::uint64_t seed, std::size_t b) {
    SplitMix rng(splitmix64(seed) ^ splitmix64(0xb0075ULL + b));
    std::vector<std::size_t> idx(n_points);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n_points));
    return idx;
}

BootstrapResult bootstrap_se(const std::vector<ExperimentPoint>& points, const FitReport& base,
                             std::size_t n_resamples, std::uint64_t seed, const FitOptions& opts, unsigned threads) {
    if (n_resamples < 2) throw Error("bootstrap needs at least 2 resamples");
    if (points.empty()) throw Error("bootstrap needs points");
    std::vector<std::optional<Params>> fits(n_resamples);
    FitOptions o = opts;
    o.form = base.constants.form;
    o.restarts = 0;
    parallel_for(n_resamples, threads, [&](std::size_t b) {
        const auto idx = bootstrap_indices(points.size(), seed, b);
        std::vector<ExperimentPoint> sample;
        sample.reserve(idx.size());
        for (auto i : idx) sample.push_back(points[i]);
        try {
            const auto rep = fit_constants(sample, base.constants, o);
            const auto v = rep.constants.to_vector();
            if (std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }) && std::isfinite(rep.sse))
                fits[b] = v;
        } catch (const Error&) {
        }
    });

    BootstrapResult res;
    for (const auto& f : fits) (f ? res.successes : res.failures)++;
    if (res.failures * 2 > n_resamples)
        throw Error("bootstrap failed: " + std::to_string(res.failures) + " of " + std::to_string(n_resamples) +
                    " resample fits did not converge to a finite point");
    for (std::size_t j = 0; j < kP; ++j) {
        std::vector<double> col;
        for (const auto& f : fits)
            if (f) col.push_back((*f)[j]);
        res.se[j] = sample_stddev(col);
    }
    return res;
}

// ---------------------------------------------------------------- JSON

namespace {

nlohmann::ordered_json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? number_or_null(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

}  // namespace

std::string FitReport::to_json() const {
    nlohmann::ordered_json j;
    j["constants"] = nlohmann::ordered_json::parse(constants.to_json());
    if (se) {
        nlohmann::ordered_json s;
        for (std::size_t i = 0; i < kP; ++i) s[std::string(ScalingConstants::kNames[i])] = (*se)[i];
        j["se"] = s;
    } else {
        j["se"] = nullptr;
    }
    j["bootstrap_resamples"] = bootstrap_resamples;
    j["bootstrap_failures"] = bootstrap_failures;
    j["r2"] = number_or_null(r2);
    j["pearson"] = optional_json(pearson);
    j["sse"] = sse;
    j["initial_sse"] = initial_sse;
    j["n_points"] = n_points;
    j["n_evals"] = n_evals;
    j["n_iterations"] = n_iterations;
    j["converged"] = converged;
    j["stop_reason"] = stop_reason;
    j["clamp_during_fit"] = clamp_during_fit;
    j["seed"] = seed;
    j["residuals"] = residuals;
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        nlohmann::ordered_json o;
        o["label"] = p.label;
        o["fraction_pct"] = p.fraction_pct;
        o["n_millions"] = p.n_millions;
        o["d_tokens"] = p.d_tokens;
        o["dr"] = p.dr;
        o["s"] = p.s;
        o["train_loss"] = optional_json(p.train_loss);
        o["eval_loss"] = optional_json(p.eval_loss);
        o["observed"] = p.accuracy;
        if (i < point_fits.size()) {
            o["predicted"] = point_fits[i].predicted;
            o["residual"] = point_fits[i].residual;
            o["d_q"] = number_or_null(point_fits[i].d_q);
        }
        arr.push_back(std::move(o));
    }
    j["points"] = std::move(arr);
    return j.dump(2) + "\n";
}

FitReport FitReport::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("malformed fit report JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("constants") || !j.contains("points"))
        throw Error("fit report JSON needs 'constants' and 'points'");
    FitReport r;
    r.constants = ScalingConstants::from_json(j["constants"].dump());
    if (j.contains("se") && j["se"].is_object()) {
        Params s{};
        for (std::size_t i = 0; i < kP; ++i) s[i] = j["se"].value(std::string(ScalingConstants::kNames[i]), 0.0);
        r.se = s;
    }
    r.bootstrap_resamples = j.value("bootstrap_resamples", std::size_t{0});
    r.bootstrap_failures = j.value("bootstrap_failures", std::size_t{0});
    r.r2 = j.contains("r2") && j["r2"].is_number() ? j["r2"].get<double>() : std::numeric_limits<double>::quiet_NaN();
    r.pearson = optional_from(j, "pearson");
    r.sse = j.value("sse", 0.0);
    r.initial_sse = j.value("initial_sse", 0.0);
    r.n_evals = j.value("n_evals", 0);
    r.n_iterations = j.value("n_iterations", 0);
    r.converged = j.value("converged", false);
    r.stop_reason = j.value("stop_reason", std::string{});
    r.clamp_during_fit = j.value("clamp_during_fit", false);
    r.seed = j.value("seed", std::uint64_t{42});
    for (const auto& o : j["points"]) {
        ExperimentPoint p;
        p.label = o.value("label", std::string{});
        p.fraction_pct = o.value("fraction_pct", 100);
        p.n_millions = o.at("n_millions").get<double>();
        p.d_tokens = o.at("d_tokens").get<double>();
        p.dr = o.at("dr").get<double>();
        p.s = o.at("s").get<double>();
        p.train_loss = optional_from(o, "train_loss");
        p.eval_loss = optional_from(o, "eval_loss");
        p.accuracy = o.at("observed").get<double>();
        PointFit f;
        f.predicted = o.contains("predicted") ? o["predicted"].get<double>()
                                              : fit_prediction(p, r.constants, r.clamp_during_fit);
        f.residual = f.predicted - p.accuracy;
        f.d_q = o.contains("d_q") && o["d_q"].is_number() ? o["d_q"].get<double>() : 0.0;
        r.residuals.push_back(f.residual);
        r.point_fits.push_back(f);
        r.points.push_back(std::move(p));
    }
    r.n_points = r.points.size();
    return r;
}

}  // namespace qtokens
