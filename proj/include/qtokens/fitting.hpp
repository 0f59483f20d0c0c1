#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qtokens/scaling_law.hpp"
#include "qtokens/stats.hpp"

namespace qtokens {

struct ExperimentPoint {
    double n_millions = 0.0;
    double d_tokens = 0.0;
    double dr = 0.0;
    double s = 0.0;
    double accuracy = 0.0;  // fraction in [0, 1]
    std::optional<double> train_loss;
    std::optional<double> eval_loss;
    std::string label;
    int fraction_pct = 100;

    QualityInputs inputs() const { return {d_tokens, dr, s, n_millions}; }
};

/// Throws unless the point satisfies its domain (positive sizes and quality
/// scores, accuracy within [0, 1]).
void validate(const ExperimentPoint& p);

// Rows of the quality and results tables. Accuracy is in percent here.
struct ResultRow {
    double model_size_m = 0.0;
    std::string label;
    int fraction_pct = 0;
    double n_tokens = 0.0;
    std::optional<double> train_loss;
    std::optional<double> eval_loss;
    double accuracy_pct = 0.0;
};

struct QualityRow {
    std::string label;
    int fraction_pct = 0;
    double diversity = 0.0;
    double syntheticity = 0.0;
};

/// One point per result row, joined on (label, fraction); accuracy / 100.
std::vector<ExperimentPoint> join_fixture_tables(const std::vector<ResultRow>& results,
                                                 const std::vector<QualityRow>& quality);

std::vector<QualityRow> parse_quality_csv(std::istream& in);
std::vector<ResultRow> parse_results_csv(std::istream& in);

/// Experiments CSV with header
/// model_size_m,data_label,fraction_pct,n_tokens,train_loss,eval_loss,accuracy_pct,diversity,syntheticity.
/// The quality columns may be omitted (or left empty) when `quality` is given.
std::vector<ExperimentPoint> read_experiments_csv(std::istream& in,
                                                  const std::vector<QualityRow>* quality = nullptr);
void write_experiments_csv(const std::vector<ExperimentPoint>& points, std::ostream& out);

enum class Damping {
    // Moré-style: the damping is solved so the scaled step fits a trust
    // radius that grows or shrinks with the gain ratio.
    trust_region,
    // Fixed schedule: lambda starts at initial_damping, x10 on a rejected
    // step, /10 on an accepted one.
    multiplicative,
};

struct FitOptions {
    DqForm form = DqForm::F1;
    Damping damping = Damping::trust_region;
    int max_evals = 2000;
    int max_iterations = 200;
    bool clamp_during_fit = false;
    double rel_tolerance = 1e-10;
    double fd_step = 1e-6;
    double initial_damping = 1e-3;
    // Initial trust radius as a multiple of the scaled parameter norm.
    double step_bound = 100.0;
    // Extra starts from seeded perturbations of `init`; the best SSE wins.
    int restarts = 0;
    std::uint64_t seed = 42;
};

struct PointFit {
    double predicted = 0.0;
    double residual = 0.0;  // predicted - observed
    double d_q = 0.0;
};

struct FitReport {
    ScalingConstants constants;
    std::optional<ScalingConstants::Vector> se;
    std::size_t bootstrap_resamples = 0;
    std::size_t bootstrap_failures = 0;
    double r2 = 0.0;
    std::optional<double> pearson;
    double sse = 0.0;
    double initial_sse = 0.0;
    std::size_t n_points = 0;
    int n_evals = 0;
    int n_iterations = 0;
    bool converged = false;
    std::string stop_reason;
    bool clamp_during_fit = false;
    std::uint64_t seed = 42;
    std::vector<double> residuals;
    std::vector<PointFit> point_fits;
    std::vector<ExperimentPoint> points;

    std::string to_json() const;
    static FitReport from_json(std::string_view json);
};

/// Least-squares fit of every constant in `init` against point accuracies,
/// using Levenberg-Marquardt with a forward-difference Jacobian (relative
/// step fd_step). Stops when an accepted step improves SSE by less than
/// rel_tolerance, or at max_evals / max_iterations. The result never has a
/// larger SSE than `init`.
FitReport fit_constants(const std::vector<ExperimentPoint>& points, const ScalingConstants& init,
                        const FitOptions& opts = {});

/// Model value used as the fit's prediction for a point.
double fit_prediction(const ExperimentPoint& p, const ScalingConstants& k, bool clamp);

struct BootstrapResult {
    ScalingConstants::Vector se{};
    std::size_t successes = 0;
    std::size_t failures = 0;
};

/// Refits on seeded with-replacement resamples (warm-started at the base
/// constants) and reports the per-parameter standard deviation. Resample b
/// draws from its own stream derived from (seed, b), so thread count does not
/// change the answer.
BootstrapResult bootstrap_se(const std::vector<ExperimentPoint>& points, const FitReport& base,
                             std::size_t n_resamples, std::uint64_t seed, const FitOptions& opts = {},
                             unsigned threads = 1);

/// Index sequence used for resample b.
std::vector<std::size_t> bootstrap_indices(std::size_t n_points, std::uint64_t seed, std::size_t b);

}  // namespace qtokens
