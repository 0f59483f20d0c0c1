#pragma once

#include <array>
#include <string>
#include <string_view>

namespace qtokens {

/// How quality enters the effective token count D_q.
///   F1: D * exp(c1*Dr + c2*S)
///   F2: D * Dr^c1 * exp(c2*S)
///   F3: D * exp(c1*Dr) * S^c2
///   F4: D * Dr^c1 * S^c2
enum class DqForm { F1, F2, F3, F4 };

std::string_view to_string(DqForm form);
DqForm parse_form(std::string_view name);

struct ScalingConstants {
    double e = 0.0;
    double a = 0.0;
    double alpha = 0.0;
    double b = 0.0;
    double beta = 1.0;
    double c1 = 0.0;
    double c2 = 0.0;
    DqForm form = DqForm::F1;

    static constexpr std::size_t kParams = 7;
    using Vector = std::array<double, kParams>;
    static constexpr std::array<std::string_view, kParams> kNames{"E", "A", "alpha", "B", "beta", "c1", "c2"};

    Vector to_vector() const { return {e, a, alpha, b, beta, c1, c2}; }
    static ScalingConstants from_vector(const Vector& v, DqForm form);

    /// Constants fitted on the 207-run fixture (accuracy model).
    static ScalingConstants published();
    /// Loss-model constants re-estimated for Chinchilla; c1 = c2 = 0. These are
    /// also the published starting point for fitting (with c1 = c2 = 0.5).
    static ScalingConstants chinchilla_refit();
    /// `published` or `chinchilla-refit`.
    static ScalingConstants preset(std::string_view name);
    static ScalingConstants fit_initial_guess(DqForm form = DqForm::F1);

    static ScalingConstants from_json(std::string_view json);
    std::string to_json() const;
};

/// Model size in millions of parameters, tokens as a raw count.
struct QualityInputs {
    double d = 0.0;
    double dr = 0.0;
    double s = 0.0;
    double n_millions = 0.0;
};

double scaling_factor_q(double dr, double s, double c1, double c2);
double effective_tokens(const QualityInputs& in, const ScalingConstants& k);
double clamp_unit(double x);

/// E + A/N^alpha + B/D_q^beta without the clamp.
double predict_unclamped(const QualityInputs& in, const ScalingConstants& k);
double predict_accuracy(const QualityInputs& in, const ScalingConstants& k);

/// Closed-form D_q that makes the unclamped law equal `l` at model size N.
double invert_effective_tokens(const ScalingConstants& k, double n_millions, double l);

}  // namespace qtokens
