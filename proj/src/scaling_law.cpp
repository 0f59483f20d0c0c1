#include "qtokens/scaling_law.hpp"

#include <cmath>

#include <json.hpp>

#include "qtokens/error.hpp"

namespace qtokens {
namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw Error(std::string("non-finite ") + what);
}

void require_valid(const QualityInputs& in) {
    require_finite(in.d, "token count");
    require_finite(in.dr, "diversity");
    require_finite(in.s, "syntheticity");
    require_finite(in.n_millions, "model size");
    if (!(in.d > 0.0)) throw Error("token count must be positive");
    if (!(in.n_millions > 0.0)) throw Error("model size must be positive");
}

}  // namespace

std::string_view to_string(DqForm form) {
    switch (form) {
        case DqForm::F1: return "F1";
        case DqForm::F2: return "F2";
        case DqForm::F3: return "F3";
        case DqForm::F4: return "F4";
    }
    return "?";
}

DqForm parse_form(std::string_view name) {
    if (name == "F1" || name == "f1") return DqForm::F1;
    if (name == "F2" || name == "f2") return DqForm::F2;
    if (name == "F3" || name == "f3") return DqForm::F3;
    if (name == "F4" || name == "f4") return DqForm::F4;
    throw Error("unknown functional form '" + std::string(name) + "' (expected F1..F4)");
}

ScalingConstants ScalingConstants::from_vector(const Vector& v, DqForm form) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], form};
}

ScalingConstants ScalingConstants::published() {
    return {1.1400, -0.8546, 0.0450, -18.3078, 0.3683, -12.7756, 0.6369, DqForm::F1};
}

ScalingConstants ScalingConstants::chinchilla_refit() {
    return {1.8172, 482.01, 0.3478, 2085.43, 0.3658, 0.0, 0.0, DqForm::F1};
}

ScalingConstants ScalingConstants::fit_initial_guess(DqForm form) {
    auto k = chinchilla_refit();
    k.c1 = 0.5;
    k.c2 = 0.5;
    k.form = form;
    return k;
}

ScalingConstants ScalingConstants::preset(std::string_view name) {
    if (name == "published") return published();
    if (name == "chinchilla-refit") return chinchilla_refit();
    throw Error("unknown constants preset '" + std::string(name) + "'");
}

ScalingConstants ScalingConstants::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("malformed constants JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error("constants JSON must be an object");
    // Accept a FitReport as well as a bare constants object.
    if (j.contains("constants") && j["constants"].is_object()) j = j["constants"];
    Vector v{};
    for (std::size_t i = 0; i < kParams; ++i) {
        const std::string key(kNames[i]);
        if (!j.contains(key) || !j[key].is_number()) throw Error("constants JSON missing numeric key " + key);
        v[i] = j[key].get<double>();
    }
    DqForm form = DqForm::F1;
    if (j.contains("form")) form = parse_form(j["form"].get<std::string>());
    return from_vector(v, form);
}

std::string ScalingConstants::to_json() const {
    nlohmann::ordered_json j;
    const auto v = to_vector();
    for (std::size_t i = 0; i < kParams; ++i) j[std::string(kNames[i])] = v[i];
    j["form"] = std::string(qtokens::to_string(form));
    return j.dump();
}

double scaling_factor_q(double dr, double s, double c1, double c2) {
    require_finite(dr, "diversity");
    require_finite(s, "syntheticity");
    require_finite(c1, "c1");
    require_finite(c2, "c2");
    return std::exp(c1 * dr + c2 * s);
}

double effective_tokens(const QualityInputs& in, const ScalingConstants& k) {
    require_valid(in);
    const bool dr_power = k.form == DqForm::F2 || k.form == DqForm::F4;
    const bool s_power = k.form == DqForm::F3 || k.form == DqForm::F4;
    if (dr_power && !(in.dr > 0.0)) throw Error("form " + std::string(to_string(k.form)) + " requires Dr > 0");
    if (s_power && !(in.s > 0.0)) throw Error("form " + std::string(to_string(k.form)) + " requires S > 0");
    const double dr_term = dr_power ? std::pow(in.dr, k.c1) : std::exp(k.c1 * in.dr);
    const double s_term = s_power ? std::pow(in.s, k.c2) : std::exp(k.c2 * in.s);
    return in.d * dr_term * s_term;
}

double clamp_unit(double x) { return std::fmin(std::fmax(x, 0.0), 1.0); }

double predict_unclamped(const QualityInputs& in, const ScalingConstants& k) {
    const double dq = effective_tokens(in, k);
    return k.e + k.a / std::pow(in.n_millions, k.alpha) + k.b / std::pow(dq, k.beta);
}

double predict_accuracy(const QualityInputs& in, const ScalingConstants& k) {
    const double g = predict_unclamped(in, k);
    if (std::isnan(g)) throw Error("prediction is not a number");
    return clamp_unit(g);
}

double invert_effective_tokens(const ScalingConstants& k, double n_millions, double l) {
    require_finite(l, "loss");
    if (!(n_millions > 0.0)) throw Error("model size must be positive");
    if (k.beta == 0.0) throw Error("beta must be nonzero to invert");
    const double n_alpha = std::pow(n_millions, k.alpha);
    const double denom = (l - k.e) * n_alpha - k.a;
    const double quotient = k.b * n_alpha / denom;
    if (!(quotient > 0.0) || !std::isfinite(quotient)) throw Error("loss unreachable at this model size");
    return std::pow(quotient, 1.0 / k.beta);
}

}  // namespace qtokens
