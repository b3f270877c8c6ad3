#pragma once

#include <cmath>
#include <string>

#include "mnl/base.hpp"
#include "mnl/linalg.hpp"

namespace mnl {

enum class Loss { squared, smoothed_l1, cauchy };

/// Error functions whose gradient in the first argument vanishes exactly when
/// output equals target. beta is the smoothing constant of the l1
/// approximation sqrt(|x-y|^2 + beta); gamma the Cauchy scale. multiplier
/// scales the whole family.
struct LossKind {
    Loss kind = Loss::squared;
    double beta = 1e-6;
    double gamma = 1.0;
    double multiplier = 1.0;

    static LossKind squared() { return {Loss::squared, 0.0, 1.0, 1.0}; }
    static LossKind smoothed_l1(double beta = 1e-6) {
        if (beta <= 0.0) fail("smoothed_l1 beta must be positive");
        return {Loss::smoothed_l1, beta, 1.0, 1.0};
    }
    static LossKind cauchy(double scale = 1.0) {
        if (scale <= 0.0) fail("cauchy scale must be positive");
        return {Loss::cauchy, 0.0, scale, 1.0};
    }
    LossKind scaled(double c) const {
        LossKind out = *this;
        out.multiplier *= c;
        return out;
    }
};

struct LossValue {
    double value;
    Vec grad;  // gradient with respect to the output
};

inline LossValue loss_eval(const LossKind& kind, const Vec& output, const Vec& target) {
    if (output.size() != target.size()) fail("loss_eval: dimension mismatch");
    Vec diff = vec_sub(output, target);
    const double sq = dot(diff, diff);
    double value = 0.0;
    Vec grad(diff.size(), 0.0);
    switch (kind.kind) {
        case Loss::squared: {
            value = 0.5 * sq;
            grad = diff;
            break;
        }
        case Loss::smoothed_l1: {
            value = std::sqrt(sq + kind.beta);
            grad = vec_scale(diff, 1.0 / value);
            break;
        }
        case Loss::cauchy: {
            const double g2 = kind.gamma * kind.gamma;
            value = 0.5 * g2 * std::log1p(sq / g2);
            grad = vec_scale(diff, 1.0 / (1.0 + sq / g2));
            break;
        }
    }
    if (kind.multiplier != 1.0) {
        value *= kind.multiplier;
        grad = vec_scale(grad, kind.multiplier);
    }
    return {value, std::move(grad)};
}

inline std::string loss_name(const LossKind& kind) {
    switch (kind.kind) {
        case Loss::squared: return "squared";
        case Loss::smoothed_l1: return "smoothed_l1";
        case Loss::cauchy: return "cauchy";
    }
    return "?";
}

inline LossKind loss_from_name(const std::string& name, double beta, double gamma) {
    if (name == "squared") return LossKind::squared();
    if (name == "smoothed_l1") return LossKind::smoothed_l1(beta);
    if (name == "cauchy") return LossKind::cauchy(gamma);
    fail("unknown loss '" + name + "'");
}

}  // namespace mnl
