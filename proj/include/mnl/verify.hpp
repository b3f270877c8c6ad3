#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mnl/base.hpp"
#include "mnl/calculus.hpp"
#include "mnl/linalg.hpp"
#include "mnl/loss.hpp"
#include "mnl/network.hpp"

namespace mnl {

// Central finite-difference oracles. They are built on forward() and svd()
// only, so they stay independent of the analytic derivative code they check.

/// Relative error with a unit floor: absolute below magnitude 1, relative
/// above. Keeps finite-difference noise on near-zero coordinates from
/// dominating the report.
inline double relative_error(double got, double want) {
    return std::fabs(got - want) / std::max({1.0, std::fabs(got), std::fabs(want)});
}

/// d F / d w by central differences over the packed weight vector.
inline Matrix fd_weight_jacobian(const Architecture& arch, const WeightSet& ws, const Vec& x,
                                 double step = 1e-5) {
    const Vec packed = pack_weights(ws);
    Matrix jac(packed.size(), arch.output_dim());
    for (std::size_t i = 0; i < packed.size(); ++i) {
        Vec wp = packed, wm = packed;
        wp[i] += step;
        wm[i] -= step;
        Vec fp = forward(arch, unpack_weights(arch, wp, ws), x).output();
        Vec fm = forward(arch, unpack_weights(arch, wm, ws), x).output();
        for (std::size_t m = 0; m < fp.size(); ++m) jac(i, m) = (fp[m] - fm[m]) / (2.0 * step);
    }
    return jac;
}

/// d J / d w by central differences of the total loss.
inline Vec fd_loss_gradient(const Architecture& arch, const WeightSet& ws, const Dataset& data,
                            const LossKind& loss, double step = 1e-5) {
    const Vec packed = pack_weights(ws);
    Vec grad(packed.size());
    auto total = [&](const WeightSet& w) {
        double acc = 0.0;
        for (std::size_t i = 0; i < data.inputs.size(); ++i)
            acc += loss_eval(loss, forward(arch, w, data.inputs[i]).output(), data.targets[i]).value;
        return acc / static_cast<double>(data.inputs.size());
    };
    for (std::size_t i = 0; i < packed.size(); ++i) {
        Vec wp = packed, wm = packed;
        wp[i] += step;
        wm[i] -= step;
        grad[i] = (total(unpack_weights(arch, wp, ws)) - total(unpack_weights(arch, wm, ws))) / (2.0 * step);
    }
    return grad;
}

/// d F / d x by central differences.
inline Matrix fd_input_jacobian(const Architecture& arch, const WeightSet& ws, const Vec& x,
                                double step = 1e-5) {
    Matrix jac(arch.output_dim(), x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        Vec xp = x, xm = x;
        xp[j] += step;
        xm[j] -= step;
        Vec fp = forward(arch, ws, xp).output();
        Vec fm = forward(arch, ws, xm).output();
        for (std::size_t m = 0; m < fp.size(); ++m) jac(m, j) = (fp[m] - fm[m]) / (2.0 * step);
    }
    return jac;
}

/// (|D2F(x+th)|_2 - |D2F(x-th)|_2) / 2t.
inline double fd_spectral_norm_derivative(const Architecture& arch, const WeightSet& ws, const Vec& x,
                                          const Vec& h, double t = 1e-5) {
    Vec xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] += t * h[i];
        xm[i] -= t * h[i];
    }
    const double np = spectral_norm(input_jacobian(forward(arch, ws, xp), ws));
    const double nm = spectral_norm(input_jacobian(forward(arch, ws, xm), ws));
    return (np - nm) / (2.0 * t);
}

// ---------------------------------------------------------------------------
// Oracle suites over random tiny networks
// ---------------------------------------------------------------------------

struct OracleReport {
    std::string name;
    double max_error = 0.0;
    double tolerance = 0.0;
    int trials = 0;
    bool pass() const { return max_error < tolerance; }
};

struct VerifyOptions {
    std::uint64_t seed = 1;
    int trials = 100;
    double fd_step = 1e-5;
    double spectral_step = 1e-5;
    double tol_derivatives = 1e-5;
    double tol_spectral = 1e-4;
    double tol_forms = 1e-8;
    double spectral_gap_floor = 1e-3;  // relative gap below which a draw is skipped
    // Test hook: a nonzero value biases the analytic results before comparison
    // so the harness can demonstrate that it catches a broken derivative.
    double corruption = 0.0;
};

namespace detail {

struct RandomInstance {
    Architecture arch;
    WeightSet ws;
    Dataset data;
    LossKind loss;
};

inline RandomInstance random_tiny_instance(std::mt19937_64& gen, bool force_linear_output = true) {
    std::uniform_int_distribution<std::size_t> depth_dist(1, 4);
    std::uniform_int_distribution<std::size_t> width_dist(1, 5);
    std::uniform_int_distribution<std::size_t> samples_dist(1, 5);
    std::uniform_int_distribution<int> act_dist(0, 2);
    std::uniform_real_distribution<double> slope_dist(0.5, 4.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    const std::size_t L = depth_dist(gen);
    std::vector<std::size_t> widths(L + 1);
    for (std::size_t& w : widths) w = width_dist(gen);
    std::vector<ActivationKind> acts(L);
    for (std::size_t l = 0; l < L; ++l) {
        switch (act_dist(gen)) {
            case 0: acts[l] = ActivationKind::sigmoid(slope_dist(gen)); break;
            case 1: acts[l] = ActivationKind::softplus(); break;
            default: acts[l] = ActivationKind::tanh(); break;
        }
    }
    if (force_linear_output) acts[L - 1] = ActivationKind::identity();

    RandomInstance inst;
    inst.arch = Architecture(std::move(widths), std::move(acts));
    inst.ws = init_weights(inst.arch, gen(), 1.0, 0.2);
    const std::size_t n_samples = samples_dist(gen);
    for (std::size_t i = 0; i < n_samples; ++i) {
        Vec x(inst.arch.input_dim()), y(inst.arch.output_dim());
        for (double& v : x) v = unit(gen);
        for (double& v : y) v = unit(gen);
        inst.data.inputs.push_back(std::move(x));
        inst.data.targets.push_back(std::move(y));
    }
    switch (act_dist(gen)) {
        case 0: inst.loss = LossKind::squared(); break;
        case 1: inst.loss = LossKind::smoothed_l1(1e-6); break;
        default: inst.loss = LossKind::cauchy(1.0); break;
    }
    return inst;
}

}  // namespace detail

/// Runs every analytic-vs-oracle comparison on freshly drawn tiny networks.
/// Deterministic per seed; each report carries the observed maximum error.
inline std::vector<OracleReport> run_oracle_suites(const VerifyOptions& opts) {
    std::mt19937_64 gen(opts.seed);
    OracleReport weight_jac{"weight_jacobian_vs_fd", 0.0, opts.tol_derivatives, 0};
    OracleReport loss_grad{"loss_gradient_vs_fd", 0.0, opts.tol_derivatives, 0};
    OracleReport input_jac{"input_jacobian_vs_fd", 0.0, opts.tol_derivatives, 0};
    OracleReport spectral{"spectral_derivative_vs_fd", 0.0, opts.tol_spectral, 0};
    OracleReport forms{"zeta_eta_vs_sum_form", 0.0, opts.tol_forms, 0};

    for (int trial = 0; trial < opts.trials; ++trial) {
        detail::RandomInstance inst = detail::random_tiny_instance(gen);

        // D1F per sample
        {
            const Vec& x = inst.data.inputs.front();
            Matrix analytic = weight_jacobian(inst.arch, inst.ws, x);
            analytic.data[0] += opts.corruption;
            Matrix fd = fd_weight_jacobian(inst.arch, inst.ws, x, opts.fd_step);
            for (std::size_t i = 0; i < analytic.data.size(); ++i)
                weight_jac.max_error = std::max(weight_jac.max_error,
                                                relative_error(analytic.data[i], fd.data[i]));
            ++weight_jac.trials;
        }
        // grad J
        {
            auto [analytic, loss_value] = loss_gradient(inst.arch, inst.ws, inst.data, inst.loss);
            (void)loss_value;
            analytic[0] += opts.corruption;
            Vec fd = fd_loss_gradient(inst.arch, inst.ws, inst.data, inst.loss, opts.fd_step);
            for (std::size_t i = 0; i < analytic.size(); ++i)
                loss_grad.max_error = std::max(loss_grad.max_error, relative_error(analytic[i], fd[i]));
            ++loss_grad.trials;
        }
        // D2F
        {
            const Vec& x = inst.data.inputs.front();
            Matrix analytic = input_jacobian(forward(inst.arch, inst.ws, x), inst.ws);
            analytic.data[0] += opts.corruption;
            Matrix fd = fd_input_jacobian(inst.arch, inst.ws, x, opts.fd_step);
            for (std::size_t i = 0; i < analytic.data.size(); ++i)
                input_jac.max_error = std::max(input_jac.max_error,
                                               relative_error(analytic.data[i], fd.data[i]));
            ++input_jac.trials;
        }
        // spectral derivative, sum form vs finite differences of the norm
        {
            const Vec& x = inst.data.inputs.front();
            ForwardTrace t = forward(inst.arch, inst.ws, x);
            Matrix jac = input_jacobian(t, inst.ws);
            SvdResult dec = svd(jac);
            const double s1 = dec.singular_values[0];
            const double s2 = dec.singular_values.size() > 1 ? dec.singular_values[1] : 0.0;
            if (s1 > 0.0 && (s1 - s2) > opts.spectral_gap_floor * s1) {
                Vec h(x.size());
                std::uniform_real_distribution<double> unit(-1.0, 1.0);
                for (double& v : h) v = unit(gen);
                const double nh = norm2(h);
                for (double& v : h) v /= nh;
                SpectralDerivativeReport rep =
                    spectral_norm_directional_derivative(t, inst.ws, h, 1e-8);
                const double fd = fd_spectral_norm_derivative(inst.arch, inst.ws, x, h, opts.spectral_step);
                spectral.max_error = std::max(
                    spectral.max_error, std::fabs(rep.directional_derivative + opts.corruption - fd));
                ++spectral.trials;

                std::size_t hidden_product = 1;
                for (std::size_t l = 1; l < inst.arch.widths.size() - 1; ++l)
                    hidden_product *= inst.arch.widths[l];
                if (hidden_product <= 4096) {
                    ZetaEtaForm ze = zeta_eta_form(t, inst.ws, h);
                    forms.max_error = std::max(
                        forms.max_error,
                        std::fabs(ze.inner + opts.corruption - rep.directional_derivative));
                    ++forms.trials;
                }
            }
        }
    }
    return {weight_jac, loss_grad, input_jac, spectral, forms};
}

}  // namespace mnl
