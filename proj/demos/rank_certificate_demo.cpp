// Minimal library walkthrough: build a small network, train it to an exact
// fit with Gauss-Newton, and certify the rank condition of the stacked
// Jacobian P(W) along the way.

#include <cstdio>

#include "mnl/mnl.hpp"

int main() {
    using namespace mnl;

    // 2-8-1 tanh network, linear output layer. N = 24 weights.
    Architecture arch = Architecture::dense({2, 8, 1}, ActivationKind::tanh());
    WeightSet ws = init_weights(arch, /*seed=*/7);

    // Three random samples: T * n_L = 3 constraints against 24 weights.
    Dataset data;
    data.inputs = {{0.4, -0.2}, {-0.7, 0.1}, {0.3, 0.9}};
    data.targets = {{0.5}, {-0.3}, {0.8}};

    TrainConfig cfg;
    cfg.max_iters = 100;
    cfg.gradient_tol = 1e-10;
    cfg.damping = 1e-6;
    cfg.track_rank = true;
    cfg.log_every = 10;

    auto [trained, log] = train_gauss_newton(arch, ws, data, LossKind::squared(), cfg);
    std::printf("converged: %s after %zu iterations\n", log.converged ? "yes" : "no",
                log.iterations_run);

    RankCertificate cert = certify_rank_condition(arch, trained, data, LossKind::squared());
    std::printf("verdict: %s (rank %zu / required %zu, margin %.3e, residual %.3e)\n",
                verdict_name(cert.verdict).c_str(), cert.rank_p, cert.required, cert.margin,
                cert.residual_norm);

    // The derivative of |D2F|_2 in a unit direction, with its layer terms.
    ForwardTrace trace = forward(arch, trained, data.inputs[0]);
    SpectralDerivativeReport rep =
        spectral_norm_directional_derivative(trace, trained, {1.0, 0.0});
    std::printf("|D2F|_2 = %.4f, directional derivative = %.4e\n", rep.sigma_max,
                rep.directional_derivative);
    return 0;
}
