#include <gtest/gtest.h>

#include "mnl/calculus.hpp"
#include "mnl/verify.hpp"
#include "test_util.hpp"

using mnl::ActivationKind;
using mnl::Architecture;
using mnl::Dataset;
using mnl::LossKind;
using mnl::Matrix;
using mnl::Vec;
using mnl::WeightSet;

namespace {

Architecture linear_arch(std::vector<std::size_t> widths) {
    std::vector<ActivationKind> acts(widths.size() - 1, ActivationKind::identity());
    return Architecture(std::move(widths), std::move(acts), true);
}

// 1-1-1 network: sigmoid(w1 x + b1) fed through a linear layer w2, bias b2.
struct ScalarChain {
    double w1 = 0.8, b1 = 0.25, w2 = -1.3, b2 = 0.5;

    Architecture arch() const {
        return Architecture({1, 1, 1}, {ActivationKind::sigmoid(1.0), ActivationKind::identity()});
    }
    WeightSet ws() const {
        WeightSet w;
        w.weights = {Matrix(1, 1, {w1}), Matrix(1, 1, {w2})};
        w.biases = {{b1}, {b2}};
        return w;
    }
    double sig(double x) const { return 1.0 / (1.0 + std::exp(-(w1 * x + b1))); }
    double sig_prime(double x) const { return sig(x) * (1.0 - sig(x)); }
};

}  // namespace

TEST(PsiChain, IdentityLastLayerGivesIdentity) {
    Architecture arch = Architecture::dense({2, 4, 3}, ActivationKind::sigmoid(2.0));
    WeightSet ws = mnl::init_weights(arch, 31);
    auto t = mnl::forward(arch, ws, {0.3, -0.1});
    auto chain = mnl::psi_chain(t, ws);
    EXPECT_EQ(chain.psis.back(), Matrix::identity(3));
}

TEST(PsiChain, ScalarChainMatchesSymbolicDerivative) {
    ScalarChain c;
    auto t = mnl::forward(c.arch(), c.ws(), {0.7});
    auto chain = mnl::psi_chain(t, c.ws());
    // Psi_1 = sigma'(w1 x + b1) * w2
    EXPECT_NEAR(chain.psis[0](0, 0), c.sig_prime(0.7) * c.w2, 1e-14);
}

TEST(PsiChain, LinearNetworkIsWeightProduct) {
    auto gen = testutil::rng(32);
    Architecture arch = linear_arch({3, 4, 2, 2});
    WeightSet ws = mnl::init_weights(arch, 33);
    auto t = mnl::forward(arch, ws, testutil::random_vec(3, gen));
    auto chain = mnl::psi_chain(t, ws);
    // Psi_1 = W_2 W_3 for the all-identity activations
    Matrix expect = mnl::matmul(ws.weights[1], ws.weights[2]);
    EXPECT_LT(mnl::frobenius_norm(mnl::mat_sub(chain.psis[0], expect)), 1e-13);
}

TEST(WeightJacobian, ScalarChainRows) {
    ScalarChain c;
    const double x = 0.7;
    Matrix jac = mnl::weight_jacobian(c.arch(), c.ws(), {x});
    ASSERT_EQ(jac.rows, 2u);
    ASSERT_EQ(jac.cols, 1u);
    // top block: dF/dw2 = sigma(w1 x + b1); bottom: dF/dw1 = sigma' * w2 * x
    EXPECT_NEAR(jac(0, 0), c.sig(x), 1e-14);
    EXPECT_NEAR(jac(1, 0), c.sig_prime(x) * c.w2 * x, 1e-14);
}

TEST(WeightJacobian, ZeroInputZeroesFirstLayerBlock) {
    Architecture arch = Architecture::dense({2, 3, 2}, ActivationKind::sigmoid(1.0));
    WeightSet ws = mnl::init_weights(arch, 34);  // biases zero
    Matrix jac = mnl::weight_jacobian(arch, ws, {0.0, 0.0});
    // rows of the layer-1 block sit at the bottom of the stack
    for (std::size_t r = 3 * 2; r < jac.rows; ++r)
        for (std::size_t c = 0; c < jac.cols; ++c) EXPECT_DOUBLE_EQ(jac(r, c), 0.0);
}

TEST(WeightJacobian, MatchesFiniteDifferences) {
    auto gen = testutil::rng(35);
    for (int trial = 0; trial < 20; ++trial) {
        Architecture arch = Architecture::dense({3, 4, 3, 2}, ActivationKind::tanh());
        WeightSet ws = mnl::init_weights(arch, 200 + trial, 1.0, 0.1);
        Vec x = testutil::random_vec(3, gen);
        Matrix analytic = mnl::weight_jacobian(arch, ws, x);
        Matrix fd = mnl::fd_weight_jacobian(arch, ws, x);
        for (std::size_t i = 0; i < analytic.data.size(); ++i)
            EXPECT_LT(testutil::rel_err(analytic.data[i], fd.data[i]), 1e-6);
    }
}

TEST(AssembleP, SingleSampleEqualsWeightJacobian) {
    Architecture arch = Architecture::dense({2, 3, 2}, ActivationKind::sigmoid(1.0));
    WeightSet ws = mnl::init_weights(arch, 36);
    Vec x = {0.4, -0.2};
    EXPECT_EQ(mnl::assemble_p(arch, ws, {x}), mnl::weight_jacobian(arch, ws, x));
}

TEST(AssembleP, DuplicateSamplesDropRank) {
    Architecture arch = Architecture::dense({2, 5, 2}, ActivationKind::sigmoid(1.0));
    WeightSet ws = mnl::init_weights(arch, 37);
    Vec x = {0.4, -0.2};
    Matrix p = mnl::assemble_p(arch, ws, {x, x});
    EXPECT_LT(mnl::numerical_rank(p), 2u * 2u);
}

TEST(AssembleP, ScalarChainHasFullRankOne) {
    ScalarChain c;
    Matrix p = mnl::assemble_p(c.arch(), c.ws(), {{0.7}});
    EXPECT_EQ(mnl::numerical_rank(p), 1u);
}

TEST(ResidualStack, ExactFitVanishes) {
    std::vector<Vec> outputs = {{1.0, 2.0}, {0.0, -1.0}};
    Vec eps = mnl::residual_stack(outputs, outputs, LossKind::smoothed_l1(1e-6));
    for (double v : eps) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(ResidualStack, SquaredLossGivesDifferences) {
    std::vector<Vec> outputs = {{1.0, 2.0}};
    std::vector<Vec> targets = {{0.5, 3.0}};
    Vec eps = mnl::residual_stack(outputs, targets, LossKind::squared());
    EXPECT_DOUBLE_EQ(eps[0], 0.5);
    EXPECT_DOUBLE_EQ(eps[1], -1.0);
}

TEST(ResidualStack, SmoothedL1MatchesFormula) {
    std::vector<Vec> outputs = {{1.0, 2.0}};
    std::vector<Vec> targets = {{0.0, 0.0}};
    const double beta = 1e-6;
    Vec eps = mnl::residual_stack(outputs, targets, LossKind::smoothed_l1(beta));
    const double denom = std::sqrt(5.0 + beta);
    EXPECT_NEAR(eps[0], 1.0 / denom, 1e-15);
    EXPECT_NEAR(eps[1], 2.0 / denom, 1e-15);
}

TEST(LossGradient, ExactFitGivesZeroGradient) {
    Architecture arch = Architecture::dense({2, 3, 2}, ActivationKind::sigmoid(1.0));
    WeightSet ws = mnl::init_weights(arch, 38);
    Dataset data;
    data.inputs = {{0.3, 0.1}, {-0.5, 0.8}};
    for (const Vec& x : data.inputs) data.targets.push_back(mnl::forward(arch, ws, x).output());
    auto [grad, loss] = mnl::loss_gradient(arch, ws, data, LossKind::squared());
    EXPECT_DOUBLE_EQ(loss, 0.0);
    for (double g : grad) EXPECT_DOUBLE_EQ(g, 0.0);
}

TEST(LossGradient, MatchesFiniteDifferences) {
    auto gen = testutil::rng(39);
    for (int trial = 0; trial < 20; ++trial) {
        Architecture arch = Architecture::dense({2, 4, 3}, ActivationKind::sigmoid(1.5));
        WeightSet ws = mnl::init_weights(arch, 300 + trial);
        Dataset data;
        for (int i = 0; i < 4; ++i) {
            data.inputs.push_back(testutil::random_vec(2, gen));
            data.targets.push_back(testutil::random_vec(3, gen));
        }
        LossKind loss = trial % 2 == 0 ? LossKind::smoothed_l1(1e-6) : LossKind::cauchy(1.0);
        auto [analytic, value] = mnl::loss_gradient(arch, ws, data, loss);
        (void)value;
        Vec fd = mnl::fd_loss_gradient(arch, ws, data, loss);
        for (std::size_t i = 0; i < analytic.size(); ++i)
            EXPECT_LT(testutil::rel_err(analytic[i], fd[i]), 1e-5);
    }
}

TEST(LossGradient, ScalesLinearlyWithLossMultiplier) {
    Architecture arch = Architecture::dense({2, 3, 2}, ActivationKind::sigmoid(1.0));
    WeightSet ws = mnl::init_weights(arch, 40);
    Dataset data;
    data.inputs = {{0.3, 0.1}};
    data.targets = {{1.0, -1.0}};
    auto [g1, v1] = mnl::loss_gradient(arch, ws, data, LossKind::squared());
    auto [g3, v3] = mnl::loss_gradient(arch, ws, data, LossKind::squared().scaled(3.0));
    EXPECT_NEAR(v3, 3.0 * v1, 1e-14);
    for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g3[i], 3.0 * g1[i], 1e-14);
}

TEST(LossGradient, BackpropAndStackedRoutesAgree) {
    // Chain consistency: the kron-free backprop accumulation must reproduce
    // P(W) eps(W) / T to near machine precision.
    auto gen = testutil::rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        Architecture arch = Architecture::dense({3, 4, 4, 2}, ActivationKind::softplus());
        WeightSet ws = mnl::init_weights(arch, 400 + trial);
        Dataset data;
        for (int i = 0; i < 3; ++i) {
            data.inputs.push_back(testutil::random_vec(3, gen));
            data.targets.push_back(testutil::random_vec(2, gen));
        }
        auto [grad, value] = mnl::loss_gradient(arch, ws, data, LossKind::smoothed_l1(1e-6));
        mnl::JacobianBundle bundle = mnl::jacobian_bundle(arch, ws, data, LossKind::smoothed_l1(1e-6));
        EXPECT_NEAR(value, bundle.total_loss, 1e-14);
        Vec via_p = mnl::matvec(bundle.p_matrix, bundle.residuals);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            EXPECT_NEAR(grad[i], bundle.gradient[i], 1e-12);
            EXPECT_NEAR(grad[i], via_p[i] / static_cast<double>(data.size()), 1e-12);
        }
    }
}

TEST(InputJacobian, LinearNetworkIsWeightProduct) {
    Architecture arch = linear_arch({3, 4, 2});
    WeightSet ws = mnl::init_weights(arch, 42);
    auto t = mnl::forward(arch, ws, {0.1, 0.2, 0.3});
    Matrix jac = mnl::input_jacobian(t, ws);
    Matrix expect = mnl::matmul(mnl::transpose(ws.weights[1]), mnl::transpose(ws.weights[0]));
    EXPECT_LT(mnl::frobenius_norm(mnl::mat_sub(jac, expect)), 1e-13);
}

TEST(InputJacobian, SingleSigmoidLayer) {
    Architecture arch({3, 2}, {ActivationKind::sigmoid(2.0)});
    WeightSet ws = mnl::init_weights(arch, 43);
    Vec x = {0.3, -0.4, 0.2};
    auto t = mnl::forward(arch, ws, x);
    Matrix jac = mnl::input_jacobian(t, ws);
    Matrix expect = mnl::transpose(ws.weights[0]);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_GT(t.sigma_prime[0][i], 0.0);
        for (std::size_t j = 0; j < 3; ++j)
            EXPECT_NEAR(jac(i, j), t.sigma_prime[0][i] * expect(i, j), 1e-14);
    }
}

TEST(InputJacobian, MatchesFiniteDifferences) {
    auto gen = testutil::rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        Architecture arch = Architecture::dense({4, 3, 3, 2}, ActivationKind::sigmoid(2.0));
        WeightSet ws = mnl::init_weights(arch, 500 + trial, 1.0, 0.1);
        Vec x = testutil::random_vec(4, gen);
        auto t = mnl::forward(arch, ws, x);
        Matrix analytic = mnl::input_jacobian(t, ws);
        Matrix fd = mnl::fd_input_jacobian(arch, ws, x);
        for (std::size_t i = 0; i < analytic.data.size(); ++i)
            EXPECT_LT(testutil::rel_err(analytic.data[i], fd.data[i]), 1e-6);
    }
}

TEST(Omega, FirstLayerIsTransposedWeight) {
    Architecture arch = Architecture::dense({3, 4, 2}, ActivationKind::sigmoid(1.0));
    WeightSet ws = mnl::init_weights(arch, 45);
    auto t = mnl::forward(arch, ws, {0.1, 0.2, 0.3});
    EXPECT_EQ(mnl::omega(t, ws, 1), mnl::transpose(ws.weights[0]));
}

TEST(Omega, LinearNetworkTruncation) {
    Architecture arch = linear_arch({3, 4, 2});
    WeightSet ws = mnl::init_weights(arch, 46);
    auto t = mnl::forward(arch, ws, {0.1, 0.2, 0.3});
    Matrix expect = mnl::matmul(mnl::transpose(ws.weights[1]), mnl::transpose(ws.weights[0]));
    EXPECT_LT(mnl::frobenius_norm(mnl::mat_sub(mnl::omega(t, ws, 2), expect)), 1e-13);
}

TEST(Omega, MatchesExplicitChainProduct) {
    auto gen = testutil::rng(47);
    Architecture arch = Architecture::dense({3, 4, 3, 2}, ActivationKind::tanh());
    WeightSet ws = mnl::init_weights(arch, 48);
    Vec x = testutil::random_vec(3, gen);
    auto t = mnl::forward(arch, ws, x);
    for (std::size_t layer = 1; layer <= 3; ++layer) {
        // independent re-multiplication with explicit diagonal matrices
        Matrix expect = mnl::transpose(ws.weights[0]);
        for (std::size_t l = 1; l < layer; ++l) {
            Matrix diag(t.sigma_prime[l - 1].size(), t.sigma_prime[l - 1].size());
            for (std::size_t i = 0; i < diag.rows; ++i) diag(i, i) = t.sigma_prime[l - 1][i];
            expect = mnl::matmul(mnl::transpose(ws.weights[l]), mnl::matmul(diag, expect));
        }
        EXPECT_LT(mnl::frobenius_norm(mnl::mat_sub(mnl::omega(t, ws, layer), expect)), 1e-12);
    }
}

TEST(Omega, RejectsOutOfRangeIndex) {
    Architecture arch = Architecture::dense({3, 4, 2}, ActivationKind::sigmoid(1.0));
    WeightSet ws = mnl::init_weights(arch, 49);
    auto t = mnl::forward(arch, ws, {0.1, 0.2, 0.3});
    EXPECT_THROW(mnl::omega(t, ws, 0), mnl::error);
    EXPECT_THROW(mnl::omega(t, ws, 3), mnl::error);
}

TEST(SpectralDerivative, LinearNetworkIsZero) {
    auto gen = testutil::rng(50);
    Architecture arch = linear_arch({3, 4, 2});
    WeightSet ws = mnl::init_weights(arch, 51);
    auto t = mnl::forward(arch, ws, testutil::random_vec(3, gen));
    for (int k = 0; k < 5; ++k) {
        Vec h = testutil::random_vec(3, gen);
        double nh = mnl::norm2(h);
        for (double& v : h) v /= nh;
        auto rep = mnl::spectral_norm_directional_derivative(t, ws, h);
        EXPECT_DOUBLE_EQ(rep.directional_derivative, 0.0);
    }
}

TEST(SpectralDerivative, VanishesAtZeroPreActivation) {
    // sigmoid sigma'' vanishes at 0, so zero input with zero biases kills
    // every term.
    Architecture arch = Architecture::dense({3, 4, 2}, ActivationKind::sigmoid(3.0));
    WeightSet ws = mnl::init_weights(arch, 52);
    auto t = mnl::forward(arch, ws, Vec(3, 0.0));
    Vec h = {1.0, 0.0, 0.0};
    auto rep = mnl::spectral_norm_directional_derivative(t, ws, h);
    EXPECT_NEAR(rep.directional_derivative, 0.0, 1e-15);
}

TEST(SpectralDerivative, MatchesFiniteDifferenceOfNorm) {
    auto gen = testutil::rng(53);
    int accepted = 0;
    for (int trial = 0; trial < 60 && accepted < 25; ++trial) {
        Architecture arch = Architecture::dense({3, 4, 4, 2}, ActivationKind::sigmoid(2.0));
        WeightSet ws = mnl::init_weights(arch, 600 + trial, 1.2, 0.2);
        Vec x = testutil::random_vec(3, gen);
        auto t = mnl::forward(arch, ws, x);
        Matrix jac = mnl::input_jacobian(t, ws);
        auto dec = mnl::svd(jac);
        if (dec.singular_values[0] - dec.singular_values[1] <= 1e-3 * dec.singular_values[0]) continue;
        Vec h = testutil::random_vec(3, gen);
        double nh = mnl::norm2(h);
        for (double& v : h) v /= nh;
        auto rep = mnl::spectral_norm_directional_derivative(t, ws, h);
        double fd = mnl::fd_spectral_norm_derivative(arch, ws, x, h);
        EXPECT_NEAR(rep.directional_derivative, fd, 1e-4);
        EXPECT_NEAR(mnl::norm2(rep.u), 1.0, 1e-10);
        EXPECT_NEAR(mnl::norm2(rep.v), 1.0, 1e-10);
        double sum = 0.0;
        for (double term : rep.per_layer_terms) sum += term;
        EXPECT_DOUBLE_EQ(sum, rep.directional_derivative);
        ++accepted;
    }
    EXPECT_GE(accepted, 25);
}

TEST(SpectralDerivative, RefusesDegenerateGap) {
    // identity map: both singular values equal 1
    Architecture arch = linear_arch({2, 2});
    WeightSet ws;
    ws.weights = {Matrix::identity(2)};
    ws.biases = {Vec(2, 0.0)};
    auto t = mnl::forward(arch, ws, {0.5, 0.5});
    try {
        mnl::spectral_norm_directional_derivative(t, ws, {1.0, 0.0});
        FAIL() << "expected degenerate-gap error";
    } catch (const mnl::error& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("sigma1"), std::string::npos);
        EXPECT_NE(msg.find("sigma2"), std::string::npos);
    }
}

TEST(ZetaEta, AgreesWithSumForm) {
    auto gen = testutil::rng(54);
    int accepted = 0;
    for (int trial = 0; trial < 60 && accepted < 25; ++trial) {
        Architecture arch = Architecture::dense({2, 5, 3, 2}, ActivationKind::sigmoid(1.5));
        WeightSet ws = mnl::init_weights(arch, 700 + trial, 1.0, 0.3);
        Vec x = testutil::random_vec(2, gen);
        auto t = mnl::forward(arch, ws, x);
        auto dec = mnl::svd(mnl::input_jacobian(t, ws));
        if (dec.singular_values[0] - dec.singular_values[1] <= 1e-6 * dec.singular_values[0]) continue;
        Vec h = testutil::random_vec(2, gen);
        double nh = mnl::norm2(h);
        for (double& v : h) v /= nh;
        auto rep = mnl::spectral_norm_directional_derivative(t, ws, h);
        auto ze = mnl::zeta_eta_form(t, ws, h);
        EXPECT_NEAR(ze.inner, rep.directional_derivative, 1e-8);
        ++accepted;
    }
    EXPECT_GE(accepted, 25);
}

TEST(ZetaEta, LinearNetworkHasZeroEta) {
    Architecture arch = linear_arch({2, 3, 2});
    WeightSet ws = mnl::init_weights(arch, 55);
    auto t = mnl::forward(arch, ws, {0.2, -0.7});
    auto ze = mnl::zeta_eta_form(t, ws, {1.0, 0.0});
    for (double v : ze.eta) EXPECT_DOUBLE_EQ(v, 0.0);
    EXPECT_DOUBLE_EQ(ze.inner, 0.0);
}

TEST(ZetaEta, HandExpandedOneHiddenLayer) {
    // 2-2-1 network: the single Kronecker term reduces to
    // sum_j (W1^T v)_j (W2 u)_j sigma''_j (W1^T h)_j with u = +-1.
    Architecture arch = Architecture::dense({2, 2, 1}, ActivationKind::sigmoid(1.0));
    WeightSet ws = mnl::init_weights(arch, 56, 1.0, 0.4);
    Vec x = {0.3, -0.6};
    Vec h = {0.8, 0.6};
    auto t = mnl::forward(arch, ws, x);
    auto ze = mnl::zeta_eta_form(t, ws, h);
    auto dec = mnl::svd(mnl::input_jacobian(t, ws));
    Vec u = {dec.left_vectors(0, 0)};
    Vec v = {dec.right_vectors(0, 0), dec.right_vectors(1, 0)};
    Vec w1tv = mnl::tmatvec(ws.weights[0], v);
    Vec w1th = mnl::tmatvec(ws.weights[0], h);
    Vec w2u = mnl::matvec(ws.weights[1], u);
    double expect = 0.0;
    for (std::size_t j = 0; j < 2; ++j)
        expect += w1tv[j] * w2u[j] * t.sigma_second[0][j] * w1th[j];
    EXPECT_NEAR(ze.inner, expect, 1e-12);
}

TEST(ZetaEta, RejectsOversizedHiddenProduct) {
    Architecture arch = Architecture::dense({2, 70, 70, 2}, ActivationKind::sigmoid(1.0));
    WeightSet ws = mnl::init_weights(arch, 57);
    auto t = mnl::forward(arch, ws, {0.1, 0.1});
    EXPECT_THROW(mnl::zeta_eta_form(t, ws, {1.0, 0.0}), mnl::error);
}

TEST(MeanValueBound, OutputDifferenceBoundedBySegmentMaxJacobian) {
    auto gen = testutil::rng(58);
    Architecture arch = Architecture::dense({3, 5, 4, 2}, ActivationKind::sigmoid(2.0));
    WeightSet ws = mnl::init_weights(arch, 59);
    for (int trial = 0; trial < 20; ++trial) {
        Vec a = testutil::random_vec(3, gen);
        Vec b = testutil::random_vec(3, gen);
        double seg_max = 0.0;
        for (int k = 0; k < 64; ++k) {
            double s = k / 63.0;
            Vec p(3);
            for (std::size_t i = 0; i < 3; ++i) p[i] = (1 - s) * a[i] + s * b[i];
            seg_max = std::max(seg_max, mnl::spectral_norm(mnl::input_jacobian(mnl::forward(arch, ws, p), ws)));
        }
        Vec fa = mnl::forward(arch, ws, a).output();
        Vec fb = mnl::forward(arch, ws, b).output();
        EXPECT_LE(mnl::norm2(mnl::vec_sub(fa, fb)), (seg_max + 1e-6) * mnl::norm2(mnl::vec_sub(a, b)));
    }
}

TEST(OracleSuites, AllPassOnFreshSeed) {
    mnl::VerifyOptions opts;
    opts.seed = 2024;
    opts.trials = 30;
    auto reports = mnl::run_oracle_suites(opts);
    for (const auto& r : reports) {
        EXPECT_TRUE(r.pass()) << r.name << " max error " << r.max_error;
        EXPECT_GT(r.trials, 0) << r.name;
    }
}

TEST(OracleSuites, CorruptionHookIsCaught) {
    mnl::VerifyOptions opts;
    opts.seed = 2024;
    opts.trials = 5;
    opts.corruption = 1e-2;
    auto reports = mnl::run_oracle_suites(opts);
    bool any_fail = false;
    for (const auto& r : reports) any_fail = any_fail || !r.pass();
    EXPECT_TRUE(any_fail);
}
