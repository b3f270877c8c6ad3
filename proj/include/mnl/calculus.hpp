#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mnl/base.hpp"
#include "mnl/linalg.hpp"
#include "mnl/loss.hpp"
#include "mnl/network.hpp"

namespace mnl {

// ---------------------------------------------------------------------------
// Psi chain: the backward weight-sensitivity matrices
// ---------------------------------------------------------------------------

/// psis[l] (0-based) holds Psi_{l+1} of shape n_{l+1} x n_L, built by the
/// recursion Psi_L = Sigma'_L and Psi_l = Sigma'_l W_{l+1} Psi_{l+1}.
struct PsiChain {
    std::vector<Matrix> psis;
};

inline PsiChain psi_chain(const ForwardTrace& trace, const WeightSet& ws) {
    const std::size_t L = ws.weights.size();
    if (trace.sigma_prime.size() != L) fail("psi_chain: trace does not match weights");
    PsiChain chain;
    chain.psis.resize(L);
    const std::size_t out_dim = trace.sigma_prime[L - 1].size();
    Matrix psi(out_dim, out_dim);
    for (std::size_t i = 0; i < out_dim; ++i) psi(i, i) = trace.sigma_prime[L - 1][i];
    chain.psis[L - 1] = psi;
    for (std::size_t li = L - 1; li-- > 0;) {
        Matrix next = matmul(ws.weights[li + 1], chain.psis[li + 1]);
        const Vec& sp = trace.sigma_prime[li];
        if (next.rows != sp.size()) fail("psi_chain: shape mismatch at layer " + std::to_string(li + 1));
        for (std::size_t i = 0; i < next.rows; ++i)
            for (std::size_t j = 0; j < next.cols; ++j) next(i, j) *= sp[i];
        chain.psis[li] = std::move(next);
    }
    return chain;
}

// ---------------------------------------------------------------------------
// Weight Jacobian D1F and the stacked matrix P(W)
// ---------------------------------------------------------------------------

/// D1F(W, x): stacked blocks Psi_l kron phi_{l-1}, layer L on top, of shape
/// N x n_L. Rows within a layer block follow the column-major vec of W_l,
/// matching pack_weights.
inline Matrix weight_jacobian(const ForwardTrace& trace, const PsiChain& chain) {
    const std::size_t L = chain.psis.size();
    const std::size_t out_dim = chain.psis[L - 1].cols;
    std::size_t n_params = 0;
    for (std::size_t l = 0; l < L; ++l) n_params += trace.phis[l].size() * trace.phis[l + 1].size();
    Matrix jac(n_params, out_dim);
    std::size_t row0 = 0;
    for (std::size_t li = L; li-- > 0;) {
        const Matrix& psi = chain.psis[li];          // n_{l} x n_L (l = li+1)
        const Vec& phi_in = trace.phis[li];          // n_{l-1}
        for (std::size_t k = 0; k < psi.rows; ++k)
            for (std::size_t j = 0; j < phi_in.size(); ++j) {
                const double pj = phi_in[j];
                double* row = &jac.data[(row0 + k * phi_in.size() + j) * out_dim];
                for (std::size_t m = 0; m < out_dim; ++m) row[m] = psi(k, m) * pj;
            }
        row0 += psi.rows * phi_in.size();
    }
    return jac;
}

inline Matrix weight_jacobian(const Architecture& arch, const WeightSet& ws, const Vec& x) {
    ForwardTrace t = forward(arch, ws, x);
    return weight_jacobian(t, psi_chain(t, ws));
}

/// P(W) = [D1F(W,x_1), ..., D1F(W,x_T)], shape N x (T n_L), sample-ordered
/// column blocks.
inline Matrix assemble_p(const Architecture& arch, const WeightSet& ws, const std::vector<Vec>& inputs) {
    if (inputs.empty()) fail("assemble_p: need at least one sample");
    const std::size_t n_params = arch.param_count();
    const std::size_t out_dim = arch.output_dim();
    Matrix p(n_params, inputs.size() * out_dim);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        Matrix d1f = weight_jacobian(arch, ws, inputs[i]);
        for (std::size_t r = 0; r < n_params; ++r)
            for (std::size_t c = 0; c < out_dim; ++c) p(r, i * out_dim + c) = d1f(r, c);
    }
    return p;
}

/// epsilon(W): concatenated per-sample loss gradients in sample order.
inline Vec residual_stack(const std::vector<Vec>& outputs, const std::vector<Vec>& targets,
                          const LossKind& loss) {
    if (outputs.size() != targets.size()) fail("residual_stack: sample count mismatch");
    Vec out;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        LossValue lv = loss_eval(loss, outputs[i], targets[i]);
        out.insert(out.end(), lv.grad.begin(), lv.grad.end());
    }
    return out;
}

struct Dataset {
    std::vector<Vec> inputs;
    std::vector<Vec> targets;

    std::size_t size() const { return inputs.size(); }
};

/// One pass over the dataset collecting every first-order object: per-sample
/// D1F blocks, P(W), the residual stack and the gradient P(W) eps(W) / T.
struct JacobianBundle {
    std::vector<Matrix> per_sample_d1f;
    Matrix p_matrix;
    Vec residuals;
    Vec gradient;
    double total_loss = 0.0;
};

inline JacobianBundle jacobian_bundle(const Architecture& arch, const WeightSet& ws,
                                      const Dataset& data, const LossKind& loss,
                                      bool keep_per_sample = true) {
    if (data.inputs.empty()) fail("jacobian_bundle: empty dataset");
    if (data.inputs.size() != data.targets.size()) fail("jacobian_bundle: sample count mismatch");
    const std::size_t n_params = arch.param_count();
    const std::size_t out_dim = arch.output_dim();
    const std::size_t n_samples = data.inputs.size();
    JacobianBundle b;
    if (keep_per_sample) b.per_sample_d1f.reserve(n_samples);
    b.p_matrix = Matrix(n_params, n_samples * out_dim);
    b.residuals.reserve(n_samples * out_dim);
    b.gradient.assign(n_params, 0.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
        ForwardTrace t = forward(arch, ws, data.inputs[i]);
        Matrix d1f = weight_jacobian(t, psi_chain(t, ws));
        LossValue lv = loss_eval(loss, t.output(), data.targets[i]);
        b.total_loss += lv.value;
        for (std::size_t r = 0; r < n_params; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < out_dim; ++c) {
                b.p_matrix(r, i * out_dim + c) = d1f(r, c);
                acc += d1f(r, c) * lv.grad[c];
            }
            b.gradient[r] += acc;
        }
        b.residuals.insert(b.residuals.end(), lv.grad.begin(), lv.grad.end());
        if (keep_per_sample) b.per_sample_d1f.push_back(std::move(d1f));
    }
    const double inv_t = 1.0 / static_cast<double>(n_samples);
    for (double& g : b.gradient) g *= inv_t;
    b.total_loss *= inv_t;
    return b;
}

/// Gradient of the total loss, computed by the backprop route: the layer-l
/// block of D1F . gradE is phi_{l-1} (Psi_l gradE)^T vectorised column-major.
/// Cheaper than assembling P for large sample counts; agreement with the
/// P(W) eps(W) route is a test invariant.
inline std::pair<Vec, double> loss_gradient(const Architecture& arch, const WeightSet& ws,
                                            const Dataset& data, const LossKind& loss) {
    if (data.inputs.empty()) fail("loss_gradient: empty dataset");
    if (data.inputs.size() != data.targets.size()) fail("loss_gradient: sample count mismatch");
    const std::size_t L = arch.depth();
    Vec grad(arch.param_count(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < data.inputs.size(); ++i) {
        ForwardTrace t = forward(arch, ws, data.inputs[i]);
        PsiChain chain = psi_chain(t, ws);
        LossValue lv = loss_eval(loss, t.output(), data.targets[i]);
        total += lv.value;
        std::size_t off = 0;
        for (std::size_t li = L; li-- > 0;) {
            Vec backprop = matvec(chain.psis[li], lv.grad);  // n_l entries
            const Vec& phi_in = t.phis[li];
            for (std::size_t k = 0; k < backprop.size(); ++k)
                for (std::size_t j = 0; j < phi_in.size(); ++j)
                    grad[off + k * phi_in.size() + j] += backprop[k] * phi_in[j];
            off += backprop.size() * phi_in.size();
        }
    }
    const double inv_t = 1.0 / static_cast<double>(data.inputs.size());
    for (double& g : grad) g *= inv_t;
    return {std::move(grad), total * inv_t};
}

// ---------------------------------------------------------------------------
// Input Jacobian D2F and its truncations Omega_l
// ---------------------------------------------------------------------------

/// D2F(W,x) = Sigma'_L W_L^T Sigma'_{L-1} W_{L-1}^T ... Sigma'_1 W_1^T, of
/// shape n_L x n_0 (the Sigma'_L factor is the identity for a linear last
/// layer).
inline Matrix input_jacobian(const ForwardTrace& trace, const WeightSet& ws) {
    const std::size_t L = ws.weights.size();
    if (trace.sigma_prime.size() != L) fail("input_jacobian: trace does not match weights");
    Matrix jac = transpose(ws.weights[0]);
    for (std::size_t i = 0; i < jac.rows; ++i) {
        const double s = trace.sigma_prime[0][i];
        for (std::size_t j = 0; j < jac.cols; ++j) jac(i, j) *= s;
    }
    for (std::size_t l = 1; l < L; ++l) {
        jac = matmul(transpose(ws.weights[l]), jac);
        const Vec& sp = trace.sigma_prime[l];
        for (std::size_t i = 0; i < jac.rows; ++i)
            for (std::size_t j = 0; j < jac.cols; ++j) jac(i, j) *= sp[i];
    }
    return jac;
}

/// Omega_l(x) = W_l^T Sigma'_{l-1} ... Sigma'_1 W_1^T: the Jacobian of the
/// layer-l pre-activation with respect to the input. layer is 1-based;
/// layer = L gives the pre-activation Jacobian of the output layer.
inline Matrix omega(const ForwardTrace& trace, const WeightSet& ws, std::size_t layer) {
    const std::size_t L = ws.weights.size();
    if (layer < 1 || layer > L) fail("omega: layer index " + std::to_string(layer) + " out of range 1.." +
                                     std::to_string(L));
    Matrix om = transpose(ws.weights[0]);
    for (std::size_t l = 1; l < layer; ++l) {
        Matrix scaled = om;
        const Vec& sp = trace.sigma_prime[l - 1];
        for (std::size_t i = 0; i < scaled.rows; ++i)
            for (std::size_t j = 0; j < scaled.cols; ++j) scaled(i, j) *= sp[i];
        om = matmul(transpose(ws.weights[l]), scaled);
    }
    return om;
}

// ---------------------------------------------------------------------------
// Directional derivative of the input-Jacobian spectral norm
// ---------------------------------------------------------------------------

/// Result of the spectral-norm rate computation at one input: the top
/// singular value of D2F, its gap, the singular pair, and one term per hidden
/// layer of the derivative sum.
struct SpectralDerivativeReport {
    double sigma_max = 0.0;
    double gap = 0.0;
    Vec u;  // left singular vector, unit norm
    Vec v;  // right singular vector, unit norm
    double directional_derivative = 0.0;
    Vec per_layer_terms;  // one per l = 1..L-1
};

/// Sum form of the derivative of |D2F(W,x)|_2 in direction h: each hidden
/// layer contributes u^T (chain above l) diag(sig''_l . (Omega_l h)) Omega_l v.
/// Assumes a linear output layer (the layer-L term vanishes there). Refuses
/// inputs whose top singular value is not separated by gap_tol relatively.
inline SpectralDerivativeReport spectral_norm_directional_derivative(const ForwardTrace& trace,
                                                                     const WeightSet& ws, const Vec& h,
                                                                     double gap_tol = 1e-8) {
    const std::size_t L = ws.weights.size();
    if (h.size() != trace.phis[0].size()) fail("spectral derivative: direction dimension mismatch");

    const Matrix jac = input_jacobian(trace, ws);
    const SvdResult dec = svd(jac);
    SpectralDerivativeReport rep;
    rep.sigma_max = dec.singular_values[0];
    const double sigma2 = dec.singular_values.size() > 1 ? dec.singular_values[1] : 0.0;
    rep.gap = rep.sigma_max - sigma2;
    if (rep.gap <= gap_tol * rep.sigma_max)
        fail("spectral derivative: degenerate singular gap (sigma1 = " + std::to_string(rep.sigma_max) +
             ", sigma2 = " + std::to_string(sigma2) + ")");
    rep.u.resize(jac.rows);
    rep.v.resize(jac.cols);
    for (std::size_t i = 0; i < jac.rows; ++i) rep.u[i] = dec.left_vectors(i, 0);
    for (std::size_t i = 0; i < jac.cols; ++i) rep.v[i] = dec.right_vectors(i, 0);

    // Forward pre-activation perturbations Omega_l h and Omega_l v.
    std::vector<Vec> omega_h(L), omega_v(L);
    Vec ph = h, pv = rep.v;
    for (std::size_t l = 0; l < L; ++l) {
        omega_h[l] = tmatvec(ws.weights[l], ph);
        omega_v[l] = tmatvec(ws.weights[l], pv);
        if (l + 1 < L) {
            ph.resize(omega_h[l].size());
            pv.resize(omega_v[l].size());
            for (std::size_t i = 0; i < ph.size(); ++i) {
                ph[i] = trace.sigma_prime[l][i] * omega_h[l][i];
                pv[i] = trace.sigma_prime[l][i] * omega_v[l][i];
            }
        }
    }
    // Backward chains: chain_above[l-1] = (Sigma'_L W_L^T ... Sigma'_{l+1} W_{l+1}^T)^T u,
    // i.e. the factors strictly above layer l.
    std::vector<Vec> chain_above(L);
    Vec back = rep.u;
    for (std::size_t li = L; li-- > 0;) {
        chain_above[li] = back;  // (M_L ... M_{li+2})^T u, no layer-(li+1) factor
        if (li > 0) {
            Vec scaled(back.size());
            for (std::size_t i = 0; i < back.size(); ++i) scaled[i] = trace.sigma_prime[li][i] * back[i];
            back = matvec(ws.weights[li], scaled);
        }
    }

    rep.per_layer_terms.assign(L > 0 ? L - 1 : 0, 0.0);
    for (std::size_t li = 0; li + 1 < L; ++li) {
        const Vec& sig2 = trace.sigma_second[li];
        double term = 0.0;
        for (std::size_t i = 0; i < sig2.size(); ++i)
            term += chain_above[li][i] * sig2[i] * omega_h[li][i] * omega_v[li][i];
        rep.per_layer_terms[li] = term;
        rep.directional_derivative += term;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// zeta / eta Kronecker factorisation (tiny-network cross-check)
// ---------------------------------------------------------------------------

struct ZetaEtaForm {
    Vec zeta;
    Vec eta;
    double inner = 0.0;
};

/// The same directional derivative as an inner product of two vectors of
/// length prod n_1..n_{L-1}: zeta collects the weight chains threaded through
/// u and v; eta the Kronecker sums of activation derivatives. Assumes a
/// linear output layer, like the sum form. Exponential in depth, so capped;
/// callers beyond the cap use the sum form.
inline ZetaEtaForm zeta_eta_form(const ForwardTrace& trace, const WeightSet& ws, const Vec& h,
                                 std::size_t size_cap = 4096) {
    const std::size_t L = ws.weights.size();
    if (h.size() != trace.phis[0].size()) fail("zeta_eta_form: direction dimension mismatch");

    std::size_t total = 1;
    for (std::size_t l = 0; l + 1 < L; ++l) {
        total *= trace.sigma_prime[l].size();
        if (total > size_cap)
            fail("zeta_eta_form: product of hidden widths exceeds cap " + std::to_string(size_cap) +
                 "; use the sum form");
    }

    ZetaEtaForm out;
    if (L < 2) return out;  // no hidden layers: derivative is identically zero

    const Matrix jac = input_jacobian(trace, ws);
    const SvdResult dec = svd(jac);
    Vec u(jac.rows), v(jac.cols);
    for (std::size_t i = 0; i < jac.rows; ++i) u[i] = dec.left_vectors(i, 0);
    for (std::size_t i = 0; i < jac.cols; ++i) v[i] = dec.right_vectors(i, 0);

    // sigma''_l(x,h) = Sigma''_l(x) Omega_l(x) h for the hidden layers.
    std::vector<Vec> sig2_h(L - 1);
    Vec ph = h;
    for (std::size_t l = 0; l + 1 < L; ++l) {
        Vec pre = tmatvec(ws.weights[l], ph);
        sig2_h[l].resize(pre.size());
        ph.resize(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i) {
            sig2_h[l][i] = trace.sigma_second[l][i] * pre[i];
            ph[i] = trace.sigma_prime[l][i] * pre[i];
        }
    }

    // zeta: prefix weight-chain coefficients, index (j_1..j_{L-1}) with j_1
    // slowest, finished with (W_L u)[j_{L-1}].
    Vec zeta = tmatvec(ws.weights[0], v);  // entries (W_1^T v)[j_1]
    for (std::size_t l = 1; l + 1 < L; ++l) {
        const Matrix& w = ws.weights[l];   // n_l x n_{l+1}
        Vec next(zeta.size() * w.cols);
        for (std::size_t prefix = 0; prefix < zeta.size(); ++prefix) {
            const std::size_t j_prev = prefix % w.rows;  // last index of the prefix
            for (std::size_t j = 0; j < w.cols; ++j)
                next[prefix * w.cols + j] = zeta[prefix] * w(j_prev, j);
        }
        zeta = std::move(next);
    }
    Vec wl_u = matvec(ws.weights[L - 1], u);  // (W_L u)[j_{L-1}]
    {
        const std::size_t nl = wl_u.size();
        for (std::size_t idx = 0; idx < zeta.size(); ++idx) zeta[idx] *= wl_u[idx % nl];
    }

    // eta: sum over hidden layers of sig'_1 kron ... sig''_l ... kron sig'_{L-1}.
    Vec eta(total, 0.0);
    for (std::size_t l = 0; l + 1 < L; ++l) {
        Vec term = {1.0};
        for (std::size_t i = 0; i + 1 < L; ++i) {
            const Vec& factor = (i == l) ? sig2_h[i] : trace.sigma_prime[i];
            Vec next(term.size() * factor.size());
            for (std::size_t a = 0; a < term.size(); ++a)
                for (std::size_t b = 0; b < factor.size(); ++b) next[a * factor.size() + b] = term[a] * factor[b];
            term = std::move(next);
        }
        for (std::size_t i = 0; i < total; ++i) eta[i] += term[i];
    }

    out.inner = dot(zeta, eta);
    out.zeta = std::move(zeta);
    out.eta = std::move(eta);
    return out;
}

}  // namespace mnl
