#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "mnl/base.hpp"
#include "mnl/calculus.hpp"
#include "mnl/linalg.hpp"
#include "mnl/loss.hpp"
#include "mnl/network.hpp"

namespace mnl {

// ---------------------------------------------------------------------------
// Rank certificate for the stacked Jacobian P(W)
// ---------------------------------------------------------------------------

enum class RankVerdict { certified_exact_regime, no_critical_point_regime, uncertified };

inline std::string verdict_name(RankVerdict v) {
    switch (v) {
        case RankVerdict::certified_exact_regime: return "certified_exact_regime";
        case RankVerdict::no_critical_point_regime: return "no_critical_point_regime";
        case RankVerdict::uncertified: return "uncertified";
    }
    return "?";
}

/// Certificate for the rank condition at one weight configuration. The check
/// is trajectory-local by construction: it can only speak about the weights
/// it was handed, not about every point of weight space.
struct RankCertificate {
    std::size_t rank_p = 0;
    std::size_t required = 0;        // T * n_L
    double margin = 0.0;             // sigma_{T nL}(P), 0 if rank deficient
    double residual_norm = 0.0;      // |eps(W)|_2
    double gradient_norm = 0.0;      // |grad J|_2
    RankVerdict verdict = RankVerdict::uncertified;
};

/// Measurable form of the rank condition: full column rank of P plus a small
/// residual certifies the exact-fit regime; full rank plus a gradient small
/// relative to the margin while the residual stays large signals the
/// no-critical-point regime; anything else stays uncertified.
inline RankCertificate certify_rank_condition(const Architecture& arch, const WeightSet& ws,
                                              const Dataset& data, const LossKind& loss,
                                              double tol_factor = 1.0, double exactness_tol = 1e-4) {
    if (data.inputs.empty()) fail("certify_rank_condition: empty dataset");
    RankCertificate cert;
    cert.required = data.inputs.size() * arch.output_dim();

    JacobianBundle bundle = jacobian_bundle(arch, ws, data, loss, /*keep_per_sample=*/false);
    const SvdResult dec = svd(bundle.p_matrix);
    const double s1 = dec.singular_values.front();
    std::size_t rank = 0;
    if (s1 > 0.0) {
        const double thresh = tol_factor * s1 *
                              static_cast<double>(std::max(bundle.p_matrix.rows, bundle.p_matrix.cols)) *
                              k_eps;
        for (double s : dec.singular_values)
            if (s > thresh) ++rank;
    }
    cert.rank_p = rank;
    if (rank == cert.required && cert.required <= dec.singular_values.size())
        cert.margin = dec.singular_values[cert.required - 1];
    cert.residual_norm = norm2(bundle.residuals);
    cert.gradient_norm = norm2(bundle.gradient);

    if (cert.rank_p == cert.required && cert.residual_norm <= exactness_tol)
        cert.verdict = RankVerdict::certified_exact_regime;
    else if (cert.rank_p == cert.required && cert.residual_norm > exactness_tol &&
             cert.gradient_norm <= exactness_tol * cert.margin)
        cert.verdict = RankVerdict::no_critical_point_regime;
    else
        cert.verdict = RankVerdict::uncertified;
    return cert;
}

// ---------------------------------------------------------------------------
// Layer-wise differential classification
// ---------------------------------------------------------------------------

enum class LayerKind { submersion, immersion, diffeomorphism_candidate, rank_deficient };

inline std::string layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::submersion: return "submersion";
        case LayerKind::immersion: return "immersion";
        case LayerKind::diffeomorphism_candidate: return "diffeomorphism_candidate";
        case LayerKind::rank_deficient: return "rank_deficient";
    }
    return "?";
}

struct LayerClass {
    std::size_t layer = 0;          // 1-based
    std::size_t jacobian_rank = 0;  // rank of Sigma'_l(x) W_l^T
    LayerKind classification = LayerKind::rank_deficient;
};

/// Rank of each layer differential Sigma'_l(x) W_l^T at the probe input. The
/// positive diagonal makes the rank equal to rank(W_l), so the result should
/// not depend on the probe for admissible activations.
inline std::vector<LayerClass> classify_layers(const Architecture& arch, const WeightSet& ws,
                                               const Vec& probe) {
    ForwardTrace t = forward(arch, ws, probe);
    std::vector<LayerClass> out;
    for (std::size_t l = 0; l < arch.depth(); ++l) {
        Matrix d = transpose(ws.weights[l]);
        for (std::size_t i = 0; i < d.rows; ++i)
            for (std::size_t j = 0; j < d.cols; ++j) d(i, j) *= t.sigma_prime[l][i];
        LayerClass lc;
        lc.layer = l + 1;
        lc.jacobian_rank = numerical_rank(d);
        const std::size_t n_in = arch.widths[l], n_out = arch.widths[l + 1];
        if (lc.jacobian_rank == n_in && lc.jacobian_rank == n_out)
            lc.classification = LayerKind::diffeomorphism_candidate;
        else if (lc.jacobian_rank == n_out && n_in > n_out)
            lc.classification = LayerKind::submersion;
        else if (lc.jacobian_rank == n_in && n_in < n_out)
            lc.classification = LayerKind::immersion;
        else
            lc.classification = LayerKind::rank_deficient;
        out.push_back(lc);
    }
    return out;
}

/// Whole-network advisory: monotone non-increasing widths with full-rank
/// layers form a submersion chain, monotone non-decreasing an immersion chain.
inline std::string chain_advisory(const Architecture& arch, const std::vector<LayerClass>& layers) {
    bool all_full = true;
    for (const LayerClass& lc : layers)
        all_full = all_full && lc.classification != LayerKind::rank_deficient;
    if (!all_full) return "rank_deficient";
    bool non_increasing = true, non_decreasing = true;
    for (std::size_t i = 0; i + 1 < arch.widths.size(); ++i) {
        non_increasing = non_increasing && arch.widths[i] >= arch.widths[i + 1];
        non_decreasing = non_decreasing && arch.widths[i] <= arch.widths[i + 1];
    }
    if (non_increasing && non_decreasing) return "diffeomorphism_chain";
    if (non_increasing) return "submersion_chain";
    if (non_decreasing) return "immersion_chain";
    return "mixed";
}

// ---------------------------------------------------------------------------
// Width advisory (Whitney-style safe-width check)
// ---------------------------------------------------------------------------

struct WidthAdvisory {
    std::size_t data_dim = 0;
    std::vector<std::size_t> flagged_layers;  // 1-based hidden layer indices with n_l <= 2 dim
    bool pass = false;                        // min hidden width > 2 * data_dim
};

inline WidthAdvisory width_advisory(const Architecture& arch, std::size_t data_dim) {
    if (data_dim == 0) fail("width_advisory: data_dim must be at least 1");
    WidthAdvisory adv;
    adv.data_dim = data_dim;
    adv.pass = true;
    for (std::size_t l = 1; l + 1 < arch.widths.size(); ++l) {
        if (arch.widths[l] <= 2 * data_dim) {
            adv.flagged_layers.push_back(l);
            adv.pass = false;
        }
    }
    return adv;
}

// ---------------------------------------------------------------------------
// Empirical Lipschitz estimates
// ---------------------------------------------------------------------------

struct LipschitzEstimates {
    double weight_lipschitz = 0.0;  // max over probes of |D1F|_2 (lower bound)
    double input_lipschitz = 0.0;   // max over probes of |D2F|_2 (lower bound)
};

inline LipschitzEstimates lipschitz_estimates(const Architecture& arch, const WeightSet& ws,
                                              const std::vector<Vec>& probes) {
    if (probes.empty()) fail("lipschitz_estimates: need at least one probe");
    LipschitzEstimates est;
    for (const Vec& x : probes) {
        ForwardTrace t = forward(arch, ws, x);
        est.weight_lipschitz = std::max(est.weight_lipschitz,
                                        spectral_norm(weight_jacobian(t, psi_chain(t, ws))));
        est.input_lipschitz = std::max(est.input_lipschitz, spectral_norm(input_jacobian(t, ws)));
    }
    return est;
}

// ---------------------------------------------------------------------------
// JSON report
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json diagnostics_report(const RankCertificate& cert,
                                                 const std::vector<LayerClass>& layers,
                                                 const std::string& advisory,
                                                 const WidthAdvisory& width,
                                                 const LipschitzEstimates& lip) {
    nlohmann::ordered_json j;
    j["verdict"] = verdict_name(cert.verdict);
    j["rank_p"] = cert.rank_p;
    j["required"] = cert.required;
    j["margin"] = cert.margin;
    j["residual_norm"] = cert.residual_norm;
    j["gradient_norm"] = cert.gradient_norm;
    j["note"] = "certificate is trajectory-local: it covers only the supplied weights";
    nlohmann::ordered_json per_layer = nlohmann::ordered_json::array();
    for (const LayerClass& lc : layers) {
        nlohmann::ordered_json e;
        e["layer"] = lc.layer;
        e["jacobian_rank"] = lc.jacobian_rank;
        e["classification"] = layer_kind_name(lc.classification);
        per_layer.push_back(e);
    }
    j["per_layer"] = per_layer;
    j["chain_advisory"] = advisory;
    j["width_advisory"] = {{"data_dim", width.data_dim},
                           {"flagged_layers", width.flagged_layers},
                           {"pass", width.pass}};
    j["lipschitz_lower_bounds"] = {{"weight", lip.weight_lipschitz},
                                   {"input", lip.input_lipschitz},
                                   {"note", "empirical maxima over the probe set"}};
    return j;
}

}  // namespace mnl
