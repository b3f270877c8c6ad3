#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mnl/base.hpp"
#include "mnl/linalg.hpp"

namespace mnl {

// ---------------------------------------------------------------------------
// Activation functions: smooth, monotonically increasing, Lipschitz
// ---------------------------------------------------------------------------

enum class Activation { identity, sigmoid, softplus, tanh };

/// Activation descriptor. The slope only matters for the parameterised
/// sigmoid 1/(1+e^{-a x}); it must stay positive.
struct ActivationKind {
    Activation kind = Activation::identity;
    double slope = 1.0;

    static ActivationKind identity() { return {Activation::identity, 1.0}; }
    static ActivationKind sigmoid(double a) {
        if (a <= 0.0) fail("sigmoid slope must be positive");
        return {Activation::sigmoid, a};
    }
    static ActivationKind softplus() { return {Activation::softplus, 1.0}; }
    static ActivationKind tanh() { return {Activation::tanh, 1.0}; }

    bool operator==(const ActivationKind&) const = default;
};

struct ActivationValue {
    double value;
    double first;
    double second;
};

/// Value, first and second derivative at x. Saturating tails are computed so
/// that no input produces a non-finite result.
inline ActivationValue activation_eval(ActivationKind k, double x) {
    switch (k.kind) {
        case Activation::identity:
            return {x, 1.0, 0.0};
        case Activation::sigmoid: {
            const double a = k.slope;
            const double ax = a * x;
            // e = exp(-|ax|) keeps v*(1-v) = e/(1+e)^2 positive deep into the
            // tails, where 1-v would round to zero.
            const double e = std::exp(-std::fabs(ax));
            const double v = ax >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
            const double vv = e / ((1.0 + e) * (1.0 + e));
            const double first = a * vv;
            const double sign = ax >= 0.0 ? -1.0 : 1.0;
            const double second = sign * a * a * vv * (1.0 - e) / (1.0 + e);
            return {v, first, second};
        }
        case Activation::softplus: {
            const double v = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
            const double e = std::exp(-std::fabs(x));
            const double s = x >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
            return {v, s, e / ((1.0 + e) * (1.0 + e))};
        }
        case Activation::tanh: {
            const double v = std::tanh(x);
            const double ch = std::cosh(std::min(std::fabs(x), 350.0));
            const double first = 1.0 / (ch * ch);
            return {v, first, -2.0 * v * first};
        }
    }
    fail("activation_eval: unknown kind");
}

inline std::string activation_name(ActivationKind k) {
    switch (k.kind) {
        case Activation::identity: return "identity";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softplus: return "softplus";
        case Activation::tanh: return "tanh";
    }
    return "?";
}

inline ActivationKind activation_from_name(const std::string& name, double slope) {
    if (name == "identity") return ActivationKind::identity();
    if (name == "sigmoid") return ActivationKind::sigmoid(slope);
    if (name == "softplus") return ActivationKind::softplus();
    if (name == "tanh") return ActivationKind::tanh();
    fail("unknown activation '" + name + "'");
}

// ---------------------------------------------------------------------------
// Architecture and weights
// ---------------------------------------------------------------------------

/// Layer widths n_0..n_L plus one activation per layer. Identity activations
/// are reserved for the last layer unless explicitly allowed (linear networks
/// are useful as analytic test cases).
struct Architecture {
    std::vector<std::size_t> widths;       // n_0 .. n_L
    std::vector<ActivationKind> activations;  // length L

    Architecture() = default;
    Architecture(std::vector<std::size_t> w, std::vector<ActivationKind> acts,
                 bool allow_hidden_identity = false)
        : widths(std::move(w)), activations(std::move(acts)) {
        if (widths.size() < 2) fail("Architecture: need at least one layer");
        for (std::size_t n : widths)
            if (n == 0) fail("Architecture: zero width");
        if (activations.size() != widths.size() - 1)
            fail("Architecture: need one activation per layer");
        if (!allow_hidden_identity) {
            for (std::size_t l = 0; l + 1 < activations.size(); ++l)
                if (activations[l].kind == Activation::identity)
                    fail("Architecture: identity activation in hidden layer " + std::to_string(l + 1));
        }
    }

    /// All hidden layers share one activation; the last layer is linear.
    static Architecture dense(std::vector<std::size_t> widths, ActivationKind hidden) {
        std::vector<ActivationKind> acts(widths.size() - 1, hidden);
        acts.back() = ActivationKind::identity();
        return Architecture(std::move(widths), std::move(acts));
    }

    std::size_t depth() const { return widths.size() - 1; }  // L
    std::size_t input_dim() const { return widths.front(); }
    std::size_t output_dim() const { return widths.back(); }

    /// Total number of weight variables N = sum n_{l-1} * n_l.
    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1];
        return n;
    }
};

/// Weight matrices W_l (shape n_{l-1} x n_l) and frozen bias vectors b_l.
struct WeightSet {
    std::vector<Matrix> weights;  // weights[l] maps layer l to l+1 (0-based)
    std::vector<Vec> biases;

    void check_shapes(const Architecture& arch) const {
        const std::size_t L = arch.depth();
        if (weights.size() != L || biases.size() != L) fail("WeightSet: layer count mismatch");
        for (std::size_t l = 0; l < L; ++l) {
            if (weights[l].rows != arch.widths[l] || weights[l].cols != arch.widths[l + 1])
                fail("WeightSet: shape mismatch at layer " + std::to_string(l + 1));
            if (biases[l].size() != arch.widths[l + 1])
                fail("WeightSet: bias length mismatch at layer " + std::to_string(l + 1));
        }
    }
};

/// Packs weights into the parameter vector used by the Jacobian stack:
/// layer blocks ordered L down to 1, column-major vec within each layer.
inline Vec pack_weights(const WeightSet& ws) {
    Vec out;
    for (std::size_t li = ws.weights.size(); li-- > 0;) {
        Vec v = ws.weights[li].vec_colmajor();
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

inline WeightSet unpack_weights(const Architecture& arch, const Vec& packed, const WeightSet& bias_source) {
    if (packed.size() != arch.param_count()) fail("unpack_weights: wrong length");
    WeightSet ws;
    const std::size_t L = arch.depth();
    ws.weights.assign(L, Matrix());
    ws.biases = bias_source.biases;
    std::size_t off = 0;
    for (std::size_t li = L; li-- > 0;) {
        const std::size_t r = arch.widths[li], c = arch.widths[li + 1];
        Matrix w(r, c);
        for (std::size_t k = 0; k < c; ++k)
            for (std::size_t j = 0; j < r; ++j) w(j, k) = packed[off + k * r + j];
        off += r * c;
        ws.weights[li] = std::move(w);
    }
    return ws;
}

// ---------------------------------------------------------------------------
// Forward evaluation
// ---------------------------------------------------------------------------

/// Per-layer activations phi_0..phi_L and the diagonal first/second activation
/// derivatives the Jacobian calculus consumes.
struct ForwardTrace {
    std::vector<Vec> phis;          // length L+1
    std::vector<Vec> sigma_prime;   // length L, entry l for layer l+1
    std::vector<Vec> sigma_second;  // length L

    const Vec& output() const { return phis.back(); }
};

/// sigma(W^T x + b) entrywise. layer_index is only used in error messages.
inline Vec layer_map(const Matrix& w, const Vec& b, ActivationKind kind, const Vec& x,
                     std::size_t layer_index = 0) {
    if (w.rows != x.size() || w.cols != b.size())
        fail("layer_map: shape mismatch at layer " + std::to_string(layer_index));
    Vec z = tmatvec(w, x);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = activation_eval(kind, z[i] + b[i]).value;
    return z;
}

inline ForwardTrace forward(const Architecture& arch, const WeightSet& ws, const Vec& x) {
    if (x.size() != arch.input_dim()) fail("forward: input dimension mismatch");
    ws.check_shapes(arch);
    const std::size_t L = arch.depth();
    ForwardTrace t;
    t.phis.resize(L + 1);
    t.sigma_prime.resize(L);
    t.sigma_second.resize(L);
    t.phis[0] = x;
    for (std::size_t l = 0; l < L; ++l) {
        Vec z = tmatvec(ws.weights[l], t.phis[l]);
        const std::size_t n = z.size();
        Vec phi(n), sp(n), ss(n);
        for (std::size_t i = 0; i < n; ++i) {
            const ActivationValue av = activation_eval(arch.activations[l], z[i] + ws.biases[l][i]);
            phi[i] = av.value;
            sp[i] = av.first;
            ss[i] = av.second;
        }
        t.phis[l + 1] = std::move(phi);
        t.sigma_prime[l] = std::move(sp);
        t.sigma_second[l] = std::move(ss);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Initialisation
// ---------------------------------------------------------------------------

/// Gaussian init with entries scaled by scale/sqrt(n_{l-1}); every layer is
/// re-drawn (up to 10 times) until its numerical rank is full. Biases default
/// to zero; bias_scale > 0 draws small random constants instead (they are
/// never trained either way).
inline WeightSet init_weights(const Architecture& arch, std::uint64_t seed, double scale = 1.0,
                              double bias_scale = 0.0) {
    if (scale <= 0.0) fail("init_weights: scale must be positive");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    WeightSet ws;
    const std::size_t L = arch.depth();
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t r = arch.widths[l], c = arch.widths[l + 1];
        const double sd = scale / std::sqrt(static_cast<double>(r));
        Matrix w;
        bool ok = false;
        for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
            w = Matrix(r, c);
            for (double& v : w.data) v = sd * dist(gen);
            ok = numerical_rank(w) == std::min(r, c);
        }
        if (!ok) fail("init_weights: rank check failed after 10 retries at layer " + std::to_string(l + 1));
        ws.weights.push_back(std::move(w));
        Vec b(c, 0.0);
        if (bias_scale > 0.0)
            for (double& v : b) v = bias_scale * dist(gen);
        ws.biases.push_back(std::move(b));
    }
    return ws;
}

// ---------------------------------------------------------------------------
// Checkpoint format (canonical JSON, byte-exact round trip)
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json checkpoint_json(const Architecture& arch, const WeightSet& ws,
                                              std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["widths"] = arch.widths;
    nlohmann::ordered_json acts = nlohmann::ordered_json::array();
    for (const ActivationKind& a : arch.activations) {
        nlohmann::ordered_json e;
        e["kind"] = activation_name(a);
        e["slope"] = a.slope;
        acts.push_back(e);
    }
    j["activations"] = acts;
    nlohmann::ordered_json weights = nlohmann::ordered_json::array();
    for (const Matrix& w : ws.weights) {
        nlohmann::ordered_json e;
        e["rows"] = w.rows;
        e["cols"] = w.cols;
        e["entries"] = w.data;  // row-major
        weights.push_back(e);
    }
    j["weights"] = weights;
    j["biases"] = ws.biases;
    j["seed"] = seed;
    return j;
}

struct Checkpoint {
    Architecture arch;
    WeightSet ws;
    std::uint64_t seed = 0;
};

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    Checkpoint c;
    std::vector<std::size_t> widths = j.at("widths").get<std::vector<std::size_t>>();
    std::vector<ActivationKind> acts;
    for (const auto& e : j.at("activations"))
        acts.push_back(activation_from_name(e.at("kind").get<std::string>(), e.at("slope").get<double>()));
    c.arch = Architecture(std::move(widths), std::move(acts), /*allow_hidden_identity=*/true);
    for (const auto& e : j.at("weights")) {
        Matrix w(e.at("rows").get<std::size_t>(), e.at("cols").get<std::size_t>(),
                 e.at("entries").get<Vec>());
        c.ws.weights.push_back(std::move(w));
    }
    c.ws.biases = j.at("biases").get<std::vector<Vec>>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.ws.check_shapes(c.arch);
    return c;
}

inline void save_checkpoint(const std::string& path, const Architecture& arch, const WeightSet& ws,
                            std::uint64_t seed) {
    std::ofstream out(path);
    if (!out) fail("cannot open checkpoint file for writing: " + path);
    out << checkpoint_json(arch, ws, seed).dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open checkpoint file: " + path);
    nlohmann::json j;
    in >> j;
    return checkpoint_from_json(j);
}

}  // namespace mnl
