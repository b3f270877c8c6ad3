#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mnl/base.hpp"
#include "mnl/calculus.hpp"
#include "mnl/linalg.hpp"
#include "mnl/loss.hpp"
#include "mnl/network.hpp"

namespace mnl {

struct TrainConfig {
    std::size_t max_iters = 1000;
    double step_size = 0.1;
    double gradient_tol = 1e-8;
    double damping = 1e-3;       // Gauss-Newton
    std::uint64_t seed = 0;
    std::size_t log_every = 10;
    bool line_search = false;    // optional halving search for gradient descent
    bool track_rank = false;     // record rank of P(W) at logged iterations

    void check() const {
        if (gradient_tol <= 0.0) fail("TrainConfig: gradient_tol must be positive");
        if (step_size <= 0.0) fail("TrainConfig: step_size must be positive");
        if (damping < 0.0) fail("TrainConfig: damping must be non-negative");
        if (log_every == 0) fail("TrainConfig: log_every must be positive");
    }
};

struct TrainRecord {
    std::size_t iter = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    long rank_p = -1;  // -1 when rank tracking is off
    Vec min_sv;        // per weight matrix
    Vec max_sv;
};

/// Formats doubles with round-trip precision so logs are byte-stable.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct TrainLog {
    std::vector<TrainRecord> records;
    std::size_t iterations_run = 0;
    bool converged = false;

    /// CSV columns: iter,loss,grad_norm,rank_P,min_sv_W1..WL,max_sv_W1..WL.
    void write_csv(std::ostream& out) const {
        const std::size_t layers = records.empty() ? 0 : records.front().min_sv.size();
        out << "iter,loss,grad_norm,rank_P";
        for (std::size_t l = 1; l <= layers; ++l) out << ",min_sv_W" << l;
        for (std::size_t l = 1; l <= layers; ++l) out << ",max_sv_W" << l;
        out << "\n";
        for (const TrainRecord& r : records) {
            out << r.iter << "," << format_double(r.loss) << "," << format_double(r.grad_norm) << ","
                << r.rank_p;
            for (double v : r.min_sv) out << "," << format_double(v);
            for (double v : r.max_sv) out << "," << format_double(v);
            out << "\n";
        }
    }

    std::string to_csv() const {
        std::ostringstream ss;
        write_csv(ss);
        return ss.str();
    }
};

namespace detail {

inline TrainRecord make_record(std::size_t iter, double loss, double grad_norm,
                               const Architecture& arch, const WeightSet& ws, const Dataset& data,
                               bool track_rank) {
    TrainRecord r;
    r.iter = iter;
    r.loss = loss;
    r.grad_norm = grad_norm;
    for (const Matrix& w : ws.weights) {
        SvdResult dec = svd(w);
        r.min_sv.push_back(dec.singular_values.back());
        r.max_sv.push_back(dec.singular_values.front());
    }
    if (track_rank) r.rank_p = static_cast<long>(numerical_rank(assemble_p(arch, ws, data.inputs)));
    return r;
}

}  // namespace detail

/// Plain batch gradient descent on the packed weight vector. Biases stay
/// frozen throughout.
inline std::pair<WeightSet, TrainLog> train_gd(const Architecture& arch, const WeightSet& ws0,
                                               const Dataset& data, const LossKind& loss,
                                               const TrainConfig& cfg) {
    cfg.check();
    if (data.inputs.empty()) fail("train_gd: empty dataset");
    WeightSet ws = ws0;
    ws.check_shapes(arch);
    TrainLog log;
    Vec w = pack_weights(ws);
    for (std::size_t iter = 0; iter <= cfg.max_iters; ++iter) {
        auto [grad, value] = loss_gradient(arch, ws, data, loss);
        if (!std::isfinite(value)) fail("train_gd: non-finite loss at iteration " + std::to_string(iter));
        const double gnorm = norm2(grad);
        const bool stopping = gnorm <= cfg.gradient_tol || iter == cfg.max_iters;
        if (iter % cfg.log_every == 0 || stopping)
            log.records.push_back(detail::make_record(iter, value, gnorm, arch, ws, data, cfg.track_rank));
        log.iterations_run = iter;
        if (stopping) {
            log.converged = gnorm <= cfg.gradient_tol;
            break;
        }
        double step = cfg.step_size;
        if (cfg.line_search) {
            for (int halving = 0; halving <= 30; ++halving) {
                Vec trial = w;
                for (std::size_t i = 0; i < w.size(); ++i) trial[i] -= step * grad[i];
                WeightSet ws_trial = unpack_weights(arch, trial, ws);
                auto [g2, v2] = loss_gradient(arch, ws_trial, data, loss);
                (void)g2;
                if (std::isfinite(v2) && v2 < value) break;
                step *= 0.5;
            }
        }
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * grad[i];
        ws = unpack_weights(arch, w, ws);
    }
    return {std::move(ws), std::move(log)};
}

/// Damped Gauss-Newton using the stacked Jacobian P(W): each step solves
/// (P P^T / T + damping I) delta = -grad J, then halves the step until the
/// loss decreases (at most 30 halvings). The curvature surrogate comes
/// straight from grad J = P eps / T.
inline std::pair<WeightSet, TrainLog> train_gauss_newton(const Architecture& arch, const WeightSet& ws0,
                                                         const Dataset& data, const LossKind& loss,
                                                         const TrainConfig& cfg) {
    cfg.check();
    if (data.inputs.empty()) fail("train_gauss_newton: empty dataset");
    WeightSet ws = ws0;
    ws.check_shapes(arch);
    TrainLog log;
    const double inv_t = 1.0 / static_cast<double>(data.inputs.size());
    Vec w = pack_weights(ws);
    for (std::size_t iter = 0; iter <= cfg.max_iters; ++iter) {
        JacobianBundle bundle = jacobian_bundle(arch, ws, data, loss, /*keep_per_sample=*/false);
        if (!std::isfinite(bundle.total_loss))
            fail("train_gauss_newton: non-finite loss at iteration " + std::to_string(iter));
        const double gnorm = norm2(bundle.gradient);
        const bool stopping = gnorm <= cfg.gradient_tol || iter == cfg.max_iters;
        if (iter % cfg.log_every == 0 || stopping)
            log.records.push_back(
                detail::make_record(iter, bundle.total_loss, gnorm, arch, ws, data, cfg.track_rank));
        log.iterations_run = iter;
        if (stopping) {
            log.converged = gnorm <= cfg.gradient_tol;
            break;
        }

        Matrix gram = matmul(bundle.p_matrix, transpose(bundle.p_matrix));
        double diag_max = 0.0, diag_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < gram.rows; ++i) {
            gram.data[i * gram.cols + i] = gram(i, i) * inv_t + cfg.damping;
            for (std::size_t j = 0; j < gram.cols; ++j)
                if (i != j) gram(i, j) *= inv_t;
            diag_max = std::max(diag_max, gram(i, i));
            diag_min = std::min(diag_min, gram(i, i));
        }
        Vec rhs(bundle.gradient.size());
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -bundle.gradient[i];
        Vec delta;
        try {
            delta = cholesky_solve(gram, rhs);
        } catch (const error&) {
            fail("train_gauss_newton: linear solve failed (damping = " + format_double(cfg.damping) +
                 ", diagonal condition estimate = " + format_double(diag_max / std::max(diag_min, 1e-300)) +
                 ")");
        }

        double step = 1.0;
        bool accepted = false;
        for (int halving = 0; halving <= 30 && !accepted; ++halving) {
            Vec trial = w;
            for (std::size_t i = 0; i < w.size(); ++i) trial[i] += step * delta[i];
            WeightSet ws_trial = unpack_weights(arch, trial, ws);
            double v2 = 0.0;
            bool finite = true;
            for (std::size_t i = 0; i < data.inputs.size() && finite; ++i) {
                const double e =
                    loss_eval(loss, forward(arch, ws_trial, data.inputs[i]).output(), data.targets[i]).value;
                finite = std::isfinite(e);
                v2 += e;
            }
            v2 *= inv_t;
            if (finite && v2 < bundle.total_loss) {
                w = std::move(trial);
                ws = std::move(ws_trial);
                accepted = true;
            } else {
                step *= 0.5;
            }
        }
        if (!accepted) {
            // step halving exhausted: no descent direction at this damping
            log.converged = false;
            break;
        }
    }
    return {std::move(ws), std::move(log)};
}

/// Constructive version of the full-rank approximation: lift every singular
/// value below a floor to the floor, with the floor sized so the collection
/// distance stays within epsilon. Layers already at full numerical rank are
/// returned untouched.
inline WeightSet perturb_to_full_rank(const WeightSet& ws, double epsilon, std::uint64_t seed = 0) {
    if (epsilon <= 0.0) fail("perturb_to_full_rank: epsilon must be positive");
    std::size_t budget_dims = 0;
    for (const Matrix& w : ws.weights) budget_dims += std::min(w.rows, w.cols);
    const double floor = epsilon / std::sqrt(static_cast<double>(budget_dims));

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    WeightSet out = ws;
    for (Matrix& w : out.weights) {
        const std::size_t full = std::min(w.rows, w.cols);
        if (numerical_rank(w) == full) continue;
        bool ok = false;
        for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
            SvdResult dec = svd(w);
            Matrix lifted(w.rows, w.cols);
            for (std::size_t k = 0; k < full; ++k) {
                const double s = std::max(dec.singular_values[k], floor);
                for (std::size_t i = 0; i < w.rows; ++i)
                    for (std::size_t j = 0; j < w.cols; ++j)
                        lifted(i, j) += s * dec.left_vectors(i, k) * dec.right_vectors(j, k);
            }
            if (numerical_rank(lifted) == full) {
                w = std::move(lifted);
                ok = true;
            } else {
                // seeded nudge inside the remaining budget, then re-lift
                for (double& v : w.data) v += 0.01 * floor * dist(gen);
            }
        }
        if (!ok) fail("perturb_to_full_rank: rank lift failed after 10 attempts");
    }
    return out;
}

}  // namespace mnl
