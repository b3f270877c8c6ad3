#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mnl/base.hpp"
#include "mnl/calculus.hpp"
#include "mnl/diagnostics.hpp"
#include "mnl/linalg.hpp"
#include "mnl/loss.hpp"
#include "mnl/network.hpp"
#include "mnl/svg.hpp"
#include "mnl/training.hpp"

namespace mnl {

struct LabeledDataset {
    Dataset data;
    std::string generator;
    std::uint64_t seed = 0;
    nlohmann::ordered_json params;
};

/// Reads a labeled dataset from CSV with header x0,..,x{n-1},y0,..,y{m-1}.
inline LabeledDataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open dataset file: " + path);
    std::string header;
    if (!std::getline(in, header)) fail("dataset file is empty: " + path);
    std::size_t n_in = 0, n_out = 0;
    {
        std::stringstream ss(header);
        std::string col;
        while (std::getline(ss, col, ',')) {
            if (col.rfind("x", 0) == 0) ++n_in;
            else if (col.rfind("y", 0) == 0) ++n_out;
            else fail("dataset header column '" + col + "' must start with x or y");
        }
    }
    if (n_in == 0 || n_out == 0) fail("dataset header needs both x and y columns");
    LabeledDataset ds;
    ds.generator = "csv:" + path;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        Vec row;
        while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
        if (row.size() != n_in + n_out)
            fail("dataset line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                 " fields, expected " + std::to_string(n_in + n_out));
        ds.data.inputs.emplace_back(row.begin(), row.begin() + static_cast<long>(n_in));
        ds.data.targets.emplace_back(row.begin() + static_cast<long>(n_in), row.end());
    }
    if (ds.data.inputs.empty()) fail("dataset has no samples: " + path);
    return ds;
}

// ---------------------------------------------------------------------------
// Four-region classification benchmark
// ---------------------------------------------------------------------------

/// Class lookup: distance bands at radii 1, 2, 3 crossed with the side of the
/// anti-diagonal y = -x. The default table reproduces the class transition
/// 4 -> 2 -> 1 -> 2 -> 1 -> 3 along the main diagonal from (-4,-4) to (4,4).
struct FourRegionRule {
    std::array<double, 3> radii = {1.0, 2.0, 3.0};
    // [side][band]: side 0 is x + y < 0, band 0 is innermost
    std::array<std::array<int, 4>, 2> table = {{{2, 1, 2, 4}, {2, 1, 1, 3}}};

    int classify(double x, double y) const {
        const double d = std::hypot(x, y);
        int band = 0;
        while (band < 3 && d >= radii[band]) ++band;
        const int side = (x + y < 0.0) ? 0 : 1;
        return table[side][band];
    }
};

inline LabeledDataset gen_four_region(std::size_t n, std::uint64_t seed,
                                      const FourRegionRule& rule = {}) {
    if (n < 1) fail("gen_four_region: need at least one sample");
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> box(-4.0, 4.0);
    LabeledDataset out;
    out.generator = "four_region";
    out.seed = seed;
    out.params = {{"samples", n}};
    for (std::size_t i = 0; i < n; ++i) {
        const double x = box(gen), y = box(gen);
        Vec target(4, 0.0);
        target[rule.classify(x, y) - 1] = 1.0;
        out.data.inputs.push_back({x, y});
        out.data.targets.push_back(std::move(target));
    }
    return out;
}

struct DiagonalTrace {
    Vec param;                    // 0..1 along the segment (-4,-4) -> (4,4)
    std::vector<Vec> curves;      // one per output dimension
};

/// Network outputs along the main diagonal, sampled at `resolution` equally
/// spaced points including both endpoints.
inline DiagonalTrace trace_diagonal(const Architecture& arch, const WeightSet& ws,
                                    std::size_t resolution) {
    if (arch.input_dim() != 2) fail("trace_diagonal: input dimension must be 2");
    if (resolution < 2) fail("trace_diagonal: resolution must be at least 2");
    DiagonalTrace t;
    t.curves.assign(arch.output_dim(), Vec());
    for (std::size_t i = 0; i < resolution; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(resolution - 1);
        const double c = -4.0 + 8.0 * s;
        Vec out = forward(arch, ws, {c, c}).output();
        t.param.push_back(s);
        for (std::size_t d = 0; d < out.size(); ++d) t.curves[d].push_back(out[d]);
    }
    return t;
}

/// Consecutive-deduplicated argmax classes along a traced diagonal.
inline std::vector<int> diagonal_class_sequence(const DiagonalTrace& t) {
    std::vector<int> seq;
    for (std::size_t i = 0; i < t.param.size(); ++i) {
        int best = 0;
        for (std::size_t d = 1; d < t.curves.size(); ++d)
            if (t.curves[d][i] > t.curves[best][i]) best = static_cast<int>(d);
        if (seq.empty() || seq.back() != best + 1) seq.push_back(best + 1);
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Figure-eight (two-petal rose) regression
// ---------------------------------------------------------------------------

/// Ground-truth map from the unit circle to the figure eight:
/// (cos t, sin t) -> (cos t, sin t cos t). The images of t = pi/2 and 3pi/2
/// coincide at the origin.
inline Vec figure_eight_point(double t) { return {std::cos(t), std::sin(t) * std::cos(t)}; }

inline LabeledDataset gen_figure_eight(std::size_t n_points = 51, double noise_halfwidth = 0.05,
                                       std::uint64_t seed = 0) {
    if (n_points < 2) fail("gen_figure_eight: need at least two points");
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> noise(-noise_halfwidth, noise_halfwidth);
    LabeledDataset out;
    out.generator = "figure_eight";
    out.seed = seed;
    out.params = {{"points", n_points}, {"noise_halfwidth", noise_halfwidth}};
    for (std::size_t i = 0; i < n_points; ++i) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_points);
        Vec x = {std::cos(t), std::sin(t)};
        if (noise_halfwidth > 0.0) {
            x[0] += noise(gen);
            x[1] += noise(gen);
        }
        out.data.inputs.push_back(std::move(x));
        out.data.targets.push_back(figure_eight_point(t));
    }
    return out;
}

/// Mean distance between a predictor's output and the true figure-eight point
/// over a dense sweep of clean circle samples. The ground-truth map itself
/// scores exactly zero.
inline double figure_eight_generalization_error(const std::function<Vec(const Vec&)>& predict,
                                                std::size_t eval_points = 512) {
    double acc = 0.0;
    for (std::size_t i = 0; i < eval_points; ++i) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(eval_points);
        Vec x = {std::cos(t), std::sin(t)};
        acc += norm2(vec_sub(predict(x), figure_eight_point(t)));
    }
    return acc / static_cast<double>(eval_points);
}

// ---------------------------------------------------------------------------
// Swiss roll with arbitrary orientation
// ---------------------------------------------------------------------------

/// Orthogonalised Gaussian draw with sign-fixed diagonal of the implicit R
/// factor, so the same seed always yields the same Q.
inline Matrix random_orthogonal_3x3(std::uint64_t q_seed) {
    std::mt19937_64 gen(q_seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix a(3, 3);
    for (double& v : a.data) v = dist(gen);
    Matrix q = a;
    for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double proj = 0.0;
            for (std::size_t i = 0; i < 3; ++i) proj += q(i, k) * q(i, j);
            for (std::size_t i = 0; i < 3; ++i) q(i, j) -= proj * q(i, k);
        }
        double nrm = 0.0;
        for (std::size_t i = 0; i < 3; ++i) nrm += q(i, j) * q(i, j);
        nrm = std::sqrt(nrm);
        double sign_fix = 0.0;
        for (std::size_t i = 0; i < 3; ++i) sign_fix += q(i, j) * a(i, j);
        const double s = (sign_fix < 0.0 ? -1.0 : 1.0) / nrm;
        for (std::size_t i = 0; i < 3; ++i) q(i, j) *= s;
    }
    return q;
}

/// Points Q [t cos t, t sin t, r]^T with t in [0, 2pi), r in [-1, 1]; the
/// target discards the nuisance coordinate r and maps to (cos t, sin t).
inline LabeledDataset gen_swiss_roll(std::size_t n, std::uint64_t seed, std::uint64_t q_seed) {
    if (n < 1) fail("gen_swiss_roll: need at least one sample");
    const Matrix q = random_orthogonal_3x3(q_seed);
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> t_dist(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> r_dist(-1.0, 1.0);
    LabeledDataset out;
    out.generator = "swiss_roll";
    out.seed = seed;
    out.params = {{"samples", n}, {"q_seed", q_seed}};
    for (std::size_t i = 0; i < n; ++i) {
        const double t = t_dist(gen);
        const double r = r_dist(gen);
        Vec raw = {t * std::cos(t), t * std::sin(t), r};
        out.data.inputs.push_back(matvec(q, raw));
        out.data.targets.push_back({std::cos(t), std::sin(t)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment reports
// ---------------------------------------------------------------------------

struct ExperimentReport {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    nlohmann::ordered_json config_echo;

    std::string metrics_csv() const {
        std::string out;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out += ",";
            out += columns[i];
        }
        out += "\n";
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ",";
                out += row[i];
            }
            out += "\n";
        }
        return out;
    }
};

inline void write_report_files(const std::string& dir, const ExperimentReport& report) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir + "/metrics.csv");
        if (!out) fail("cannot write metrics.csv under " + dir);
        out << report.metrics_csv();
    }
    {
        std::ofstream out(dir + "/config.json");
        if (!out) fail("cannot write config.json under " + dir);
        out << report.config_echo.dump(2) << "\n";
    }
}

/// Runs fn(cell) for cells 0..n-1 on up to `jobs` threads. Results must be
/// written to per-cell slots; the caller then reduces in cell order.
inline void parallel_cells(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(jobs, n);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (std::thread& th : pool) th.join();
}

namespace detail {

inline std::pair<WeightSet, TrainLog> run_trainer(const std::string& trainer, const Architecture& arch,
                                                  const WeightSet& ws0, const Dataset& data,
                                                  const LossKind& loss, const TrainConfig& cfg) {
    if (trainer == "gd") return train_gd(arch, ws0, data, loss, cfg);
    if (trainer == "gauss_newton") return train_gauss_newton(arch, ws0, data, loss, cfg);
    fail("unknown trainer '" + trainer + "' (expected gd or gauss_newton)");
}

inline double quantile(const Vec& sorted, double p) {
    if (sorted.empty()) fail("quantile of empty sample");
    const double idx = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const double frac = idx - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Runner: four-region classification (diagonal tracking)
// ---------------------------------------------------------------------------

struct FourRegionConfig {
    std::size_t samples = 1000;
    std::vector<std::size_t> widths = {2, 10, 10, 10, 4};
    double slope = 1.0;
    std::string trainer = "gauss_newton";
    LossKind loss = LossKind::smoothed_l1(1e-6);
    TrainConfig train{/*max_iters=*/100, /*step_size=*/0.5, /*gradient_tol=*/1e-7,
                      /*damping=*/1e-4, /*seed=*/1, /*log_every=*/10};
    std::uint64_t seed = 1;
    std::size_t resolution = 257;
    FourRegionRule rule;

    nlohmann::ordered_json echo() const {
        return {{"experiment", "four-region"}, {"samples", samples}, {"widths", widths},
                {"slope", slope}, {"trainer", trainer}, {"loss", loss_name(loss)},
                {"max_iters", train.max_iters}, {"damping", train.damping},
                {"step_size", train.step_size}, {"gradient_tol", train.gradient_tol},
                {"seed", seed}, {"resolution", resolution}};
    }
};

struct FourRegionResult {
    ExperimentReport report;
    double train_accuracy = 0.0;
    double final_loss = 0.0;
    std::vector<int> sequence_before;
    std::vector<int> sequence_after;
    DiagonalTrace trace_before;
    DiagonalTrace trace_after;
    WeightSet trained;
    Architecture arch;
};

inline std::string sequence_string(const std::vector<int>& seq) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out += "-";
        out += std::to_string(seq[i]);
    }
    return out;
}

inline FourRegionResult run_four_region(const FourRegionConfig& cfg, const std::string& out_dir = "") {
    FourRegionResult res;
    res.arch = Architecture::dense(cfg.widths, ActivationKind::sigmoid(cfg.slope));
    LabeledDataset ds = gen_four_region(cfg.samples, cfg.seed, cfg.rule);
    WeightSet ws0 = init_weights(res.arch, cfg.seed);

    res.trace_before = trace_diagonal(res.arch, ws0, cfg.resolution);
    res.sequence_before = diagonal_class_sequence(res.trace_before);

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    auto [trained, log] = detail::run_trainer(cfg.trainer, res.arch, ws0, ds.data, cfg.loss, tc);
    res.trained = std::move(trained);
    res.final_loss = log.records.empty() ? 0.0 : log.records.back().loss;

    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.data.size(); ++i) {
        Vec out = forward(res.arch, res.trained, ds.data.inputs[i]).output();
        std::size_t best = 0, truth = 0;
        for (std::size_t d = 1; d < out.size(); ++d)
            if (out[d] > out[best]) best = d;
        for (std::size_t d = 0; d < 4; ++d)
            if (ds.data.targets[i][d] == 1.0) truth = d;
        if (best == truth) ++correct;
    }
    res.train_accuracy = static_cast<double>(correct) / static_cast<double>(ds.data.size());

    res.trace_after = trace_diagonal(res.arch, res.trained, cfg.resolution);
    res.sequence_after = diagonal_class_sequence(res.trace_after);

    res.report.name = "four-region";
    res.report.columns = {"metric", "value"};
    res.report.rows = {{"train_accuracy", format_double(res.train_accuracy)},
                       {"final_loss", format_double(res.final_loss)},
                       {"iterations", std::to_string(log.iterations_run)},
                       {"sequence_before", sequence_string(res.sequence_before)},
                       {"sequence_after", sequence_string(res.sequence_after)}};
    res.report.config_echo = cfg.echo();

    if (!out_dir.empty()) {
        write_report_files(out_dir, res.report);
        std::vector<PlotSeries> series;
        const std::array<std::string, 4> colors = {"#1f6fb4", "#c44e52", "#55a868", "#8172b2"};
        for (std::size_t d = 0; d < 4; ++d) {
            series.push_back({"dim " + std::to_string(d + 1) + " before", res.trace_before.param,
                              res.trace_before.curves[d], colors[d], true});
            series.push_back({"dim " + std::to_string(d + 1) + " after", res.trace_after.param,
                              res.trace_after.curves[d], colors[d], false});
        }
        write_line_plot(out_dir + "/plot_diagonal.svg", "Outputs along the diagonal", series);
        std::ofstream log_out(out_dir + "/trainlog.csv");
        log.write_csv(log_out);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Runner: figure-eight slope sweep
// ---------------------------------------------------------------------------

struct SlopeSweepConfig {
    std::vector<double> slopes = {1.0, 5.0, 10.0};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<std::size_t> widths = {2, 10, 10, 2};
    std::size_t n_points = 51;
    double noise_halfwidth = 0.05;
    std::size_t eval_points = 512;
    std::string trainer = "gauss_newton";
    LossKind loss = LossKind::smoothed_l1(1e-6);
    TrainConfig train{/*max_iters=*/300, /*step_size=*/0.5, /*gradient_tol=*/1e-9,
                      /*damping=*/1e-5, /*seed=*/1, /*log_every=*/50};
    std::size_t jobs = 1;

    nlohmann::ordered_json echo() const {
        return {{"experiment", "figure-eight"}, {"slopes", slopes}, {"seeds", seeds},
                {"widths", widths}, {"points", n_points}, {"noise_halfwidth", noise_halfwidth},
                {"eval_points", eval_points}, {"trainer", trainer}, {"loss", loss_name(loss)},
                {"max_iters", train.max_iters}, {"damping", train.damping},
                {"gradient_tol", train.gradient_tol}};
    }
};

struct SlopeSweepCell {
    double slope = 0.0;
    std::uint64_t seed = 0;
    std::string status = "ok";
    double train_loss = 0.0;
    double generalization_error = 0.0;
    Architecture arch;
    WeightSet trained;
};

struct SlopeSweepResult {
    ExperimentReport report;
    std::vector<SlopeSweepCell> cells;        // slope-major, seed-minor order
    std::vector<double> mean_per_slope;
    std::vector<double> variance_per_slope;
};

inline SlopeSweepResult run_slope_sweep(const SlopeSweepConfig& cfg, const std::string& out_dir = "") {
    for (double a : cfg.slopes)
        if (a <= 0.0) fail("run_slope_sweep: slopes must be positive");
    if (cfg.slopes.empty() || cfg.seeds.empty()) fail("run_slope_sweep: empty sweep");

    SlopeSweepResult res;
    res.cells.assign(cfg.slopes.size() * cfg.seeds.size(), SlopeSweepCell{});
    parallel_cells(res.cells.size(), cfg.jobs, [&](std::size_t idx) {
        const std::size_t si = idx / cfg.seeds.size();
        const std::size_t ki = idx % cfg.seeds.size();
        SlopeSweepCell& cell = res.cells[idx];
        cell.slope = cfg.slopes[si];
        cell.seed = cfg.seeds[ki];
        cell.arch = Architecture::dense(cfg.widths, ActivationKind::sigmoid(cell.slope));
        try {
            LabeledDataset ds = gen_figure_eight(cfg.n_points, cfg.noise_halfwidth, cell.seed);
            WeightSet ws0 = init_weights(cell.arch, cell.seed);
            TrainConfig tc = cfg.train;
            tc.seed = cell.seed;
            auto [trained, log] = detail::run_trainer(cfg.trainer, cell.arch, ws0, ds.data, cfg.loss, tc);
            cell.trained = std::move(trained);
            cell.train_loss = log.records.empty() ? 0.0 : log.records.back().loss;
            cell.generalization_error = figure_eight_generalization_error(
                [&](const Vec& x) { return forward(cell.arch, cell.trained, x).output(); },
                cfg.eval_points);
        } catch (const std::exception& e) {
            cell.status = std::string("failed: ") + e.what();
            cell.train_loss = std::numeric_limits<double>::quiet_NaN();
            cell.generalization_error = std::numeric_limits<double>::quiet_NaN();
        }
    });

    for (std::size_t si = 0; si < cfg.slopes.size(); ++si) {
        double mean = 0.0;
        std::size_t n_ok = 0;
        for (std::size_t ki = 0; ki < cfg.seeds.size(); ++ki) {
            const SlopeSweepCell& cell = res.cells[si * cfg.seeds.size() + ki];
            if (cell.status == "ok") {
                mean += cell.generalization_error;
                ++n_ok;
            }
        }
        mean = n_ok ? mean / static_cast<double>(n_ok) : std::numeric_limits<double>::quiet_NaN();
        double var = 0.0;
        for (std::size_t ki = 0; ki < cfg.seeds.size(); ++ki) {
            const SlopeSweepCell& cell = res.cells[si * cfg.seeds.size() + ki];
            if (cell.status == "ok") var += (cell.generalization_error - mean) * (cell.generalization_error - mean);
        }
        var = n_ok > 1 ? var / static_cast<double>(n_ok - 1) : 0.0;
        res.mean_per_slope.push_back(mean);
        res.variance_per_slope.push_back(var);
    }

    res.report.name = "figure-eight";
    res.report.columns = {"slope", "seed", "status", "train_loss", "generalization_error"};
    for (const SlopeSweepCell& cell : res.cells)
        res.report.rows.push_back({format_double(cell.slope), std::to_string(cell.seed), cell.status,
                                   format_double(cell.train_loss),
                                   format_double(cell.generalization_error)});
    res.report.config_echo = cfg.echo();

    if (!out_dir.empty()) {
        write_report_files(out_dir, res.report);
        // one truth-vs-learned overlay per slope, first seed
        for (std::size_t si = 0; si < cfg.slopes.size(); ++si) {
            const SlopeSweepCell& cell = res.cells[si * cfg.seeds.size()];
            if (cell.status != "ok") continue;
            Vec tx, ty, lx, ly;
            for (std::size_t i = 0; i <= 256; ++i) {
                const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / 256.0;
                Vec truth = figure_eight_point(t);
                tx.push_back(truth[0]);
                ty.push_back(truth[1]);
                Vec learned = forward(cell.arch, cell.trained, {std::cos(t), std::sin(t)}).output();
                lx.push_back(learned[0]);
                ly.push_back(learned[1]);
            }
            std::vector<PlotSeries> series = {{"ground truth", tx, ty, "#c44e52", false},
                                              {"learned", lx, ly, "#1f6fb4", true}};
            char name[64];
            std::snprintf(name, sizeof(name), "/plot_fit_a%g.svg", cfg.slopes[si]);
            write_line_plot(out_dir + name, "Figure eight, slope " + format_double(cfg.slopes[si]),
                            series);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Runner: Swiss-roll representation comparison
// ---------------------------------------------------------------------------

struct SwissRollConfig {
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<std::size_t> widths_lossless = {3, 10, 10, 10, 2};
    std::vector<std::size_t> widths_bottleneck = {3, 10, 10, 1, 10, 2};
    std::size_t train_samples = 500;
    std::size_t test_samples = 1000;
    double slope = 1.0;
    std::string trainer = "gauss_newton";
    LossKind loss = LossKind::smoothed_l1(1e-6);
    TrainConfig train{/*max_iters=*/200, /*step_size=*/0.5, /*gradient_tol=*/1e-8,
                      /*damping=*/1e-4, /*seed=*/1, /*log_every=*/25};
    std::size_t jobs = 1;

    nlohmann::ordered_json echo() const {
        return {{"experiment", "swiss-roll"}, {"seeds", seeds},
                {"widths_lossless", widths_lossless}, {"widths_bottleneck", widths_bottleneck},
                {"train_samples", train_samples}, {"test_samples", test_samples}, {"slope", slope},
                {"trainer", trainer}, {"loss", loss_name(loss)}, {"max_iters", train.max_iters},
                {"damping", train.damping}, {"gradient_tol", train.gradient_tol}};
    }
};

struct SwissRollCell {
    std::uint64_t seed = 0;
    std::string architecture;  // "lossless" or "bottleneck"
    std::string status = "ok";
    Vec errors;                // per-test-sample l2 prediction errors
    double mean = 0.0, min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct SwissRollResult {
    ExperimentReport report;
    std::vector<SwissRollCell> cells;  // seed-major, lossless before bottleneck
    WidthAdvisory advisory_lossless;
    WidthAdvisory advisory_bottleneck;
};

inline SwissRollResult run_representation_compare(const SwissRollConfig& cfg,
                                                  const std::string& out_dir = "") {
    if (cfg.seeds.empty()) fail("run_representation_compare: empty seed list");
    SwissRollResult res;
    res.cells.assign(cfg.seeds.size() * 2, SwissRollCell{});

    const Architecture arch_a = Architecture::dense(cfg.widths_lossless, ActivationKind::sigmoid(cfg.slope));
    const Architecture arch_b =
        Architecture::dense(cfg.widths_bottleneck, ActivationKind::sigmoid(cfg.slope));
    res.advisory_lossless = width_advisory(arch_a, 2);
    res.advisory_bottleneck = width_advisory(arch_b, 2);

    parallel_cells(res.cells.size(), cfg.jobs, [&](std::size_t idx) {
        const std::size_t seed_idx = idx / 2;
        const bool bottleneck = idx % 2 == 1;
        SwissRollCell& cell = res.cells[idx];
        cell.seed = cfg.seeds[seed_idx];
        cell.architecture = bottleneck ? "bottleneck" : "lossless";
        const Architecture& arch = bottleneck ? arch_b : arch_a;
        try {
            // both architectures share the same data per seed
            LabeledDataset train_set = gen_swiss_roll(cfg.train_samples, cell.seed * 1000 + 1, cell.seed);
            LabeledDataset test_set = gen_swiss_roll(cfg.test_samples, cell.seed * 1000 + 2, cell.seed);
            WeightSet ws0 = init_weights(arch, cell.seed);
            TrainConfig tc = cfg.train;
            tc.seed = cell.seed;
            auto [trained, log] = detail::run_trainer(cfg.trainer, arch, ws0, train_set.data, cfg.loss, tc);
            (void)log;
            for (std::size_t i = 0; i < test_set.data.size(); ++i) {
                Vec out = forward(arch, trained, test_set.data.inputs[i]).output();
                cell.errors.push_back(norm2(vec_sub(out, test_set.data.targets[i])));
            }
            Vec sorted = cell.errors;
            std::sort(sorted.begin(), sorted.end());
            cell.min = sorted.front();
            cell.q1 = detail::quantile(sorted, 0.25);
            cell.median = detail::quantile(sorted, 0.5);
            cell.q3 = detail::quantile(sorted, 0.75);
            cell.max = sorted.back();
            for (double e : cell.errors) cell.mean += e;
            cell.mean /= static_cast<double>(cell.errors.size());
        } catch (const std::exception& e) {
            cell.status = std::string("failed: ") + e.what();
            cell.mean = cell.min = cell.q1 = cell.median = cell.q3 = cell.max =
                std::numeric_limits<double>::quiet_NaN();
        }
    });

    res.report.name = "swiss-roll";
    res.report.columns = {"seed", "architecture", "status", "mean", "min", "q1", "median", "q3", "max"};
    for (const SwissRollCell& cell : res.cells)
        res.report.rows.push_back({std::to_string(cell.seed), cell.architecture, cell.status,
                                   format_double(cell.mean), format_double(cell.min),
                                   format_double(cell.q1), format_double(cell.median),
                                   format_double(cell.q3), format_double(cell.max)});
    res.report.config_echo = cfg.echo();

    if (!out_dir.empty()) {
        write_report_files(out_dir, res.report);
        // pooled box plot across seeds, one box per architecture
        Vec pooled_a, pooled_b;
        for (const SwissRollCell& cell : res.cells) {
            if (cell.status != "ok") continue;
            Vec& dst = cell.architecture == "lossless" ? pooled_a : pooled_b;
            dst.insert(dst.end(), cell.errors.begin(), cell.errors.end());
        }
        std::vector<BoxStats> boxes;
        for (auto* pooled : {&pooled_a, &pooled_b}) {
            if (pooled->empty()) continue;
            std::sort(pooled->begin(), pooled->end());
            BoxStats b;
            b.label = pooled == &pooled_a ? "lossless" : "bottleneck";
            b.min = pooled->front();
            b.q1 = detail::quantile(*pooled, 0.25);
            b.median = detail::quantile(*pooled, 0.5);
            b.q3 = detail::quantile(*pooled, 0.75);
            b.max = pooled->back();
            boxes.push_back(b);
        }
        write_box_plot(out_dir + "/plot_box.svg", "Test l2 prediction error", boxes);
    }
    return res;
}

}  // namespace mnl
