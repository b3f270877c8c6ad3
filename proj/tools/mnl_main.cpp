// mnl: train smooth feedforward networks, certify the rank condition of
// their stacked Jacobian, verify the derivative calculus against finite
// differences, and reproduce the bundled experiments.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mnl/mnl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Config handling: one JSON document, version-tagged, unknown keys rejected
// ---------------------------------------------------------------------------

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& context) {
    if (!j.is_object()) mnl::fail("config section '" + context + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) mnl::fail("unknown key '" + key + "' in " + context);
    }
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) mnl::fail("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        mnl::fail("config parse error in " + path + ": " + e.what());
    }
    check_keys(j, {"version", "seed", "architecture", "init", "dataset", "loss", "trainer",
                   "experiment", "diagnose"},
               "top level");
    if (!j.contains("version")) mnl::fail("config is missing the version field");
    if (j.at("version").get<int>() != 1) mnl::fail("unsupported config version (expected 1)");
    return j;
}

mnl::Architecture parse_architecture(const json& j) {
    check_keys(j, {"widths", "hidden_activation", "slope", "activations", "allow_hidden_identity"},
               "architecture");
    auto widths = j.at("widths").get<std::vector<std::size_t>>();
    const bool allow_hidden_identity = j.value("allow_hidden_identity", false);
    if (j.contains("activations")) {
        std::vector<mnl::ActivationKind> acts;
        for (const auto& e : j.at("activations")) {
            check_keys(e, {"kind", "slope"}, "architecture.activations[]");
            acts.push_back(mnl::activation_from_name(e.at("kind").get<std::string>(),
                                                     e.value("slope", 1.0)));
        }
        return mnl::Architecture(std::move(widths), std::move(acts), allow_hidden_identity);
    }
    const std::string hidden = j.value("hidden_activation", "sigmoid");
    const double slope = j.value("slope", 1.0);
    return mnl::Architecture::dense(std::move(widths), mnl::activation_from_name(hidden, slope));
}

mnl::LossKind parse_loss(const json& j) {
    check_keys(j, {"kind", "beta", "gamma"}, "loss");
    return mnl::loss_from_name(j.value("kind", "smoothed_l1"), j.value("beta", 1e-6),
                               j.value("gamma", 1.0));
}

struct TrainerSpec {
    std::string kind = "gauss_newton";
    mnl::TrainConfig cfg;
};

TrainerSpec parse_trainer(const json& j) {
    check_keys(j, {"kind", "max_iters", "step_size", "gradient_tol", "damping", "log_every",
                   "track_rank", "line_search"},
               "trainer");
    TrainerSpec spec;
    spec.kind = j.value("kind", "gauss_newton");
    if (spec.kind != "gd" && spec.kind != "gauss_newton")
        mnl::fail("trainer.kind must be gd or gauss_newton");
    spec.cfg.max_iters = j.value("max_iters", std::size_t{1000});
    spec.cfg.step_size = j.value("step_size", 0.1);
    spec.cfg.gradient_tol = j.value("gradient_tol", 1e-8);
    spec.cfg.damping = j.value("damping", 1e-3);
    spec.cfg.log_every = j.value("log_every", std::size_t{10});
    spec.cfg.track_rank = j.value("track_rank", false);
    spec.cfg.line_search = j.value("line_search", false);
    spec.cfg.check();
    return spec;
}

mnl::LabeledDataset parse_dataset(const json& j, std::uint64_t seed) {
    check_keys(j, {"generator", "csv", "samples", "points", "noise_halfwidth", "q_seed", "seed"},
               "dataset");
    if (j.contains("csv")) return mnl::load_dataset_csv(j.at("csv").get<std::string>());
    const std::string gen = j.value("generator", "");
    const std::uint64_t ds_seed = j.value("seed", seed);
    if (gen == "four_region") return mnl::gen_four_region(j.value("samples", std::size_t{1000}), ds_seed);
    if (gen == "figure_eight")
        return mnl::gen_figure_eight(j.value("points", std::size_t{51}), j.value("noise_halfwidth", 0.05),
                                     ds_seed);
    if (gen == "swiss_roll")
        return mnl::gen_swiss_roll(j.value("samples", std::size_t{500}), ds_seed,
                                   j.value("q_seed", ds_seed));
    mnl::fail("dataset needs either csv or generator in {four_region, figure_eight, swiss_roll}");
}

std::string timestamp_dir(const std::string& base, const std::string& experiment) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm_utc{};
    gmtime_r(&tt, &tm_utc);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm_utc);
    std::string dir = base + "/" + experiment + "/" + stamp;
    std::string candidate = dir;
    for (int suffix = 2; fs::exists(candidate); ++suffix) candidate = dir + "-" + std::to_string(suffix);
    return candidate;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
    json cfg = load_config(config_path);
    if (!cfg.contains("architecture")) mnl::fail("train config needs an architecture section");
    if (!cfg.contains("dataset")) mnl::fail("train config needs a dataset section");

    const std::uint64_t seed = seed_override.value_or(cfg.value("seed", std::uint64_t{1}));
    mnl::Architecture arch = parse_architecture(cfg.at("architecture"));
    mnl::LabeledDataset ds = parse_dataset(cfg.at("dataset"), seed);
    mnl::LossKind loss = cfg.contains("loss") ? parse_loss(cfg.at("loss")) : mnl::LossKind::smoothed_l1();
    TrainerSpec trainer = cfg.contains("trainer") ? parse_trainer(cfg.at("trainer")) : TrainerSpec{};
    trainer.cfg.seed = seed;

    double init_scale = 1.0, bias_scale = 0.0;
    if (cfg.contains("init")) {
        check_keys(cfg.at("init"), {"scale", "bias_scale"}, "init");
        init_scale = cfg.at("init").value("scale", 1.0);
        bias_scale = cfg.at("init").value("bias_scale", 0.0);
    }
    if (ds.data.inputs.front().size() != arch.input_dim() ||
        ds.data.targets.front().size() != arch.output_dim())
        mnl::fail("dataset dimensions do not match the architecture");

    mnl::WeightSet ws0 = mnl::init_weights(arch, seed, init_scale, bias_scale);
    mnl::log_info("training " + trainer.kind + " on " + std::to_string(ds.data.size()) + " samples, N = " +
                  std::to_string(arch.param_count()));
    auto [trained, log] = trainer.kind == "gd"
                              ? mnl::train_gd(arch, ws0, ds.data, loss, trainer.cfg)
                              : mnl::train_gauss_newton(arch, ws0, ds.data, loss, trainer.cfg);

    fs::create_directories(out_dir);
    mnl::save_checkpoint(out_dir + "/checkpoint.json", arch, trained, seed);
    std::ofstream log_out(out_dir + "/trainlog.csv");
    if (!log_out) mnl::fail("cannot write trainlog.csv under " + out_dir);
    log.write_csv(log_out);
    const auto& last = log.records.back();
    mnl::log_info("done: loss " + mnl::format_double(last.loss) + ", gradient norm " +
                  mnl::format_double(last.grad_norm) + (log.converged ? " (converged)" : ""));
    return 0;
}

int cmd_diagnose(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override) {
    json cfg = load_config(config_path);
    if (!cfg.contains("diagnose")) mnl::fail("diagnose config needs a diagnose section");
    const json& d = cfg.at("diagnose");
    check_keys(d, {"checkpoint", "data_dim", "exactness_tol", "tol_factor", "probes"}, "diagnose");
    if (!d.contains("checkpoint")) mnl::fail("diagnose config needs diagnose.checkpoint");
    if (!cfg.contains("dataset")) mnl::fail("diagnose config needs a dataset section");

    mnl::Checkpoint ckpt = mnl::load_checkpoint(d.at("checkpoint").get<std::string>());
    const std::uint64_t seed = seed_override.value_or(cfg.value("seed", ckpt.seed));
    mnl::LabeledDataset ds = parse_dataset(cfg.at("dataset"), seed);
    mnl::LossKind loss = cfg.contains("loss") ? parse_loss(cfg.at("loss")) : mnl::LossKind::smoothed_l1();

    const double exactness_tol = d.value("exactness_tol", 1e-4);
    const double tol_factor = d.value("tol_factor", 1.0);
    const std::size_t data_dim = d.value("data_dim", ckpt.arch.input_dim());
    const std::size_t n_probes = d.value("probes", std::size_t{32});

    auto cert = mnl::certify_rank_condition(ckpt.arch, ckpt.ws, ds.data, loss, tol_factor, exactness_tol);
    auto layers = mnl::classify_layers(ckpt.arch, ckpt.ws, ds.data.inputs.front());
    auto advisory = mnl::chain_advisory(ckpt.arch, layers);
    auto width = mnl::width_advisory(ckpt.arch, data_dim);
    std::vector<mnl::Vec> probes(ds.data.inputs.begin(),
                                 ds.data.inputs.begin() +
                                     static_cast<long>(std::min(n_probes, ds.data.inputs.size())));
    auto lip = mnl::lipschitz_estimates(ckpt.arch, ckpt.ws, probes);

    ordered_json report = mnl::diagnostics_report(cert, layers, advisory, width, lip);
    fs::create_directories(out_dir);
    std::ofstream out(out_dir + "/diagnostics.json");
    if (!out) mnl::fail("cannot write diagnostics.json under " + out_dir);
    out << report.dump(2) << "\n";
    mnl::log_info("verdict: " + mnl::verdict_name(cert.verdict));
    return 0;
}

int cmd_verify(std::uint64_t seed, int trials, double corruption) {
    mnl::VerifyOptions opts;
    opts.seed = seed;
    opts.trials = trials;
    opts.corruption = corruption;
    auto reports = mnl::run_oracle_suites(opts);
    bool all_ok = true;
    for (const auto& r : reports) {
        std::printf("oracle %-28s max_error %.3e tolerance %.0e trials %3d [%s]\n", r.name.c_str(),
                    r.max_error, r.tolerance, r.trials, r.pass() ? "ok" : "FAIL");
        all_ok = all_ok && r.pass();
    }
    return all_ok ? 0 : 1;
}

int cmd_experiment(const std::string& name, const std::string& config_path, const std::string& out_base,
                   std::optional<std::uint64_t> seed_override, std::size_t jobs) {
    json exp = json::object();
    if (!config_path.empty()) {
        json cfg = load_config(config_path);
        if (cfg.contains("experiment")) exp = cfg.at("experiment");
    }

    if (name == "four-region") {
        check_keys(exp, {"name", "samples", "widths", "slope", "trainer", "max_iters", "damping",
                         "step_size", "gradient_tol", "log_every", "resolution", "seed"},
                   "experiment");
        mnl::FourRegionConfig c;
        c.samples = exp.value("samples", c.samples);
        if (exp.contains("widths")) c.widths = exp.at("widths").get<std::vector<std::size_t>>();
        c.slope = exp.value("slope", c.slope);
        c.trainer = exp.value("trainer", c.trainer);
        c.train.max_iters = exp.value("max_iters", c.train.max_iters);
        c.train.damping = exp.value("damping", c.train.damping);
        c.train.step_size = exp.value("step_size", c.train.step_size);
        c.train.gradient_tol = exp.value("gradient_tol", c.train.gradient_tol);
        c.train.log_every = exp.value("log_every", c.train.log_every);
        c.resolution = exp.value("resolution", c.resolution);
        c.seed = seed_override.value_or(exp.value("seed", c.seed));
        const std::string dir = timestamp_dir(out_base, name);
        auto res = mnl::run_four_region(c, dir);
        mnl::log_info("four-region: accuracy " + mnl::format_double(res.train_accuracy) + ", sequence " +
                      mnl::sequence_string(res.sequence_after) + " -> " + dir);
        return 0;
    }
    if (name == "figure-eight") {
        check_keys(exp, {"name", "slopes", "seeds", "widths", "points", "noise_halfwidth",
                         "eval_points", "trainer", "max_iters", "damping", "step_size",
                         "gradient_tol", "log_every"},
                   "experiment");
        mnl::SlopeSweepConfig c;
        if (exp.contains("slopes")) c.slopes = exp.at("slopes").get<std::vector<double>>();
        if (exp.contains("seeds")) c.seeds = exp.at("seeds").get<std::vector<std::uint64_t>>();
        if (exp.contains("widths")) c.widths = exp.at("widths").get<std::vector<std::size_t>>();
        c.n_points = exp.value("points", c.n_points);
        c.noise_halfwidth = exp.value("noise_halfwidth", c.noise_halfwidth);
        c.eval_points = exp.value("eval_points", c.eval_points);
        c.trainer = exp.value("trainer", c.trainer);
        c.train.max_iters = exp.value("max_iters", c.train.max_iters);
        c.train.damping = exp.value("damping", c.train.damping);
        c.train.step_size = exp.value("step_size", c.train.step_size);
        c.train.gradient_tol = exp.value("gradient_tol", c.train.gradient_tol);
        c.train.log_every = exp.value("log_every", c.train.log_every);
        if (seed_override) c.seeds = {*seed_override};
        c.jobs = jobs;
        const std::string dir = timestamp_dir(out_base, name);
        auto res = mnl::run_slope_sweep(c, dir);
        std::string means;
        for (double m : res.mean_per_slope) means += " " + mnl::format_double(m);
        mnl::log_info("figure-eight: mean errors per slope" + means + " -> " + dir);
        return 0;
    }
    if (name == "swiss-roll") {
        check_keys(exp, {"name", "seeds", "widths_lossless", "widths_bottleneck", "train_samples",
                         "test_samples", "slope", "trainer", "max_iters", "damping", "step_size",
                         "gradient_tol", "log_every"},
                   "experiment");
        mnl::SwissRollConfig c;
        if (exp.contains("seeds")) c.seeds = exp.at("seeds").get<std::vector<std::uint64_t>>();
        if (exp.contains("widths_lossless"))
            c.widths_lossless = exp.at("widths_lossless").get<std::vector<std::size_t>>();
        if (exp.contains("widths_bottleneck"))
            c.widths_bottleneck = exp.at("widths_bottleneck").get<std::vector<std::size_t>>();
        c.train_samples = exp.value("train_samples", c.train_samples);
        c.test_samples = exp.value("test_samples", c.test_samples);
        c.slope = exp.value("slope", c.slope);
        c.trainer = exp.value("trainer", c.trainer);
        c.train.max_iters = exp.value("max_iters", c.train.max_iters);
        c.train.damping = exp.value("damping", c.train.damping);
        c.train.step_size = exp.value("step_size", c.train.step_size);
        c.train.gradient_tol = exp.value("gradient_tol", c.train.gradient_tol);
        c.train.log_every = exp.value("log_every", c.train.log_every);
        if (seed_override) c.seeds = {*seed_override};
        c.jobs = jobs;
        const std::string dir = timestamp_dir(out_base, name);
        auto res = mnl::run_representation_compare(c, dir);
        mnl::log_info("swiss-roll: " + std::to_string(res.cells.size()) + " cells -> " + dir);
        return 0;
    }
    mnl::fail("unknown experiment '" + name + "' (valid: four-region, figure-eight, swiss-roll)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for smooth feedforward networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::string experiment_out = "runs";
    std::optional<std::uint64_t> seed_override;
    std::size_t jobs = 1;

    CLI::App* train = app.add_subcommand("train", "train a network and write checkpoint + log");
    train->add_option("--config", config_path, "JSON config file")->required();
    train->add_option("--out", out_dir, "output directory");
    train->add_option("--seed", seed_override, "seed override");

    CLI::App* diagnose = app.add_subcommand("diagnose", "rank certificate and layer diagnostics");
    diagnose->add_option("--config", config_path, "JSON config file")->required();
    diagnose->add_option("--out", out_dir, "output directory");
    diagnose->add_option("--seed", seed_override, "seed override");

    CLI::App* verify = app.add_subcommand("verify", "run the finite-difference oracle suites");
    std::uint64_t verify_seed = 1;
    int verify_trials = 100;
    double corruption = 0.0;
    verify->add_option("--seed", verify_seed, "suite seed");
    verify->add_option("--trials", verify_trials, "number of random networks");
    verify->add_option("--corrupt", corruption, "test hook: bias analytic derivatives")->group("");

    CLI::App* experiment = app.add_subcommand("experiment", "run a bundled experiment");
    std::string experiment_name;
    experiment->add_option("name", experiment_name, "four-region | figure-eight | swiss-roll")
        ->required();
    experiment->add_option("--config", config_path, "JSON config file");
    experiment->add_option("--out", experiment_out, "output base directory");
    experiment->add_option("--seed", seed_override, "seed override");
    experiment->add_option("--jobs", jobs, "parallel experiment cells");

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(config_path, out_dir, seed_override);
        if (diagnose->parsed()) return cmd_diagnose(config_path, out_dir, seed_override);
        if (verify->parsed()) return cmd_verify(verify_seed, verify_trials, corruption);
        if (experiment->parsed())
            return cmd_experiment(experiment_name, config_path, experiment_out, seed_override, jobs);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
