// Command-line front end: losses, gradient checks, partitions, evaluation,
// scatter sampling and the synthetic fitting experiments.
//
// Exit codes: 0 success, 1 check failure, 2 usage or input error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hdn/contexts.hpp"
#include "hdn/error.hpp"
#include "hdn/gradcheck.hpp"
#include "hdn/harness.hpp"
#include "hdn/io.hpp"
#include "hdn/loss.hpp"
#include "hdn/metrics.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInput = 2;

struct MapArgs {
    std::string pred;
    std::string gt;
    std::string pred_mask;
    std::string gt_mask;
};

void add_map_args(CLI::App* cmd, MapArgs& args) {
    cmd->add_option("pred", args.pred, "Prediction (.pfm or .csv)")->required();
    cmd->add_option("gt", args.gt, "Ground truth (.pfm or .csv)")->required();
    cmd->add_option("--pred-mask", args.pred_mask, "Validity mask for the prediction (PGM)");
    cmd->add_option("--gt-mask", args.gt_mask, "Validity mask for the ground truth (PGM)");
}

std::optional<fs::path> optional_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return fs::path(s);
}

std::pair<hdn::DepthMap, hdn::DepthMap> load_pair(const MapArgs& args) {
    hdn::DepthMap pred = hdn::io::read_map(args.pred, optional_path(args.pred_mask));
    hdn::DepthMap gt = hdn::io::read_map(args.gt, optional_path(args.gt_mask));
    if (!pred.same_shape(gt)) {
        throw hdn::Error(hdn::ErrorKind::Shape, "prediction is " + std::to_string(pred.height()) + "x" +
                                                    std::to_string(pred.width()) + ", ground truth is " +
                                                    std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
    }
    return {std::move(pred), std::move(gt)};
}

std::string real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Loss selection shared by `loss` and `grad-check`.
struct LossArgs {
    std::string kind = "ssi";
    std::string levels = "1";
    double eps = hdn::kDefaultEps;
    std::size_t min_context = 2;
    std::optional<double> lambda;
};

void add_loss_args(CLI::App* cmd, LossArgs& args) {
    cmd->add_option("--kind", args.kind,
                    "ssi, hdn_s, hdn_dp, hdn_dr, or local_s / local_dp / local_dr (finest of --levels only)")
        ->capture_default_str();
    cmd->add_option("--levels", args.levels, "Comma-separated S values, e.g. 1,2,4")->capture_default_str();
    cmd->add_option("--eps", args.eps, "Denominator clamp")->capture_default_str();
    cmd->add_option("--min-context", args.min_context, "Smallest usable context")->capture_default_str();
    cmd->add_option("--lambda", args.lambda, "Weight of the normalized loss in L1 + lambda * loss");
}

struct PreparedLoss {
    hdn::LossFunction fn;
    hdn::LossConfig cfg;  // used for tie detection
    bool with_l1 = false;
};

PreparedLoss prepare_loss(const LossArgs& args, const hdn::DepthMap& pred, const hdn::DepthMap& gt) {
    using hdn::ContextKind;
    if (!(args.eps > 0.0)) throw hdn::Error(hdn::ErrorKind::Parameter, "--eps must be positive");
    if (args.min_context < 2) throw hdn::Error(hdn::ErrorKind::Parameter, "--min-context must be at least 2");
    std::vector<std::size_t> sizes = hdn::harness::parse_level_list(args.levels);

    std::string kind = args.kind;
    bool local = false;
    if (kind.rfind("local_", 0) == 0) {
        local = true;
        kind = "hdn_" + kind.substr(6);
        sizes = {*std::max_element(sizes.begin(), sizes.end())};
    }
    std::optional<ContextKind> ctx_kind;
    if (kind == "ssi") {
        sizes = {1};
        ctx_kind = ContextKind::Spatial;
    } else if (kind == "hdn_s") {
        ctx_kind = ContextKind::Spatial;
    } else if (kind == "hdn_dp") {
        ctx_kind = ContextKind::DepthPercentile;
    } else if (kind == "hdn_dr") {
        ctx_kind = ContextKind::DepthRange;
    }
    if (!ctx_kind || (local && kind == "ssi")) {
        throw hdn::Error(hdn::ErrorKind::Parameter, "unknown --kind '" + args.kind + "'");
    }

    const hdn::Mask joint = hdn::joint_mask(pred, gt);
    const hdn::DepthMap grouping = gt.with_mask(joint);
    PreparedLoss out;
    out.cfg = hdn::make_loss_config(grouping, hdn::LevelSpec{*ctx_kind, sizes}, args.eps, args.min_context);
    const bool is_ssi = kind == "ssi";
    const double eps = args.eps;
    auto cfg = std::make_shared<hdn::LossConfig>(out.cfg);
    if (args.lambda) {
        const double lambda = *args.lambda;
        out.with_l1 = true;
        out.fn = [&gt, cfg, lambda](const hdn::DepthMap& p) { return hdn::l1_plus_hdn(p, gt, *cfg, lambda); };
    } else if (is_ssi) {
        out.fn = [&gt, eps](const hdn::DepthMap& p) { return hdn::ssi_loss(p, gt, eps); };
    } else {
        out.fn = [&gt, cfg](const hdn::DepthMap& p) { return hdn::hdn_loss(p, gt, *cfg); };
    }
    return out;
}

int run_loss(const MapArgs& maps, const LossArgs& args) {
    const auto [pred, gt] = load_pair(maps);
    const PreparedLoss loss = prepare_loss(args, pred, gt);
    const hdn::LossReport r = loss.fn(pred);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", r.value);
    std::cout << "value: " << buf << '\n';
    std::cout << "value_exact: " << real(r.value) << '\n';
    std::cout << "used_pixels: " << r.used_pixels << '\n';
    for (const auto& level : r.per_level) std::cout << "level " << level.level_tag << ": " << real(level.value) << '\n';
    return kExitOk;
}

struct GradCheckArgs {
    double step = 1e-5;
    double tolerance = 1e-4;
    double tie = 1e-4;
};

int run_grad_check(const MapArgs& maps, const LossArgs& args, const GradCheckArgs& gc) {
    if (!(gc.step > 0.0)) throw hdn::Error(hdn::ErrorKind::Parameter, "--step must be positive");
    if (!(gc.tolerance > 0.0)) throw hdn::Error(hdn::ErrorKind::Parameter, "--tolerance must be positive");
    const auto [pred, gt] = load_pair(maps);
    const PreparedLoss loss = prepare_loss(args, pred, gt);
    const hdn::Mask ties = hdn::tie_neighborhood_mask(pred, gt, loss.cfg, gc.tie, loss.with_l1);
    const hdn::GradCheckResult r = hdn::check_gradient(loss.fn, pred, ties, gc.step, gc.tolerance);
    std::cout << "gradient_norm: " << real(r.gradient_norm) << '\n';
    std::cout << "max_rel_error: " << real(r.max_rel_error) << '\n';
    std::cout << "checked: " << r.checked << '\n';
    std::cout << "skipped_ties: " << r.skipped << '\n';
    std::cout << "result: " << (r.pass ? "pass" : "fail") << '\n';
    return r.pass ? kExitOk : kExitCheckFailed;
}

int run_eval(const MapArgs& maps, bool align) {
    const auto [pred, gt] = load_pair(maps);
    const hdn::metrics::EvalReport r = hdn::metrics::evaluate(pred, gt, align);
    char buf[128];
    std::snprintf(buf, sizeof buf, "AbsRel %.1f  δ1 %.1f", 100.0 * r.absrel, 100.0 * r.delta1);
    std::cout << buf << '\n';
    std::cout << "absrel: " << real(r.absrel) << '\n';
    std::cout << "delta1: " << real(r.delta1) << '\n';
    std::cout << "scale: " << real(r.scale) << '\n';
    std::cout << "shift: " << real(r.shift) << '\n';
    std::cout << "pixels: " << r.pixels << '\n';
    std::cout << "excluded: " << r.excluded << '\n';
    std::cout << "aligned: " << (r.aligned ? "yes" : "no") << '\n';
    return kExitOk;
}

int run_partition(const std::string& path, const std::string& mask, const std::string& kind, std::size_t s) {
    const hdn::DepthMap map = hdn::io::read_map(path, optional_path(mask));
    hdn::Partition p;
    if (kind == "global") {
        p = hdn::global_context(map);
    } else {
        const auto k = hdn::parse_context_kind(kind);
        if (!k) throw hdn::Error(hdn::ErrorKind::Parameter, "unknown --kind '" + kind + "'");
        switch (*k) {
            case hdn::ContextKind::Spatial: p = hdn::spatial_grid(map, s); break;
            case hdn::ContextKind::DepthPercentile: p = hdn::depth_percentile_bins(map, s); break;
            case hdn::ContextKind::DepthRange: p = hdn::depth_range_bins(map, s); break;
        }
    }
    std::cout << hdn::partition_dump(p);
    return kExitOk;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw hdn::Error(hdn::ErrorKind::Io, "cannot write " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw hdn::Error(hdn::ErrorKind::Io, "cannot move output into place at " + path.string());
}

int run_scatter(const MapArgs& maps, std::size_t n, std::uint64_t seed, bool align, const std::string& out) {
    if (n == 0) throw hdn::Error(hdn::ErrorKind::Parameter, "--n must be positive");
    const auto [pred, gt] = load_pair(maps);
    hdn::DepthMap shown = pred;
    if (align) {
        const auto a = hdn::metrics::align_scale_shift(pred, gt);
        shown = pred.affine(a.scale, a.shift);
    }
    const std::string csv = hdn::metrics::scatter_csv(hdn::metrics::scatter_sample(shown, gt, n, seed));
    if (out.empty()) {
        std::cout << csv;
    } else {
        write_text_atomic(out, csv);
    }
    return kExitOk;
}

// Scene and fit options, from an optional config file overridden by flags.
struct ExperimentArgs {
    std::string config;
    std::optional<std::size_t> height, width, steps;
    std::optional<double> background, base, amplitude, period, noise, step_size;
    std::optional<std::uint64_t> seed, fit_seed;
    std::vector<std::size_t> fg_rows, fg_cols;
    std::optional<std::string> init;
};

void add_scene_args(CLI::App* cmd, ExperimentArgs& a) {
    cmd->add_option("--config", a.config, "Key = value experiment file");
    cmd->add_option("--height", a.height);
    cmd->add_option("--width", a.width);
    cmd->add_option("--background-depth", a.background);
    cmd->add_option("--fg-rows", a.fg_rows, "Foreground rows as start,end (end exclusive)")->delimiter(',')->expected(2);
    cmd->add_option("--fg-cols", a.fg_cols, "Foreground columns as start,end (end exclusive)")->delimiter(',')->expected(2);
    cmd->add_option("--base-depth", a.base);
    cmd->add_option("--ridge-amplitude", a.amplitude);
    cmd->add_option("--ridge-period", a.period);
    cmd->add_option("--noise-sigma", a.noise);
    cmd->add_option("--seed", a.seed, "Scene noise seed");
}

void add_fit_args(CLI::App* cmd, ExperimentArgs& a) {
    cmd->add_option("--steps", a.steps);
    cmd->add_option("--step-size", a.step_size);
    cmd->add_option("--init", a.init, "constant, noisy_gt or seeded-random");
    cmd->add_option("--fit-seed", a.fit_seed, "Initialization seed");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw hdn::Error(hdn::ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

hdn::harness::HarnessConfig resolve_experiment(const ExperimentArgs& a) {
    hdn::harness::HarnessConfig hc;
    if (!a.config.empty()) hc = hdn::harness::parse_harness_config(read_text(a.config));
    auto& s = hc.scene;
    if (a.height) s.height = *a.height;
    if (a.width) s.width = *a.width;
    if (a.background) s.background_depth = *a.background;
    if (a.base) s.base_depth = *a.base;
    if (a.amplitude) s.ridge_amplitude = *a.amplitude;
    if (a.period) s.ridge_period = *a.period;
    if (a.noise) s.noise_sigma = *a.noise;
    if (a.seed) s.seed = *a.seed;
    if (!a.fg_rows.empty()) s.foreground.row0 = a.fg_rows[0], s.foreground.row1 = a.fg_rows[1];
    if (!a.fg_cols.empty()) s.foreground.col0 = a.fg_cols[0], s.foreground.col1 = a.fg_cols[1];
    auto apply_fit = [&a](hdn::harness::FitConfig& f) {
        if (a.steps) f.steps = *a.steps;
        if (a.step_size) f.step_size = *a.step_size;
        if (a.fit_seed) f.seed = *a.fit_seed;
        if (a.init) {
            const auto k = hdn::harness::parse_init_kind(*a.init);
            if (!k) throw hdn::Error(hdn::ErrorKind::Parameter, "unknown --init '" + *a.init + "'");
            f.init = *k;
        }
    };
    apply_fit(hc.defaults);
    for (auto& c : hc.configs) apply_fit(c);
    hdn::harness::validate(s);
    hdn::harness::validate(hc.defaults);
    return hc;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

int run_synth(const ExperimentArgs& a, const std::string& out, const std::string& csv_out) {
    const auto hc = resolve_experiment(a);
    const hdn::DepthMap gt = hdn::harness::generate_scene(hc.scene);
    if (!csv_out.empty()) hdn::io::write_csv_map(gt, csv_out);
    hdn::io::write_pfm(gt, out);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(read_text(out))));
    std::cout << "wrote: " << out << '\n';
    std::cout << "size: " << gt.height() << "x" << gt.width() << '\n';
    std::cout << "fnv1a64: " << buf << '\n';
    return kExitOk;
}

int run_fit(const ExperimentArgs& a, const std::string& gt_path, const std::string& entry, const std::string& out,
            const std::string& trajectory) {
    const auto hc = resolve_experiment(a);
    const hdn::harness::FitConfig cfg = hdn::harness::parse_config_entry(entry, hc.defaults);
    std::optional<hdn::harness::Rect> region;
    const hdn::DepthMap gt = [&] {
        if (!gt_path.empty()) return hdn::io::read_map(gt_path);
        region = hc.scene.foreground;
        return hdn::harness::generate_scene(hc.scene);
    }();
    const auto result = hdn::harness::fit_depth(gt, cfg, region);
    if (!trajectory.empty()) {
        std::string text = "step,loss\n";
        for (std::size_t t = 0; t < result.report.loss_trajectory.size(); ++t) {
            text += std::to_string(t) + "," + real(result.report.loss_trajectory[t]) + "\n";
        }
        write_text_atomic(trajectory, text);
    }
    if (!out.empty()) hdn::io::write_pfm(result.fitted, out);
    const auto& r = result.report;
    std::cout << "config: " << hdn::harness::label(cfg) << '\n';
    std::cout << "final_loss: " << real(r.final_loss) << '\n';
    std::cout << "global_absrel: " << real(r.global_absrel) << '\n';
    std::cout << "foreground_local_absrel: " << real(r.foreground_local_absrel) << '\n';
    std::cout << "initial_loss: " << real(r.loss_trajectory.front()) << '\n';
    std::cout << "rejected_steps: " << r.rejected_steps << '\n';
    std::cout << "final_step_size: " << real(r.final_step_size) << '\n';
    return kExitOk;
}

int run_compare(const ExperimentArgs& a, const std::vector<std::string>& entries, const std::string& csv_out) {
    auto hc = resolve_experiment(a);
    if (!entries.empty()) {
        hc.configs.clear();
        for (const auto& e : entries) hc.configs.push_back(hdn::harness::parse_config_entry(e, hc.defaults));
    }
    if (hc.configs.empty()) {
        throw hdn::Error(hdn::ErrorKind::Parameter, "nothing to compare: pass --entry or config lines");
    }
    const auto report = hdn::harness::compare_losses(hc.scene, hc.configs);
    if (!csv_out.empty()) write_text_atomic(csv_out, hdn::harness::format_csv(report));
    std::cout << hdn::harness::format_table(report);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical depth normalization: losses, metrics and desk-scale experiments"};
    app.require_subcommand(1);

    MapArgs maps;
    LossArgs loss_args;
    GradCheckArgs gc_args;
    ExperimentArgs exp_args;

    auto* loss = app.add_subcommand("loss", "Evaluate SSI / HDN / L1+HDN on a prediction");
    add_map_args(loss, maps);
    add_loss_args(loss, loss_args);

    auto* grad = app.add_subcommand("grad-check", "Compare analytical and finite-difference gradients");
    add_map_args(grad, maps);
    add_loss_args(grad, loss_args);
    grad->add_option("--step", gc_args.step, "Central difference step")->capture_default_str();
    grad->add_option("--tolerance", gc_args.tolerance, "Maximum relative error")->capture_default_str();
    grad->add_option("--tie", gc_args.tie, "Skip pixels this close to a kink")->capture_default_str();

    bool align = false;
    auto* eval = app.add_subcommand("eval", "AbsRel and delta1, optionally after scale-shift alignment");
    add_map_args(eval, maps);
    eval->add_flag("--align", align, "Least-squares scale and shift alignment first");

    std::string part_map;
    std::string part_mask;
    std::string part_kind = "spatial";
    std::size_t part_s = 1;
    auto* part = app.add_subcommand("partition", "Dump a context partition");
    part->add_option("map", part_map, "Depth map (.pfm or .csv)")->required();
    part->add_option("--mask", part_mask, "Validity mask (PGM)");
    part->add_option("--kind", part_kind, "global, spatial, depth_percentile or depth_range")->capture_default_str();
    part->add_option("--s", part_s, "Level size S")->capture_default_str();

    std::size_t scatter_n = 2000;
    std::uint64_t scatter_seed = 0;
    std::string scatter_out;
    auto* scatter = app.add_subcommand("scatter", "Sample (pred, gt) pairs as CSV");
    add_map_args(scatter, maps);
    scatter->add_option("--n", scatter_n, "Pixels to sample")->capture_default_str();
    scatter->add_option("--seed", scatter_seed)->capture_default_str();
    scatter->add_flag("--align", align, "Align the prediction before sampling");
    scatter->add_option("-o,--out", scatter_out, "CSV output (stdout when omitted)");

    std::string synth_out;
    std::string synth_csv;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic ground-truth scene");
    add_scene_args(synth, exp_args);
    synth->add_option("-o,--out", synth_out, "Output PFM")->required();
    synth->add_option("--csv", synth_csv, "Also write the scene as CSV");

    std::string fit_gt;
    std::string fit_entry = "ssi";
    std::string fit_out;
    std::string fit_traj;
    auto* fit = app.add_subcommand("fit", "Fit a depth map by gradient descent on one loss");
    fit->add_option("gt", fit_gt, "Ground truth file; the configured synthetic scene when omitted");
    add_scene_args(fit, exp_args);
    add_fit_args(fit, exp_args);
    fit->add_option("--loss", fit_entry, "<kind>[:S,S,...], e.g. hdn_dr:1,2,4")->capture_default_str();
    fit->add_option("-o,--out", fit_out, "Fitted map (PFM)");
    fit->add_option("--trajectory", fit_traj, "Loss trajectory CSV");

    std::vector<std::string> compare_entries;
    std::string compare_csv;
    auto* compare = app.add_subcommand("compare", "Fit under several losses and tabulate the results");
    add_scene_args(compare, exp_args);
    add_fit_args(compare, exp_args);
    compare->add_option("--entry", compare_entries, "<kind>[:S,S,...]; repeat; the first is the baseline");
    compare->add_option("--csv", compare_csv, "Also write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*loss) return run_loss(maps, loss_args);
        if (*grad) return run_grad_check(maps, loss_args, gc_args);
        if (*eval) return run_eval(maps, align);
        if (*part) return run_partition(part_map, part_mask, part_kind, part_s);
        if (*scatter) return run_scatter(maps, scatter_n, scatter_seed, align, scatter_out);
        if (*synth) return run_synth(exp_args, synth_out, synth_csv);
        if (*fit) return run_fit(exp_args, fit_gt, fit_entry, fit_out, fit_traj);
        if (*compare) return run_compare(exp_args, compare_entries, compare_csv);
    } catch (const hdn::Error& e) {
        std::cerr << "hdn: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "hdn: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}
