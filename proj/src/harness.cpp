#include "hdn/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cctype>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "hdn/error.hpp"
#include "hdn/loss.hpp"
#include "hdn/metrics.hpp"
#include "hdn/random.hpp"

namespace hdn::harness {

namespace {

// Halvings tried before a step is given up and the prediction kept.
constexpr int kMaxHalvings = 60;

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view text, const std::string& what) {
    text = trim(text);
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorKind::Parameter, what + ": cannot parse '" + std::string(text) + "'");
    }
    return value;
}

DepthMap restrict_to(const DepthMap& map, const Rect& rect) {
    Mask mask = map.valid();
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const PixelIndex px = delinearize(i, map.width());
        if (!rect.contains(px.row, px.col)) mask[i] = 0;
    }
    return map.with_mask(std::move(mask));
}

double relative_change_pct(double value, double baseline) {
    if (baseline == 0.0) return value == 0.0 ? 0.0 : std::copysign(INFINITY, value);
    return 100.0 * (value - baseline) / baseline;
}

}  // namespace

SceneSpec standard_scene() { return SceneSpec{}; }

void validate(const SceneSpec& s) {
    if (s.height == 0 || s.width == 0) throw Error(ErrorKind::Parameter, "scene dimensions must be positive");
    const Rect& f = s.foreground;
    if (f.row0 >= f.row1 || f.col0 >= f.col1 || f.row1 > s.height || f.col1 > s.width) {
        throw Error(ErrorKind::Parameter, "foreground rectangle must be non-empty and inside the image");
    }
    if (!(s.background_depth > 0.0) || !(s.base_depth > 0.0)) {
        throw Error(ErrorKind::Parameter, "depths must be positive");
    }
    if (!(s.ridge_amplitude >= 0.0) || !(s.ridge_period > 0.0) || !(s.noise_sigma >= 0.0)) {
        throw Error(ErrorKind::Parameter, "ridge amplitude and noise must be nonnegative, period positive");
    }
    if (!(s.base_depth + s.ridge_amplitude < s.background_depth)) {
        throw Error(ErrorKind::Parameter, "foreground must be strictly closer than the background");
    }
}

DepthMap generate_scene(const SceneSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    std::vector<double> values(spec.height * spec.width);
    for (std::size_t r = 0; r < spec.height; ++r) {
        for (std::size_t c = 0; c < spec.width; ++c) {
            double v = spec.background_depth;
            if (spec.foreground.contains(r, c)) {
                v = spec.base_depth + spec.ridge_amplitude *
                                          std::sin(2.0 * std::numbers::pi * static_cast<double>(c) / spec.ridge_period);
            }
            if (spec.noise_sigma > 0.0) v += spec.noise_sigma * standard_normal(rng);
            values[linearize(r, c, spec.width)] = v;
        }
    }
    return DepthMap(spec.height, spec.width, std::move(values));
}

const char* to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Ssi: return "ssi";
        case LossKind::HdnSpatial: return "hdn_s";
        case LossKind::HdnPercentile: return "hdn_dp";
        case LossKind::HdnRange: return "hdn_dr";
    }
    return "unknown";
}

const char* to_string(InitKind kind) {
    switch (kind) {
        case InitKind::Constant: return "constant";
        case InitKind::NoisyGt: return "noisy_gt";
        case InitKind::SeededRandom: return "seeded-random";
    }
    return "unknown";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) {
    for (LossKind k : {LossKind::Ssi, LossKind::HdnSpatial, LossKind::HdnPercentile, LossKind::HdnRange}) {
        if (name == to_string(k)) return k;
    }
    return std::nullopt;
}

std::optional<InitKind> parse_init_kind(std::string_view name) {
    for (InitKind k : {InitKind::Constant, InitKind::NoisyGt, InitKind::SeededRandom}) {
        if (name == to_string(k)) return k;
    }
    if (name == "seeded_random" || name == "random") return InitKind::SeededRandom;
    return std::nullopt;
}

void validate(const FitConfig& cfg) {
    if (cfg.steps == 0) throw Error(ErrorKind::Parameter, "steps must be at least 1");
    if (!(cfg.step_size > 0.0) || !std::isfinite(cfg.step_size)) {
        throw Error(ErrorKind::Parameter, "step_size must be positive");
    }
    if (cfg.loss_kind != LossKind::Ssi && cfg.level_sizes.empty()) {
        throw Error(ErrorKind::Parameter, "hierarchical losses need at least one level size");
    }
}

std::string label(const FitConfig& cfg) {
    std::string out = to_string(cfg.loss_kind);
    if (cfg.loss_kind == LossKind::Ssi) return out;
    out += '{';
    for (std::size_t k = 0; k < cfg.level_sizes.size(); ++k) {
        if (k > 0) out += ',';
        out += std::to_string(cfg.level_sizes[k]);
    }
    return out + '}';
}

FitResult fit_depth(const DepthMap& gt, const FitConfig& cfg, const std::optional<Rect>& foreground) {
    validate(cfg);
    std::function<LossReport(const DepthMap&)> loss;
    if (cfg.loss_kind == LossKind::Ssi) {
        loss = [&gt](const DepthMap& pred) { return ssi_loss(pred, gt); };
    } else {
        const ContextKind kind = cfg.loss_kind == LossKind::HdnSpatial      ? ContextKind::Spatial
                                 : cfg.loss_kind == LossKind::HdnPercentile ? ContextKind::DepthPercentile
                                                                            : ContextKind::DepthRange;
        // Contexts come from the ground truth only and are built once.
        auto loss_cfg = std::make_shared<LossConfig>(make_loss_config(gt, LevelSpec{kind, cfg.level_sizes}));
        loss = [&gt, loss_cfg](const DepthMap& pred) { return hdn_loss(pred, gt, *loss_cfg); };
    }

    const std::vector<std::size_t> valid = gt.valid_indices();
    double lo = gt[valid.front()];
    double hi = lo;
    double sum = 0.0;
    for (std::size_t i : valid) {
        lo = std::min(lo, gt[i]);
        hi = std::max(hi, gt[i]);
        sum += gt[i];
    }
    std::mt19937_64 rng(cfg.seed);
    std::vector<double> init(gt.size(), 0.0);
    for (std::size_t i = 0; i < init.size(); ++i) {
        switch (cfg.init) {
            case InitKind::Constant: init[i] = sum / static_cast<double>(valid.size()); break;
            case InitKind::NoisyGt: init[i] = gt.is_valid(i) ? gt[i] + 0.1 * (hi - lo) * standard_normal(rng) : 0.0; break;
            case InitKind::SeededRandom: init[i] = lo + (hi - lo) * uniform_unit(rng); break;
        }
    }

    DepthMap pred = gt.with_values(std::move(init));
    LossReport current = loss(pred);
    if (!std::isfinite(current.value)) throw Error(ErrorKind::Divergence, "non-finite loss at step 0");
    FitReport report;
    report.loss_trajectory.push_back(current.value);

    // Each step starts from the configured size and halves until the loss
    // does not increase; a step that never qualifies leaves pred unchanged.
    for (std::size_t t = 1; t <= cfg.steps; ++t) {
        const std::vector<double> grad = *current.gradient;
        double step = cfg.step_size;
        for (int attempt = 0; attempt <= kMaxHalvings; ++attempt, step *= 0.5) {
            std::vector<double> next(pred.values().begin(), pred.values().end());
            for (std::size_t i = 0; i < next.size(); ++i) next[i] -= step * grad[i];
            DepthMap candidate = pred.with_values(std::move(next));
            LossReport trial = loss(candidate);
            if (std::isfinite(trial.value) && trial.value <= current.value) {
                pred = std::move(candidate);
                current = std::move(trial);
                report.final_step_size = step;
                break;
            }
            ++report.rejected_steps;
        }
        if (!std::isfinite(current.value)) {
            throw Error(ErrorKind::Divergence, "non-finite loss at step " + std::to_string(t));
        }
        report.loss_trajectory.push_back(current.value);
    }

    report.final_loss = current.value;
    report.global_absrel = metrics::evaluate(pred, gt, true).absrel;
    const Rect region = foreground.value_or(Rect{0, gt.height(), 0, gt.width()});
    report.foreground_local_absrel = metrics::evaluate(restrict_to(pred, region), restrict_to(gt, region), true).absrel;
    return FitResult{std::move(pred), std::move(report)};
}

CompareReport compare_losses(const SceneSpec& spec, const std::vector<FitConfig>& configs) {
    if (configs.empty()) throw Error(ErrorKind::Parameter, "no fit configurations to compare");
    const DepthMap gt = generate_scene(spec);
    CompareReport out;
    for (const FitConfig& cfg : configs) {
        CompareRow row;
        row.label = label(cfg);
        row.report = fit_depth(gt, cfg, spec.foreground).report;
        out.rows.push_back(std::move(row));
    }
    const FitReport& base = out.rows.front().report;
    for (CompareRow& row : out.rows) {
        row.global_change_pct = relative_change_pct(row.report.global_absrel, base.global_absrel);
        row.foreground_change_pct = relative_change_pct(row.report.foreground_local_absrel, base.foreground_local_absrel);
    }
    return out;
}

std::string format_table(const CompareReport& report) {
    std::size_t width = 6;
    for (const auto& row : report.rows) width = std::max(width, row.label.size());
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s  %12s  %12s  %9s  %14s  %9s\n", static_cast<int>(width), "config",
                  "final_loss", "global_absrel", "change", "fg_local_absrel", "change");
    out << buf;
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof buf, "%-*s  %12.6g  %12.6g  %+8.1f%%  %14.6g  %+8.1f%%\n", static_cast<int>(width),
                      row.label.c_str(), row.report.final_loss, row.report.global_absrel, row.global_change_pct,
                      row.report.foreground_local_absrel, row.foreground_change_pct);
        out << buf;
    }
    return out.str();
}

std::string format_csv(const CompareReport& report) {
    std::ostringstream out;
    out << "config,final_loss,global_absrel,global_change_pct,foreground_local_absrel,foreground_change_pct\n";
    char buf[256];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.label.c_str(), row.report.final_loss,
                      row.report.global_absrel, row.global_change_pct, row.report.foreground_local_absrel,
                      row.foreground_change_pct);
        out << buf;
    }
    return out.str();
}

std::vector<std::size_t> parse_level_list(std::string_view text) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string_view tok = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        const auto s = parse_number<std::size_t>(tok, "level list");
        if (s == 0) throw Error(ErrorKind::Parameter, "level list: S must be at least 1");
        out.push_back(s);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

FitConfig parse_config_entry(std::string_view entry, const FitConfig& defaults) {
    entry = trim(entry);
    FitConfig cfg = defaults;
    const std::size_t colon = entry.find(':');
    const std::string_view kind = trim(entry.substr(0, colon));
    const auto parsed = parse_loss_kind(kind);
    if (!parsed) throw Error(ErrorKind::Parameter, "unknown loss kind '" + std::string(kind) + "'");
    cfg.loss_kind = *parsed;
    if (colon != std::string_view::npos) {
        cfg.level_sizes = parse_level_list(trim(entry.substr(colon + 1)));
    } else if (cfg.loss_kind != LossKind::Ssi) {
        throw Error(ErrorKind::Parameter, "loss kind '" + std::string(kind) + "' needs level sizes, e.g. " +
                                              std::string(kind) + ":1,2,4");
    }
    return cfg;
}

HarnessConfig parse_harness_config(std::string_view text) {
    HarnessConfig hc;
    std::vector<std::string> entries;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::Parameter, "config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        const std::string where = "config line " + std::to_string(line_no) + " (" + key + ")";
        SceneSpec& s = hc.scene;
        FitConfig& d = hc.defaults;
        if (key == "height") s.height = parse_number<std::size_t>(value, where);
        else if (key == "width") s.width = parse_number<std::size_t>(value, where);
        else if (key == "background_depth") s.background_depth = parse_number<double>(value, where);
        else if (key == "fg_row0") s.foreground.row0 = parse_number<std::size_t>(value, where);
        else if (key == "fg_row1") s.foreground.row1 = parse_number<std::size_t>(value, where);
        else if (key == "fg_col0") s.foreground.col0 = parse_number<std::size_t>(value, where);
        else if (key == "fg_col1") s.foreground.col1 = parse_number<std::size_t>(value, where);
        else if (key == "base_depth") s.base_depth = parse_number<double>(value, where);
        else if (key == "ridge_amplitude") s.ridge_amplitude = parse_number<double>(value, where);
        else if (key == "ridge_period") s.ridge_period = parse_number<double>(value, where);
        else if (key == "noise_sigma") s.noise_sigma = parse_number<double>(value, where);
        else if (key == "seed") s.seed = parse_number<std::uint64_t>(value, where);
        else if (key == "steps") d.steps = parse_number<std::size_t>(value, where);
        else if (key == "step_size") d.step_size = parse_number<double>(value, where);
        else if (key == "fit_seed") d.seed = parse_number<std::uint64_t>(value, where);
        else if (key == "init") {
            const auto init = parse_init_kind(value);
            if (!init) throw Error(ErrorKind::Parameter, where + ": unknown init '" + std::string(value) + "'");
            d.init = *init;
        } else if (key == "config") {
            entries.emplace_back(value);
        } else {
            throw Error(ErrorKind::Parameter, where + ": unknown key");
        }
    }
    // Entries pick up the shared options regardless of line order.
    for (const std::string& e : entries) hc.configs.push_back(parse_config_entry(e, hc.defaults));
    validate(hc.scene);
    validate(hc.defaults);
    return hc;
}

}  // namespace hdn::harness
