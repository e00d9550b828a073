#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hdn/contexts.hpp"
#include "hdn/depth_map.hpp"

namespace hdn::harness {

/// Half-open pixel rectangle [row0, row1) x [col0, col1).
struct Rect {
    std::size_t row0 = 0;
    std::size_t row1 = 0;
    std::size_t col0 = 0;
    std::size_t col1 = 0;

    bool contains(std::size_t row, std::size_t col) const {
        return row >= row0 && row < row1 && col >= col0 && col < col1;
    }
};

/// A far background plane with a near, sinusoidally ridged foreground block.
struct SceneSpec {
    std::size_t height = 64;
    std::size_t width = 64;
    double background_depth = 10.0;
    Rect foreground{16, 48, 16, 48};
    double base_depth = 1.0;
    double ridge_amplitude = 0.2;
    double ridge_period = 8.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 7;
};

/// The 64x64 fixture used by the detail-preservation experiment.
SceneSpec standard_scene();

void validate(const SceneSpec& spec);

/// Background = background_depth; foreground = base + amplitude * sin(2 pi col / period);
/// plus seeded Gaussian noise. All pixels valid.
DepthMap generate_scene(const SceneSpec& spec);

enum class LossKind { Ssi, HdnSpatial, HdnPercentile, HdnRange };
enum class InitKind { Constant, NoisyGt, SeededRandom };

const char* to_string(LossKind kind);
const char* to_string(InitKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);
std::optional<InitKind> parse_init_kind(std::string_view name);

struct FitConfig {
    LossKind loss_kind = LossKind::Ssi;
    /// Ignored for Ssi.
    std::vector<std::size_t> level_sizes{1};
    std::size_t steps = 200;
    double step_size = 100.0;
    InitKind init = InitKind::NoisyGt;
    std::uint64_t seed = 7;
};

void validate(const FitConfig& cfg);

/// e.g. "ssi" or "hdn_dr{1,2,4}".
std::string label(const FitConfig& cfg);

struct FitReport {
    double final_loss = 0.0;
    double global_absrel = 0.0;
    /// AbsRel after aligning on, and restricted to, the foreground rectangle.
    double foreground_local_absrel = 0.0;
    /// Loss before the first step and after each step (steps + 1 entries).
    std::vector<double> loss_trajectory;
    double final_step_size = 0.0;
    std::size_t rejected_steps = 0;
};

struct FitResult {
    DepthMap fitted;
    FitReport report;
};

/// Fixed-step gradient descent on the prediction map. A step that would
/// increase the loss is rejected and the step size halved, so the trajectory
/// never increases. `foreground` selects the region for the local metric;
/// when absent the whole map is used.
FitResult fit_depth(const DepthMap& gt, const FitConfig& cfg, const std::optional<Rect>& foreground = std::nullopt);

struct CompareRow {
    std::string label;
    FitReport report;
    /// Signed relative change of each AbsRel versus the first row, in percent.
    double global_change_pct = 0.0;
    double foreground_change_pct = 0.0;
};

struct CompareReport {
    std::vector<CompareRow> rows;
};

CompareReport compare_losses(const SceneSpec& spec, const std::vector<FitConfig>& configs);

std::string format_table(const CompareReport& report);
std::string format_csv(const CompareReport& report);

/// Scene plus fit configurations parsed from "key = value" lines. Scene keys
/// are the SceneSpec fields (the foreground as fg_row0, fg_row1, fg_col0,
/// fg_col1); steps, step_size, init and fit_seed set the shared fit options;
/// each "config = <kind>[:<S,S,...>]" line adds one fit configuration.
struct HarnessConfig {
    SceneSpec scene;
    FitConfig defaults;
    std::vector<FitConfig> configs;
};

HarnessConfig parse_harness_config(std::string_view text);

/// "<kind>[:<S,S,...>]" with kind one of ssi, hdn_s, hdn_dp, hdn_dr.
FitConfig parse_config_entry(std::string_view entry, const FitConfig& defaults);

std::vector<std::size_t> parse_level_list(std::string_view text);

}  // namespace hdn::harness
