#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdf4d/model_io.hpp"
#include "sdf4d/synthetic.hpp"
#include "sdf4d/training.hpp"

namespace sdf4d {

struct ManifestScan {
    std::string cloud_path;      // relative to the manifest's directory
    double time_days = 0.0;
    std::string landmarks_path;  // optional; all scans or none
};

struct SequenceManifest {
    std::string patient_id;
    std::vector<ManifestScan> scans;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::string& relative) const {
        return base_dir / relative;
    }
};

/// Parse a manifest JSON file; verifies times strictly increase and every
/// referenced file exists.
SequenceManifest load_manifest(const std::filesystem::path& path);

/// CSV point cloud: `x,y,z` per line, `#` comments allowed. Errors carry the
/// file and line number.
std::vector<Eigen::Vector3d> load_cloud_csv(const std::filesystem::path& path);
void write_cloud_csv(const std::filesystem::path& path,
                     std::span<const Eigen::Vector3d> points);

/// Load all clouds; when landmarks are present, rigidly align every scan onto
/// the first scan's landmark frame.
PointCloudSequence assemble_sequence(const SequenceManifest& manifest);

struct HarnessConfig {
    MlpConfig mlp;
    TrainingConfig training;
};

/// Flat `key = value` config file mirroring the TrainingConfig and MlpConfig
/// field names; `#` comments allowed, unknown keys rejected.
HarnessConfig load_config_file(const std::filesystem::path& path);

// --- commands ---

struct FitOptions {
    std::filesystem::path manifest_path;
    std::filesystem::path config_path;  // empty -> defaults
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed_override;
};

struct FitOutcome {
    ModelArtifact artifact;
    std::filesystem::path model_path;
    std::filesystem::path history_path;
};

FitOutcome cmd_fit(const FitOptions& options);

struct ExtractOptions {
    std::filesystem::path model_path;
    std::filesystem::path out_dir;
    std::vector<double> times_days;  // explicit times, or
    std::optional<int> steps;        // N regularly spaced times over the scan range
    int resolution = 128;
    bool allow_extrapolation = false;
};

struct ExtractedMesh {
    double time_days = 0.0;
    std::filesystem::path path;  // empty when no surface crossed the domain
    bool empty_surface = false;
};

std::vector<ExtractedMesh> cmd_extract(const ExtractOptions& options);

struct EvaluateOptions {
    std::filesystem::path model_path;
    std::filesystem::path manifest_path;
    std::filesystem::path out_dir;
    int resolution = 128;
    int n_stations = 32;
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    int asd_mesh_samples = 10000;
    std::uint64_t seed = 0;
};

struct ScanEvaluation {
    double time_days = 0.0;
    double asd_mm = 0.0;
    double asd_normalized = 0.0;
    double mean_cloud_to_mesh_mm = 0.0;
    double mean_mesh_to_cloud_mm = 0.0;
    double max_diameter_mm_model = 0.0;
    double max_diameter_mm_reference = 0.0;
};

struct EvaluateOutcome {
    std::vector<ScanEvaluation> scans;
    std::filesystem::path metrics_path;
};

EvaluateOutcome cmd_evaluate(const EvaluateOptions& options);

struct LooOptions {
    std::filesystem::path manifest_path;
    std::filesystem::path config_path;  // empty -> defaults
    std::filesystem::path out_dir;
    int resolution = 96;
    int n_stations = 32;
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    int asd_mesh_samples = 10000;
    std::optional<std::uint64_t> seed_override;
    /// Held-out times mapping beyond this normalized magnitude are evaluated
    /// at the clamped boundary and flagged.
    double extrapolation_cap = 1.25;
};

struct LooFoldResult {
    double held_out_time_days = 0.0;
    std::string kind;  // "interpolation" | "extrapolation"
    bool diverged = false;
    bool empty_surface = false;
    bool time_clamped = false;
    double evaluated_t_normalized = 0.0;
    double asd_mm = 0.0;
    double max_diameter_mm_predicted = 0.0;
    double max_diameter_mm_reference = 0.0;
};

struct LooOutcome {
    std::vector<LooFoldResult> folds;
    std::filesystem::path report_path;
};

LooOutcome cmd_loo(const LooOptions& options);

struct SynthOptions {
    AnalyticShape shape;
    std::vector<double> times_days;
    int n_per_scan = 2000;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    std::string patient_id = "synthetic";
};

struct SynthOutcome {
    std::filesystem::path manifest_path;
    std::vector<std::filesystem::path> cloud_paths;
};

SynthOutcome cmd_synth(const SynthOptions& options);

}  // namespace sdf4d
