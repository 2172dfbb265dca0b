// sdf4d: fit an implicit space-time SDF network to longitudinal surface point
// clouds, then extract, interpolate, and evaluate surfaces at arbitrary times.

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "sdf4d/harness.hpp"

namespace {

Eigen::Vector3d parse_axis(const std::string& text) {
    Eigen::Vector3d axis;
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &axis.x(), &axis.y(), &axis.z()) != 3)
        throw CLI::ValidationError("--axis", "expected 'x,y,z'");
    if (!(axis.norm() > 0.0)) throw CLI::ValidationError("--axis", "axis must be nonzero");
    return axis;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"space-time signed-distance surface modeling"};
    app.require_subcommand(1);

    // fit
    sdf4d::FitOptions fit_options;
    std::optional<std::uint64_t> fit_seed;
    auto* fit = app.add_subcommand("fit", "train a model on a scan sequence manifest");
    fit->add_option("--manifest", fit_options.manifest_path, "sequence manifest JSON")
        ->required();
    fit->add_option("--config", fit_options.config_path, "key = value training config");
    fit->add_option("--out", fit_options.out_dir, "output directory")->required();
    fit->add_option("--seed", fit_seed, "override the config rng_seed");

    // extract
    sdf4d::ExtractOptions extract_options;
    std::optional<int> extract_steps;
    auto* extract = app.add_subcommand("extract", "extract surface meshes at given times");
    extract->add_option("--model", extract_options.model_path, "trained model file")
        ->required();
    extract->add_option("--out", extract_options.out_dir, "output directory")->required();
    extract->add_option("--times", extract_options.times_days, "times in days");
    extract->add_option("--steps", extract_steps,
                        "N regularly spaced times spanning the scan range");
    extract->add_option("--resolution", extract_options.resolution, "grid samples per axis")
        ->capture_default_str();
    extract->add_flag("--allow-extrapolation", extract_options.allow_extrapolation,
                      "permit times outside the fitted range");

    // evaluate
    sdf4d::EvaluateOptions evaluate_options;
    std::string evaluate_axis = "0,0,1";
    auto* evaluate =
        app.add_subcommand("evaluate", "compare a model against its scan sequence");
    evaluate->add_option("--model", evaluate_options.model_path, "trained model file")
        ->required();
    evaluate->add_option("--manifest", evaluate_options.manifest_path, "sequence manifest JSON")
        ->required();
    evaluate->add_option("--out", evaluate_options.out_dir, "output directory")->required();
    evaluate->add_option("--resolution", evaluate_options.resolution, "grid samples per axis")
        ->capture_default_str();
    evaluate->add_option("--stations", evaluate_options.n_stations, "diameter stations")
        ->capture_default_str();
    evaluate->add_option("--axis", evaluate_axis, "centerline axis as 'x,y,z'")
        ->capture_default_str();
    evaluate->add_option("--asd-samples", evaluate_options.asd_mesh_samples,
                         "mesh samples per ASD direction")
        ->capture_default_str();
    evaluate->add_option("--seed", evaluate_options.seed, "sampling seed")
        ->capture_default_str();

    // loo
    sdf4d::LooOptions loo_options;
    std::optional<std::uint64_t> loo_seed;
    std::string loo_axis = "0,0,1";
    auto* loo = app.add_subcommand("loo", "leave-one-out refits with held-out evaluation");
    loo->add_option("--manifest", loo_options.manifest_path, "sequence manifest JSON")
        ->required();
    loo->add_option("--config", loo_options.config_path, "key = value training config");
    loo->add_option("--out", loo_options.out_dir, "output directory")->required();
    loo->add_option("--resolution", loo_options.resolution, "grid samples per axis")
        ->capture_default_str();
    loo->add_option("--stations", loo_options.n_stations, "diameter stations")
        ->capture_default_str();
    loo->add_option("--axis", loo_axis, "centerline axis as 'x,y,z'")->capture_default_str();
    loo->add_option("--asd-samples", loo_options.asd_mesh_samples,
                    "mesh samples per ASD direction")
        ->capture_default_str();
    loo->add_option("--seed", loo_seed, "override the config rng_seed");

    // synth
    sdf4d::SynthOptions synth_options;
    std::string synth_shape = "growing-sphere";
    double r0 = 0.5, rate = 0.1;
    double half_length = 0.5, radius = 0.3;
    double base_radius = 0.2, amp0 = 0.1, amp_rate = 0.05, amp_accel = 0.0,
           bulge_half_length = 0.0, bulge_main_half_length = 0.6;
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark sequence");
    synth->add_option("--shape", synth_shape,
                      "growing-sphere | capsule | bulging-capsule")
        ->capture_default_str();
    synth->add_option("--times", synth_options.times_days, "scan times in days")->required();
    synth->add_option("--points", synth_options.n_per_scan, "points per scan")
        ->capture_default_str();
    synth->add_option("--seed", synth_options.seed, "sampling seed")->capture_default_str();
    synth->add_option("--out", synth_options.out_dir, "output directory")->required();
    synth->add_option("--patient-id", synth_options.patient_id, "manifest patient id")
        ->capture_default_str();
    synth->add_option("--r0", r0, "sphere radius at t = 0")->capture_default_str();
    synth->add_option("--rate", rate, "sphere growth per unit time")->capture_default_str();
    synth->add_option("--half-length", half_length, "capsule half length")
        ->capture_default_str();
    synth->add_option("--radius", radius, "capsule radius")->capture_default_str();
    synth->add_option("--main-half-length", bulge_main_half_length,
                      "bulging capsule trunk half length")
        ->capture_default_str();
    synth->add_option("--base-radius", base_radius, "bulging capsule trunk radius")
        ->capture_default_str();
    synth->add_option("--amp0", amp0, "bulge amplitude at t = 0")->capture_default_str();
    synth->add_option("--amp-rate", amp_rate, "bulge amplitude growth per unit time")
        ->capture_default_str();
    synth->add_option("--amp-accel", amp_accel, "quadratic bulge amplitude coefficient")
        ->capture_default_str();
    synth->add_option("--bulge-half-length", bulge_half_length,
                      "axial half extent of the bulge (0 = spherical bulge)")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) {
            fit_options.seed_override = fit_seed;
            const auto outcome = sdf4d::cmd_fit(fit_options);
            std::printf("model: %s\n", outcome.model_path.string().c_str());
            std::printf("history: %s\n", outcome.history_path.string().c_str());
            std::printf("final total loss: %.6g\n",
                        outcome.artifact.loss_summary.total.final);
        } else if (*extract) {
            extract_options.steps = extract_steps;
            const auto meshes = sdf4d::cmd_extract(extract_options);
            for (const auto& m : meshes) {
                if (m.empty_surface)
                    std::printf("t = %g days: empty level set\n", m.time_days);
                else
                    std::printf("t = %g days: %s\n", m.time_days, m.path.string().c_str());
            }
        } else if (*evaluate) {
            evaluate_options.axis = parse_axis(evaluate_axis);
            const auto outcome = sdf4d::cmd_evaluate(evaluate_options);
            for (const auto& scan : outcome.scans)
                std::printf(
                    "t = %g days: asd %.3f mm, max diameter %.2f mm (reference %.2f mm)\n",
                    scan.time_days, scan.asd_mm, scan.max_diameter_mm_model,
                    scan.max_diameter_mm_reference);
            std::printf("metrics: %s\n", outcome.metrics_path.string().c_str());
        } else if (*loo) {
            loo_options.seed_override = loo_seed;
            loo_options.axis = parse_axis(loo_axis);
            const auto outcome = sdf4d::cmd_loo(loo_options);
            for (const auto& fold : outcome.folds) {
                if (fold.diverged)
                    std::printf("held out t = %g days (%s): diverged\n",
                                fold.held_out_time_days, fold.kind.c_str());
                else
                    std::printf(
                        "held out t = %g days (%s%s): asd %.3f mm, diameter %.2f mm "
                        "(reference %.2f mm)\n",
                        fold.held_out_time_days, fold.kind.c_str(),
                        fold.time_clamped ? ", clamped" : "", fold.asd_mm,
                        fold.max_diameter_mm_predicted, fold.max_diameter_mm_reference);
            }
            std::printf("report: %s\n", outcome.report_path.string().c_str());
        } else if (*synth) {
            if (synth_shape == "growing-sphere") {
                synth_options.shape = sdf4d::GrowingSphere{r0, rate};
            } else if (synth_shape == "capsule") {
                synth_options.shape = sdf4d::Capsule{half_length, radius};
            } else if (synth_shape == "bulging-capsule") {
                synth_options.shape = sdf4d::BulgingCapsule{
                    bulge_main_half_length, base_radius, amp0, amp_rate, amp_accel,
                    bulge_half_length};
            } else {
                throw CLI::ValidationError("--shape", "unknown shape '" + synth_shape + "'");
            }
            const auto outcome = sdf4d::cmd_synth(synth_options);
            std::printf("manifest: %s\n", outcome.manifest_path.string().c_str());
        }
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
    return 0;
}
