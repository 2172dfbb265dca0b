#include "sdf4d/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sdf4d {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

void ensure_out_dir(const std::filesystem::path& dir) {
    if (dir.empty()) throw std::invalid_argument("output directory not set");
    std::filesystem::create_directories(dir);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

TriangleMesh mesh_to_mm(TriangleMesh mesh, const NormalizationTransform& tr) {
    for (auto& v : mesh.vertices) v = tr.to_mm(v);
    mesh.units = TriangleMesh::Units::mm;
    return mesh;
}

}  // namespace

SequenceManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_manifest: cannot open " + path.string());
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& err) {
        throw std::runtime_error("load_manifest(" + path.string() + "): " + err.what());
    }

    SequenceManifest manifest;
    manifest.base_dir = path.parent_path();
    try {
        manifest.patient_id = doc.at("patient_id").get<std::string>();
        for (const auto& entry : doc.at("scans")) {
            ManifestScan scan;
            scan.cloud_path = entry.at("cloud_path").get<std::string>();
            scan.time_days = entry.at("time_days").get<double>();
            if (entry.contains("landmarks_path"))
                scan.landmarks_path = entry.at("landmarks_path").get<std::string>();
            manifest.scans.push_back(std::move(scan));
        }
    } catch (const nlohmann::json::exception& err) {
        throw std::runtime_error("load_manifest(" + path.string() + "): " + err.what());
    }

    if (manifest.scans.empty())
        throw std::runtime_error("load_manifest(" + path.string() + "): no scans listed");
    for (std::size_t j = 0; j < manifest.scans.size(); ++j) {
        const auto& scan = manifest.scans[j];
        if (j > 0 && !(scan.time_days > manifest.scans[j - 1].time_days))
            throw std::runtime_error("load_manifest(" + path.string() +
                                     "): scan times must strictly increase");
        if (!std::filesystem::exists(manifest.resolve(scan.cloud_path)))
            throw std::runtime_error("load_manifest(" + path.string() + "): missing cloud file " +
                                     manifest.resolve(scan.cloud_path).string());
        if (!scan.landmarks_path.empty() &&
            !std::filesystem::exists(manifest.resolve(scan.landmarks_path)))
            throw std::runtime_error("load_manifest(" + path.string() +
                                     "): missing landmarks file " +
                                     manifest.resolve(scan.landmarks_path).string());
    }
    return manifest;
}

std::vector<Eigen::Vector3d> load_cloud_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_cloud_csv: cannot open " + path.string());
    std::vector<Eigen::Vector3d> points;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        Eigen::Vector3d p;
        char trailing = '\0';
        const int fields = std::sscanf(line.c_str(), " %lf , %lf , %lf %c", &p.x(), &p.y(),
                                       &p.z(), &trailing);
        if (fields != 3 && !(fields == 4 && (trailing == '\r' || trailing == ' ')))
            throw std::runtime_error(path.string() + ":" + std::to_string(line_number) +
                                     ": expected 'x,y,z'");
        points.push_back(p);
    }
    return points;
}

void write_cloud_csv(const std::filesystem::path& path,
                     std::span<const Eigen::Vector3d> points) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_cloud_csv: cannot open " + path.string());
    out << "# x,y,z point cloud in mm\n";
    std::string line;
    for (const auto& p : points) {
        line = format_double(p.x());
        line += ',';
        line += format_double(p.y());
        line += ',';
        line += format_double(p.z());
        line += '\n';
        out << line;
    }
    if (!out) throw std::runtime_error("write_cloud_csv: write failed for " + path.string());
}

PointCloudSequence assemble_sequence(const SequenceManifest& manifest) {
    const bool any_landmarks =
        std::any_of(manifest.scans.begin(), manifest.scans.end(),
                    [](const ManifestScan& s) { return !s.landmarks_path.empty(); });
    if (any_landmarks) {
        const bool all_landmarks =
            std::all_of(manifest.scans.begin(), manifest.scans.end(),
                        [](const ManifestScan& s) { return !s.landmarks_path.empty(); });
        if (!all_landmarks)
            throw std::runtime_error(
                "assemble_sequence: landmarks must be given for every scan or none");
    }

    PointCloudSequence seq;
    seq.patient_id = manifest.patient_id;
    std::vector<Eigen::Vector3d> reference_landmarks;
    for (std::size_t j = 0; j < manifest.scans.size(); ++j) {
        const auto& entry = manifest.scans[j];
        Scan scan;
        scan.time_days = entry.time_days;
        scan.points = load_cloud_csv(manifest.resolve(entry.cloud_path));
        if (any_landmarks) {
            auto landmarks = load_cloud_csv(manifest.resolve(entry.landmarks_path));
            if (j == 0) {
                reference_landmarks = std::move(landmarks);
            } else {
                const RigidTransform tr = kabsch_align(landmarks, reference_landmarks);
                for (auto& p : scan.points) p = tr.apply(p);
            }
        }
        seq.scans.push_back(std::move(scan));
    }
    return seq;
}

HarnessConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config_file: cannot open " + path.string());

    HarnessConfig config;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        const auto end = line.find_last_not_of(" \t\r");
        line = line.substr(begin, end - begin + 1);

        const auto eq = line.find('=');
        const auto context = path.string() + ":" + std::to_string(line_number);
        if (eq == std::string::npos)
            throw std::runtime_error(context + ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error(context + ": expected 'key = value'");

        try {
            if (key == "epochs") config.training.epochs = std::stoi(value);
            else if (key == "learning_rate") config.training.learning_rate = std::stod(value);
            else if (key == "lambda1") config.training.weights.lambda1 = std::stod(value);
            else if (key == "lambda2") config.training.weights.lambda2 = std::stod(value);
            else if (key == "lambda3") config.training.weights.lambda3 = std::stod(value);
            else if (key == "lambda4") config.training.weights.lambda4 = std::stod(value);
            else if (key == "on_surface_batch") {
                if (value == "full-cloud")
                    config.training.on_surface_batch.reset();
                else
                    config.training.on_surface_batch = std::stoi(value);
            } else if (key == "off_surface_per_on_surface")
                config.training.off_surface_per_on_surface = std::stod(value);
            else if (key == "n_reg_times_per_step")
                config.training.n_reg_times_per_step = std::stoi(value);
            else if (key == "adam_beta1") config.training.adam_beta1 = std::stod(value);
            else if (key == "adam_beta2") config.training.adam_beta2 = std::stod(value);
            else if (key == "adam_epsilon") config.training.adam_epsilon = std::stod(value);
            else if (key == "rng_seed") config.training.rng_seed = std::stoull(value);
            else if (key == "hidden_layers") config.mlp.hidden_layers = std::stoi(value);
            else if (key == "width") config.mlp.width = std::stoi(value);
            else if (key == "skip_layer_index") config.mlp.skip_layer_index = std::stoi(value);
            else if (key == "activation") {
                if (value != "relu")
                    throw std::runtime_error(context + ": only 'relu' is supported");
            } else
                throw std::runtime_error(context + ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw std::runtime_error(context + ": bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw std::runtime_error(context + ": value out of range for '" + key + "'");
        }
    }
    config.mlp.validate();
    config.training.validate();
    return config;
}

FitOutcome cmd_fit(const FitOptions& options) {
    const SequenceManifest manifest = load_manifest(options.manifest_path);
    HarnessConfig config;
    if (!options.config_path.empty()) config = load_config_file(options.config_path);
    if (options.seed_override) config.training.rng_seed = *options.seed_override;
    ensure_out_dir(options.out_dir);

    const PointCloudSequence sequence = assemble_sequence(manifest);
    FitResult result = fit(sequence, config.mlp, config.training);

    FitOutcome outcome;
    outcome.artifact.patient_id = manifest.patient_id;
    outcome.artifact.mlp = config.mlp;
    outcome.artifact.transform = result.model.transform;
    outcome.artifact.training = config.training;
    outcome.artifact.loss_summary = loss_history_summary(result.history);
    outcome.artifact.params = std::move(result.model.params);

    outcome.model_path = options.out_dir / "model.sdf4d";
    save_model(outcome.model_path, outcome.artifact);

    outcome.history_path = options.out_dir / "loss_history.csv";
    {
        std::string csv =
            "epoch,data_abs,eikonal_data,temporal_data,eikonal_reg,temporal_reg,total\n";
        for (std::size_t e = 0; e < result.history.size(); ++e) {
            const auto& h = result.history[e];
            csv += std::to_string(e);
            for (const double v :
                 {h.data_abs, h.eikonal_data, h.temporal_data, h.eikonal_reg, h.temporal_reg,
                  h.total}) {
                csv += ',';
                csv += format_double(v);
            }
            csv += '\n';
        }
        write_text_file(outcome.history_path, csv);
    }
    return outcome;
}

std::vector<ExtractedMesh> cmd_extract(const ExtractOptions& options) {
    const ModelArtifact artifact = load_model(options.model_path);
    const TemporalSdfModel model = artifact.model();
    ensure_out_dir(options.out_dir);

    std::vector<double> times = options.times_days;
    if (options.steps) {
        if (*options.steps < 2)
            throw std::invalid_argument("cmd_extract: --steps must be >= 2");
        if (!times.empty())
            throw std::invalid_argument("cmd_extract: give either times or --steps, not both");
        const double first = model.transform.time_to_days(-1.0);
        const double last = model.transform.time_to_days(1.0);
        for (int i = 0; i < *options.steps; ++i)
            times.push_back(first + (last - first) * i / (*options.steps - 1));
    }
    if (times.empty()) throw std::invalid_argument("cmd_extract: no times requested");

    for (const double day : times) {
        const double t = model.transform.time_to_normalized(day);
        if (std::abs(t) > 1.0 + 1e-9 && !options.allow_extrapolation)
            throw std::invalid_argument(
                "cmd_extract: time " + std::to_string(day) +
                " days lies outside the fitted range; pass --allow-extrapolation to proceed");
    }

    std::vector<ExtractedMesh> outcome;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double day = times[i];
        const double t = model.transform.time_to_normalized(day);
        const TriangleMesh mesh =
            extract_mesh(model.batch_field_at(t), options.resolution);
        ExtractedMesh entry;
        entry.time_days = day;
        if (mesh.empty()) {
            entry.empty_surface = true;
            std::fprintf(stderr, "warning: level set empty at t = %g days, no mesh written\n",
                         day);
        } else {
            char name[64];
            std::snprintf(name, sizeof name, "shape_%02zu_t%g.obj", i, day);
            entry.path = options.out_dir / name;
            write_obj(entry.path, mesh_to_mm(mesh, model.transform));
        }
        outcome.push_back(std::move(entry));
    }
    return outcome;
}

EvaluateOutcome cmd_evaluate(const EvaluateOptions& options) {
    const ModelArtifact artifact = load_model(options.model_path);
    const SequenceManifest manifest = load_manifest(options.manifest_path);
    if (artifact.patient_id != manifest.patient_id)
        throw std::runtime_error("cmd_evaluate: artifact patient '" + artifact.patient_id +
                                 "' does not match manifest patient '" + manifest.patient_id +
                                 "'");
    ensure_out_dir(options.out_dir);

    const TemporalSdfModel model = artifact.model();
    const PointCloudSequence sequence = assemble_sequence(manifest);

    EvaluateOutcome outcome;
    ordered_json scans_json = ordered_json::array();
    for (std::size_t j = 0; j < sequence.scans.size(); ++j) {
        const auto& scan = sequence.scans[j];
        const double t = model.transform.time_to_normalized(scan.time_days);
        const TriangleMesh mesh = extract_mesh(model.batch_field_at(t), options.resolution);
        if (mesh.empty())
            throw std::runtime_error("cmd_evaluate: empty level set at scan time " +
                                     std::to_string(scan.time_days) + " days");

        const TriangleMesh mesh_mm = mesh_to_mm(mesh, model.transform);
        const AsdResult asd = cloud_mesh_asd(scan.points, mesh_mm, options.asd_mesh_samples,
                                             options.seed);

        ScanEvaluation eval;
        eval.time_days = scan.time_days;
        eval.asd_mm = asd.asd;
        eval.asd_normalized = asd.asd / model.transform.scale_mm;
        eval.mean_cloud_to_mesh_mm = asd.mean_a_to_b;
        eval.mean_mesh_to_cloud_mm = asd.mean_b_to_a;

        const DiameterProfile model_profile =
            diameter_profile(model.batch_field_at(t), options.axis, options.n_stations,
                             model.transform);
        for (const auto& s : model_profile.stations)
            eval.max_diameter_mm_model = std::max(eval.max_diameter_mm_model, s.diameter_mm);

        const DiameterProfile reference_profile =
            cloud_diameter_profile(scan.points, options.axis, options.n_stations);
        for (const auto& s : reference_profile.stations)
            eval.max_diameter_mm_reference =
                std::max(eval.max_diameter_mm_reference, s.diameter_mm);

        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "scan%02zu.csv", j);
        write_diameter_csv(options.out_dir / (std::string("diameter_model_") + suffix),
                           model_profile);
        write_diameter_csv(options.out_dir / (std::string("diameter_reference_") + suffix),
                           reference_profile);
        write_asd_samples_csv(options.out_dir / (std::string("asd_samples_") + suffix), asd);

        scans_json.push_back({{"time_days", eval.time_days},
                              {"asd_mm", eval.asd_mm},
                              {"asd_normalized", eval.asd_normalized},
                              {"mean_cloud_to_mesh_mm", eval.mean_cloud_to_mesh_mm},
                              {"mean_mesh_to_cloud_mm", eval.mean_mesh_to_cloud_mm},
                              {"max_diameter_mm_model", eval.max_diameter_mm_model},
                              {"max_diameter_mm_reference", eval.max_diameter_mm_reference}});
        outcome.scans.push_back(eval);
    }

    ordered_json doc;
    doc["patient_id"] = manifest.patient_id;
    doc["scans"] = std::move(scans_json);
    outcome.metrics_path = options.out_dir / "metrics.json";
    write_text_file(outcome.metrics_path, doc.dump(2) + "\n");
    return outcome;
}

LooOutcome cmd_loo(const LooOptions& options) {
    const SequenceManifest manifest = load_manifest(options.manifest_path);
    if (manifest.scans.size() < 3)
        throw std::runtime_error("cmd_loo: need at least 3 scans so every fold keeps 2");
    HarnessConfig config;
    if (!options.config_path.empty()) config = load_config_file(options.config_path);
    if (options.seed_override) config.training.rng_seed = *options.seed_override;
    ensure_out_dir(options.out_dir);

    const PointCloudSequence full_sequence = assemble_sequence(manifest);

    LooOutcome outcome;
    for (std::size_t held_out = 0; held_out < full_sequence.scans.size(); ++held_out) {
        const Scan& reference = full_sequence.scans[held_out];

        PointCloudSequence fold_sequence;
        fold_sequence.patient_id = full_sequence.patient_id;
        for (std::size_t j = 0; j < full_sequence.scans.size(); ++j)
            if (j != held_out) fold_sequence.scans.push_back(full_sequence.scans[j]);

        LooFoldResult fold;
        fold.held_out_time_days = reference.time_days;
        fold.kind = (reference.time_days < fold_sequence.scans.front().time_days ||
                     reference.time_days > fold_sequence.scans.back().time_days)
                        ? "extrapolation"
                        : "interpolation";

        try {
            const FitResult result = fit(fold_sequence, config.mlp, config.training);
            const TemporalSdfModel& model = result.model;

            double t = model.transform.time_to_normalized(reference.time_days);
            if (std::abs(t) > options.extrapolation_cap) {
                t = std::clamp(t, -options.extrapolation_cap, options.extrapolation_cap);
                fold.time_clamped = true;
            }
            fold.evaluated_t_normalized = t;

            const TriangleMesh mesh = extract_mesh(model.batch_field_at(t), options.resolution);
            if (mesh.empty()) {
                fold.empty_surface = true;
            } else {
                const TriangleMesh mesh_mm = mesh_to_mm(mesh, model.transform);
                fold.asd_mm = cloud_mesh_asd(reference.points, mesh_mm,
                                             options.asd_mesh_samples, config.training.rng_seed)
                                  .asd;
                const DiameterProfile predicted =
                    diameter_profile(model.batch_field_at(t), options.axis, options.n_stations,
                                     model.transform);
                for (const auto& s : predicted.stations)
                    fold.max_diameter_mm_predicted =
                        std::max(fold.max_diameter_mm_predicted, s.diameter_mm);
                fold.max_diameter_mm_reference = cloud_max_inscribed_diameter(
                    reference.points, options.axis, options.n_stations);
            }
        } catch (const DivergenceError&) {
            fold.diverged = true;
        }
        outcome.folds.push_back(std::move(fold));
    }

    ordered_json folds_json = ordered_json::array();
    for (const auto& fold : outcome.folds) {
        folds_json.push_back({{"held_out_time_days", fold.held_out_time_days},
                              {"kind", fold.kind},
                              {"diverged", fold.diverged},
                              {"empty_surface", fold.empty_surface},
                              {"time_clamped", fold.time_clamped},
                              {"evaluated_t_normalized", fold.evaluated_t_normalized},
                              {"asd_mm", fold.asd_mm},
                              {"max_diameter_mm_predicted", fold.max_diameter_mm_predicted},
                              {"max_diameter_mm_reference", fold.max_diameter_mm_reference}});
    }
    ordered_json doc;
    doc["patient_id"] = manifest.patient_id;
    doc["folds"] = std::move(folds_json);
    outcome.report_path = options.out_dir / "loo_report.json";
    write_text_file(outcome.report_path, doc.dump(2) + "\n");
    return outcome;
}

SynthOutcome cmd_synth(const SynthOptions& options) {
    validate_shape(options.shape);
    if (options.times_days.size() < 2)
        throw std::invalid_argument("cmd_synth: need at least 2 scan times");
    ensure_out_dir(options.out_dir);

    const PointCloudSequence sequence = make_sequence(
        options.shape, options.times_days, options.n_per_scan, options.seed,
        options.patient_id);

    SynthOutcome outcome;
    ordered_json scans_json = ordered_json::array();
    for (std::size_t j = 0; j < sequence.scans.size(); ++j) {
        char name[32];
        std::snprintf(name, sizeof name, "scan_%02zu.csv", j);
        const std::filesystem::path cloud_path = options.out_dir / name;
        write_cloud_csv(cloud_path, sequence.scans[j].points);
        outcome.cloud_paths.push_back(cloud_path);
        scans_json.push_back(
            {{"cloud_path", name}, {"time_days", sequence.scans[j].time_days}});
    }

    ordered_json doc;
    doc["patient_id"] = options.patient_id;
    doc["scans"] = std::move(scans_json);
    outcome.manifest_path = options.out_dir / "manifest.json";
    write_text_file(outcome.manifest_path, doc.dump(2) + "\n");
    return outcome;
}

}  // namespace sdf4d
