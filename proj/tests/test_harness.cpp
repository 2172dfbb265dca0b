#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sdf4d/harness.hpp"
#include "test_helpers.hpp"

using namespace sdf4d;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ModelArtifact tiny_artifact(std::uint64_t seed = 5) {
    ModelArtifact artifact;
    artifact.patient_id = "tiny";
    artifact.mlp.hidden_layers = 2;
    artifact.mlp.width = 12;
    artifact.mlp.skip_layer_index = 2;
    artifact.transform.center_mm = {104.0, 62.0, -38.0};
    artifact.transform.scale_mm = 33.0;
    artifact.transform.t0_days = 500.0;
    artifact.transform.time_scale_days = 500.0;
    artifact.training.epochs = 10;
    artifact.training.rng_seed = seed;
    artifact.params = init_params(artifact.mlp, seed);
    return artifact;
}

SynthOutcome make_benchmark(const TempDir& dir, int points = 300, std::uint64_t seed = 3) {
    SynthOptions options;
    options.shape = GrowingSphere{0.5, 0.1};
    options.times_days = {0.0, 300.0, 650.0, 1000.0};
    options.n_per_scan = points;
    options.seed = seed;
    options.out_dir = dir.path;
    options.patient_id = "bench";
    return cmd_synth(options);
}

fs::path small_config(const TempDir& dir, int epochs = 250) {
    const fs::path path = dir.path / "config.cfg";
    std::ofstream out(path);
    out << "# exercise every key\n"
        << "epochs = " << epochs << "\n"
        << "learning_rate = 0.002\n"
        << "lambda1 = 0.1\nlambda2 = 0.1\nlambda3 = 0.1\nlambda4 = 0.1\n"
        << "on_surface_batch = 128\n"
        << "off_surface_per_on_surface = 1.0\n"
        << "n_reg_times_per_step = 4\n"
        << "adam_beta1 = 0.9\nadam_beta2 = 0.999\nadam_epsilon = 1e-8\n"
        << "rng_seed = 7\n"
        << "hidden_layers = 2\nwidth = 24\nskip_layer_index = 2\nactivation = relu\n";
    return path;
}

}  // namespace

TEST_CASE("model artifact save/load round trip is exact") {
    TempDir dir("sdf4d_model_io");
    ModelArtifact artifact = tiny_artifact();
    artifact.loss_summary.total = {0.01, 0.02, 7};
    const fs::path path = dir.path / "model.sdf4d";
    save_model(path, artifact);

    const ModelArtifact loaded = load_model(path);
    CHECK(loaded.patient_id == artifact.patient_id);
    CHECK(loaded.mlp == artifact.mlp);
    CHECK(loaded.params.flat() == artifact.params.flat());
    CHECK(loaded.transform.scale_mm == artifact.transform.scale_mm);
    CHECK(loaded.transform.center_mm == artifact.transform.center_mm);
    CHECK(loaded.training.rng_seed == artifact.training.rng_seed);
    CHECK(loaded.loss_summary.total.min == 0.01);
    CHECK(loaded.loss_summary.total.epoch_of_min == 7);

    // reload evaluates bit-identically
    Rng rng(2);
    const auto model = artifact.model();
    const auto reloaded = loaded.model();
    for (int i = 0; i < 200; ++i) {
        const auto p = sdf4d::testing::random_point(rng);
        CHECK(model.sdf_normalized(p.x, p.t) == reloaded.sdf_normalized(p.x, p.t));
    }

    CHECK_THROWS_AS(load_model(dir.path / "missing.sdf4d"), std::runtime_error);

    // corrupting the declared architecture must be caught
    std::ofstream truncated(dir.path / "bad.sdf4d", std::ios::binary);
    truncated << "SDF4D_MODEL v1 header_bytes=5\nab\n";
    truncated.close();
    CHECK_THROWS_AS(load_model(dir.path / "bad.sdf4d"), std::runtime_error);
}

TEST_CASE("cloud CSV round trip, comments, and line-numbered errors") {
    TempDir dir("sdf4d_cloud_csv");
    std::vector<Eigen::Vector3d> points = {{1.25, -3.5, 7.0}, {0.1, 0.2, 0.3}};
    const fs::path path = dir.path / "cloud.csv";
    write_cloud_csv(path, points);
    const auto loaded = load_cloud_csv(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0] == points[0]);
    CHECK(loaded[1] == points[1]);

    const fs::path bad = dir.path / "bad.csv";
    std::ofstream out(bad);
    out << "# fine\n1,2,3\nnot-a-point\n";
    out.close();
    try {
        load_cloud_csv(bad);
        FAIL("expected an error");
    } catch (const std::runtime_error& err) {
        CHECK(std::string(err.what()).find(":3") != std::string::npos);
    }
}

TEST_CASE("config file parsing: values, full-cloud, and unknown keys") {
    TempDir dir("sdf4d_config");
    const fs::path path = small_config(dir);
    const HarnessConfig config = load_config_file(path);
    CHECK(config.training.epochs == 250);
    CHECK(config.training.learning_rate == 0.002);
    CHECK(config.training.on_surface_batch == 128);
    CHECK(config.mlp.width == 24);

    std::ofstream append(path, std::ios::app);
    append << "on_surface_batch = full-cloud\n";
    append.close();
    CHECK_FALSE(load_config_file(path).training.on_surface_batch.has_value());

    const fs::path bad = dir.path / "bad.cfg";
    std::ofstream out(bad);
    out << "epoks = 3\n";
    out.close();
    CHECK_THROWS_AS(load_config_file(bad), std::runtime_error);
}

TEST_CASE("synth writes a manifest that loads, byte-identical per seed") {
    TempDir dir("sdf4d_synth");
    const auto outcome = make_benchmark(dir);
    const SequenceManifest manifest = load_manifest(outcome.manifest_path);
    CHECK(manifest.patient_id == "bench");
    CHECK(manifest.scans.size() == 4);
    CHECK(manifest.scans[2].time_days == 650.0);

    const PointCloudSequence seq = assemble_sequence(manifest);
    CHECK_NOTHROW(seq.validate());

    const std::string manifest_bytes = slurp(outcome.manifest_path);
    const std::string cloud_bytes = slurp(outcome.cloud_paths[1]);
    TempDir dir2("sdf4d_synth_again");
    const auto again = make_benchmark(dir2);
    CHECK(slurp(again.manifest_path) == manifest_bytes);
    CHECK(slurp(again.cloud_paths[1]) == cloud_bytes);

    TempDir dir3("sdf4d_synth_seeded");
    const auto reseeded = make_benchmark(dir3, 300, 4);
    CHECK(slurp(reseeded.cloud_paths[1]) != cloud_bytes);
}

TEST_CASE("manifest validation reports missing files and bad ordering") {
    TempDir dir("sdf4d_manifest");
    std::ofstream out(dir.path / "manifest.json");
    out << R"({"patient_id": "p", "scans": [{"cloud_path": "nope.csv", "time_days": 0.0}]})";
    out.close();
    try {
        load_manifest(dir.path / "manifest.json");
        FAIL("expected an error");
    } catch (const std::runtime_error& err) {
        CHECK(std::string(err.what()).find("nope.csv") != std::string::npos);
    }

    std::ofstream garbled(dir.path / "garbled.json");
    garbled << "{not json";
    garbled.close();
    CHECK_THROWS_AS(load_manifest(dir.path / "garbled.json"), std::runtime_error);
}

TEST_CASE("landmark alignment maps every scan into the first scan's frame") {
    TempDir dir("sdf4d_landmarks");
    Rng rng(31);
    // scan 0: points + landmarks; scan 1: the same geometry rigidly moved
    std::vector<Eigen::Vector3d> cloud0, landmarks0;
    for (int i = 0; i < 60; ++i)
        cloud0.push_back({rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20)});
    for (int i = 0; i < 6; ++i)
        landmarks0.push_back(
            {rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)});

    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, -1).normalized()).toRotationMatrix();
    const Eigen::Vector3d shift(5, -8, 2);
    std::vector<Eigen::Vector3d> cloud1, landmarks1;
    for (const auto& p : cloud0) cloud1.push_back(rot * p + shift);
    for (const auto& p : landmarks0) landmarks1.push_back(rot * p + shift);

    write_cloud_csv(dir.path / "c0.csv", cloud0);
    write_cloud_csv(dir.path / "c1.csv", cloud1);
    write_cloud_csv(dir.path / "l0.csv", landmarks0);
    write_cloud_csv(dir.path / "l1.csv", landmarks1);
    std::ofstream out(dir.path / "manifest.json");
    out << R"({"patient_id": "p", "scans": [
      {"cloud_path": "c0.csv", "time_days": 0.0, "landmarks_path": "l0.csv"},
      {"cloud_path": "c1.csv", "time_days": 10.0, "landmarks_path": "l1.csv"}]})";
    out.close();

    const PointCloudSequence seq = assemble_sequence(load_manifest(dir.path / "manifest.json"));
    REQUIRE(seq.scans.size() == 2);
    for (std::size_t i = 0; i < cloud0.size(); ++i)
        CHECK((seq.scans[1].points[i] - cloud0[i]).norm() <= 1e-9);

    // landmarks for only one scan is an error
    std::ofstream partial(dir.path / "partial.json");
    partial << R"({"patient_id": "p", "scans": [
      {"cloud_path": "c0.csv", "time_days": 0.0, "landmarks_path": "l0.csv"},
      {"cloud_path": "c1.csv", "time_days": 10.0}]})";
    partial.close();
    CHECK_THROWS_AS(assemble_sequence(load_manifest(dir.path / "partial.json")),
                    std::runtime_error);
}

TEST_CASE("fit command: artifact reloads and reproduces, history CSV written") {
    TempDir data("sdf4d_fit_data");
    TempDir out("sdf4d_fit_out");
    const auto bench = make_benchmark(data);
    FitOptions options;
    options.manifest_path = bench.manifest_path;
    options.config_path = small_config(data);
    options.out_dir = out.path;
    const FitOutcome outcome = cmd_fit(options);

    CHECK(outcome.artifact.patient_id == "bench");
    const ModelArtifact loaded = load_model(outcome.model_path);
    CHECK(loaded.params.flat() == outcome.artifact.params.flat());

    const std::string history = slurp(outcome.history_path);
    CHECK(history.rfind("epoch,data_abs,eikonal_data,temporal_data,eikonal_reg,temporal_reg,"
                        "total\n",
                        0) == 0);
    CHECK(std::count(history.begin(), history.end(), '\n') == 251);  // header + epochs

    // rerunning with the same seed reproduces every output byte for byte
    TempDir out2("sdf4d_fit_out2");
    options.out_dir = out2.path;
    const FitOutcome again = cmd_fit(options);
    CHECK(again.artifact.params.flat() == outcome.artifact.params.flat());
    CHECK(slurp(again.model_path) == slurp(outcome.model_path));
    CHECK(slurp(again.history_path) == slurp(outcome.history_path));

    // seed override changes them
    TempDir out3("sdf4d_fit_out3");
    options.out_dir = out3.path;
    options.seed_override = 99;
    const FitOutcome reseeded = cmd_fit(options);
    CHECK(reseeded.artifact.params.flat() != outcome.artifact.params.flat());
}

TEST_CASE("extract command: steps, scan-time self-consistency, guards") {
    TempDir data("sdf4d_extract_data");
    TempDir out("sdf4d_extract_out");
    const auto bench = make_benchmark(data, 400);
    FitOptions fit_options;
    fit_options.manifest_path = bench.manifest_path;
    fit_options.config_path = small_config(data, 500);
    fit_options.out_dir = out.path;
    const FitOutcome fitted = cmd_fit(fit_options);

    ExtractOptions options;
    options.model_path = fitted.model_path;
    options.out_dir = out.path / "meshes";
    options.steps = 10;
    options.resolution = 48;
    const auto meshes = cmd_extract(options);
    CHECK(meshes.size() == 10);
    for (const auto& m : meshes) {
        CHECK_FALSE(m.empty_surface);
        CHECK(fs::exists(m.path));
    }
    CHECK(meshes.front().time_days == 0.0);
    CHECK(meshes.back().time_days == 1000.0);

    // a time beyond the scan range requires the explicit flag
    ExtractOptions beyond = options;
    beyond.steps.reset();
    beyond.times_days = {1500.0};
    CHECK_THROWS_AS(cmd_extract(beyond), std::invalid_argument);
    beyond.allow_extrapolation = true;
    CHECK_NOTHROW(cmd_extract(beyond));

    // self-consistency at a scan time: the mesh stays near that scan's cloud
    ExtractOptions at_scan = options;
    at_scan.steps.reset();
    at_scan.times_days = {650.0};
    const auto mesh_paths = cmd_extract(at_scan);
    REQUIRE(mesh_paths.size() == 1);

    const SequenceManifest manifest = load_manifest(bench.manifest_path);
    const auto cloud = load_cloud_csv(manifest.resolve(manifest.scans[2].cloud_path));

    // read the OBJ back: vertices in mm
    std::ifstream obj(mesh_paths[0].path);
    TriangleMesh mesh;
    std::string token;
    while (obj >> token) {
        if (token == "v") {
            Eigen::Vector3d v;
            obj >> v.x() >> v.y() >> v.z();
            mesh.vertices.push_back(v);
        } else if (token == "f") {
            std::array<int, 3> f{};
            obj >> f[0] >> f[1] >> f[2];
            mesh.triangles.push_back({f[0] - 1, f[1] - 1, f[2] - 1});
        }
    }
    REQUIRE_FALSE(mesh.empty());
    const auto asd = cloud_mesh_asd(cloud, mesh, 2000, 1);
    CHECK(asd.asd <= 0.1 * kSyntheticScaleMm);  // loose toy-run bound, in mm

    // an all-zero network is identically 0 and nudges to empty
    TempDir zero_dir("sdf4d_zero_model");
    ModelArtifact zero = tiny_artifact();
    zero.params = ParameterSet(zero.mlp);
    save_model(zero_dir.path / "model.sdf4d", zero);
    ExtractOptions empty_options;
    empty_options.model_path = zero_dir.path / "model.sdf4d";
    empty_options.out_dir = zero_dir.path;
    empty_options.times_days = {500.0};
    empty_options.resolution = 16;
    const auto empty_meshes = cmd_extract(empty_options);
    REQUIRE(empty_meshes.size() == 1);
    CHECK(empty_meshes[0].empty_surface);
    CHECK(empty_meshes[0].path.empty());
}

TEST_CASE("evaluate command: one entry per scan, exact CSV columns") {
    TempDir data("sdf4d_eval_data");
    TempDir out("sdf4d_eval_out");
    const auto bench = make_benchmark(data, 400);
    FitOptions fit_options;
    fit_options.manifest_path = bench.manifest_path;
    fit_options.config_path = small_config(data, 400);
    fit_options.out_dir = out.path;
    const FitOutcome fitted = cmd_fit(fit_options);

    EvaluateOptions options;
    options.model_path = fitted.model_path;
    options.manifest_path = bench.manifest_path;
    options.out_dir = out.path / "metrics";
    options.resolution = 40;
    options.n_stations = 16;
    options.asd_mesh_samples = 1500;
    const EvaluateOutcome outcome = cmd_evaluate(options);
    CHECK(outcome.scans.size() == 4);  // one entry per scan

    const std::string metrics = slurp(outcome.metrics_path);
    CHECK(metrics.find("\"patient_id\": \"bench\"") != std::string::npos);
    for (const char* key :
         {"time_days", "asd_mm", "asd_normalized", "max_diameter_mm_model",
          "max_diameter_mm_reference"})
        CHECK(metrics.find(key) != std::string::npos);

    const std::string diameters = slurp(options.out_dir / "diameter_model_scan00.csv");
    CHECK(diameters.rfind("arclength_mm,cx,cy,cz,diameter_mm\n", 0) == 0);
    CHECK(fs::exists(options.out_dir / "diameter_reference_scan03.csv"));
    CHECK(fs::exists(options.out_dir / "asd_samples_scan02.csv"));

    // patient mismatch is rejected
    ModelArtifact other = load_model(fitted.model_path);
    other.patient_id = "someone-else";
    save_model(out.path / "other.sdf4d", other);
    EvaluateOptions mismatched = options;
    mismatched.model_path = out.path / "other.sdf4d";
    CHECK_THROWS_AS(cmd_evaluate(mismatched), std::runtime_error);
}

TEST_CASE("loo command: fold labels and report bookkeeping") {
    TempDir data("sdf4d_loo_data");
    TempDir out("sdf4d_loo_out");
    const auto bench = make_benchmark(data, 300);
    LooOptions options;
    options.manifest_path = bench.manifest_path;
    options.config_path = small_config(data, 200);
    options.out_dir = out.path;
    options.resolution = 40;
    options.n_stations = 12;
    options.asd_mesh_samples = 1000;
    const LooOutcome outcome = cmd_loo(options);
    REQUIRE(outcome.folds.size() == 4);

    CHECK(outcome.folds[0].kind == "extrapolation");
    CHECK(outcome.folds[1].kind == "interpolation");
    CHECK(outcome.folds[2].kind == "interpolation");
    CHECK(outcome.folds[3].kind == "extrapolation");

    // held-out day 0 against retained (300, 650, 1000): normalized magnitude
    // beyond the cap, so the evaluation time is clamped and flagged
    CHECK(outcome.folds[0].time_clamped);
    CHECK(outcome.folds[0].evaluated_t_normalized == -1.25);
    CHECK_FALSE(outcome.folds[1].time_clamped);
    CHECK(outcome.folds[1].evaluated_t_normalized ==
          doctest::Approx(-0.4));  // day 300 under the (0, 650, 1000) fold map

    for (const auto& fold : outcome.folds) {
        CHECK_FALSE(fold.diverged);
        CHECK_FALSE(fold.empty_surface);
        CHECK(fold.asd_mm > 0.0);
        CHECK(fold.max_diameter_mm_reference > 0.0);
    }

    const std::string report = slurp(outcome.report_path);
    CHECK(report.find("\"kind\": \"interpolation\"") != std::string::npos);
    CHECK(report.find("\"kind\": \"extrapolation\"") != std::string::npos);

    // fewer than 3 scans cannot run leave-one-out
    TempDir small_data("sdf4d_loo_small");
    SynthOptions synth;
    synth.shape = GrowingSphere{0.5, 0.1};
    synth.times_days = {0.0, 100.0};
    synth.n_per_scan = 100;
    synth.out_dir = small_data.path;
    const auto two_scan = cmd_synth(synth);
    LooOptions bad = options;
    bad.manifest_path = two_scan.manifest_path;
    CHECK_THROWS_AS(cmd_loo(bad), std::runtime_error);
}
