#include <doctest.h>

#include <set>

#include "sdf4d/synthetic.hpp"
#include "sdf4d/training.hpp"

using namespace sdf4d;

namespace {

NormalizedSequence tiny_normalized_sequence(int n0 = 100, int n1 = 200) {
    const AnalyticShape sphere = GrowingSphere{0.5, 0.1};
    Rng rng(40);
    NormalizedSequence seq;
    seq.sequence.patient_id = "tiny";
    Scan a, b;
    a.time_days = -1.0;
    a.points = sample_surface(sphere, -1.0, n0, rng);
    b.time_days = 1.0;
    b.points = sample_surface(sphere, 1.0, n1, rng);
    seq.sequence.scans = {a, b};
    return seq;
}

}  // namespace

TEST_CASE("default training configuration carries the published values") {
    const TrainingConfig config;
    CHECK(config.epochs == 25000);
    CHECK(config.learning_rate == 1e-4);
    CHECK(config.weights.lambda1 == 0.1);
    CHECK(config.weights.lambda2 == 0.1);
    CHECK(config.weights.lambda3 == 0.1);
    CHECK(config.weights.lambda4 == 0.1);
    CHECK(config.adam_beta1 == 0.9);
    CHECK(config.adam_beta2 == 0.999);
    CHECK(config.adam_epsilon == 1e-8);
    CHECK_FALSE(config.on_surface_batch.has_value());
    CHECK(config.off_surface_per_on_surface == 1.0);
    CHECK(config.n_reg_times_per_step == 4);

    const MlpConfig mlp;
    CHECK(mlp.hidden_layers == 6);
    CHECK(mlp.width == 256);
    CHECK(mlp.skip_layer_index == 3);
}

TEST_CASE("sample_batch counts: full clouds plus matched off-surface sets") {
    const auto seq = tiny_normalized_sequence(100, 200);
    TrainingConfig config;
    config.off_surface_per_on_surface = 1.0;
    Rng rng(1);
    const LossBatch batch = sample_batch(seq, config, rng);
    CHECK(batch.on_surface.size() == 300);
    CHECK(batch.off_surface_data.size() == 300);
    CHECK(batch.off_surface_reg.size() == 300);
    CHECK_NOTHROW(batch.validate());
}

TEST_CASE("sample_batch subset mode draws per-scan subsets") {
    const auto seq = tiny_normalized_sequence(100, 200);
    TrainingConfig config;
    config.on_surface_batch = 50;
    config.off_surface_per_on_surface = 0.5;
    Rng rng(1);
    const LossBatch batch = sample_batch(seq, config, rng);
    CHECK(batch.on_surface.size() == 100);  // 50 per scan
    CHECK(batch.off_surface_data.size() == 50);
    CHECK(batch.off_surface_reg.size() == 50);
}

TEST_CASE("sample_batch emits only in-domain points and distinct reg times") {
    const auto seq = tiny_normalized_sequence();
    TrainingConfig config;
    config.n_reg_times_per_step = 4;
    Rng rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        const LossBatch batch = sample_batch(seq, config, rng);
        for (const auto& p : batch.on_surface) CHECK(p.inside_domain());
        for (const auto& p : batch.off_surface_data) CHECK(p.inside_domain());
        for (const auto& p : batch.off_surface_reg) CHECK(p.inside_domain());
        // off-surface data points carry scan times only
        for (const auto& p : batch.off_surface_data)
            CHECK((p.t == -1.0 || p.t == 1.0));
        // regularization times: at most n distinct values per step
        std::set<double> times;
        for (const auto& p : batch.off_surface_reg) times.insert(p.t);
        CHECK(times.size() <= 4);
        CHECK(times.size() >= 1);
    }

    Rng a(1), b(2);
    const auto batch_a = sample_batch(seq, config, a);
    const auto batch_b = sample_batch(seq, config, b);
    bool differ = false;
    for (std::size_t i = 0; i < batch_a.off_surface_reg.size(); ++i)
        if (batch_a.off_surface_reg[i].x != batch_b.off_surface_reg[i].x) differ = true;
    CHECK(differ);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    TrainingConfig config;
    Eigen::VectorXd params = Eigen::VectorXd::Constant(5, 1.5);
    const Eigen::VectorXd before = params;
    AdamState state(5);
    adam_step(params, Eigen::VectorXd::Zero(5), state, config);
    CHECK(params == before);
    CHECK(state.step_count == 1);
}

TEST_CASE("adam on f(w) = w^2: first step magnitude is the learning rate") {
    TrainingConfig config;
    config.learning_rate = 0.1;
    Eigen::VectorXd w = Eigen::VectorXd::Constant(1, 1.0);
    AdamState state(1);
    adam_step(w, Eigen::VectorXd::Constant(1, 2.0 * w[0]), state, config);
    CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-6));

    for (int i = 1; i < 500; ++i)
        adam_step(w, Eigen::VectorXd::Constant(1, 2.0 * w[0]), state, config);
    CHECK(std::abs(w[0]) < 1e-3);
}

TEST_CASE("adam rejects non-finite gradients and size mismatches") {
    TrainingConfig config;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
    AdamState state(3);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
    bad[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(adam_step(w, bad, state, config), std::domain_error);
    CHECK_THROWS_AS(adam_step(w, Eigen::VectorXd::Zero(4), state, config),
                    std::invalid_argument);
}

TEST_CASE("fit: loss decreases, reproducible bitwise, history consistent") {
    const AnalyticShape sphere = GrowingSphere{0.5, 0.1};
    const std::vector<double> days = {0.0, 250.0, 600.0, 1000.0};
    const auto seq = make_sequence(sphere, days, 150, 5);

    MlpConfig mlp;
    mlp.hidden_layers = 2;
    mlp.width = 24;
    mlp.skip_layer_index = 2;
    TrainingConfig config;
    config.epochs = 120;
    config.learning_rate = 2e-3;
    config.rng_seed = 11;

    const FitResult first = fit(seq, mlp, config);
    CHECK(first.history.size() == 120);
    CHECK(first.history.back().total < first.history.front().total);
    for (const auto& entry : first.history)
        CHECK(entry.total == entry.weighted_total(config.weights));

    const FitResult second = fit(seq, mlp, config);
    CHECK(first.model.params.flat() == second.model.params.flat());

    // physical evaluation is exactly the normalized evaluation rescaled
    const Eigen::Vector3d probe_mm(104.0, 62.0, -38.0);
    const double via_mm = first.model.sdf_mm(probe_mm, 500.0);
    const auto& tr = first.model.transform;
    const double via_norm = physical_distance(
        first.model.sdf_normalized(tr.to_normalized(probe_mm), tr.time_to_normalized(500.0)),
        tr);
    CHECK(via_mm == via_norm);
}

TEST_CASE("temporal regularization shrinks the temporal gradient on a static shape") {
    const AnalyticShape shape = Capsule{0.5, 0.3};
    const std::vector<double> days = {0.0, 400.0};
    const auto seq = make_sequence(shape, days, 200, 9);

    MlpConfig mlp;
    mlp.hidden_layers = 2;
    mlp.width = 24;
    mlp.skip_layer_index = 2;
    TrainingConfig config;
    config.epochs = 150;
    config.learning_rate = 2e-3;
    config.rng_seed = 3;

    auto mean_abs_dt = [&](const TemporalSdfModel& model) {
        Rng rng(1234);
        double sum = 0.0;
        const int n = 2000;
        for (int i = 0; i < n; ++i) {
            const Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            sum += std::abs(model.eval_normalized(x, rng.uniform(-1, 1)).grad_t);
        }
        return sum / n;
    };

    TrainingConfig with_reg = config;
    with_reg.weights.lambda2 = 1.0;
    with_reg.weights.lambda4 = 1.0;
    TrainingConfig without_reg = config;
    without_reg.weights.lambda2 = 0.0;
    without_reg.weights.lambda4 = 0.0;

    const double regularized = mean_abs_dt(fit(seq, mlp, with_reg).model);
    const double unregularized = mean_abs_dt(fit(seq, mlp, without_reg).model);
    CHECK(regularized < unregularized);
}

TEST_CASE("loss history summary") {
    std::vector<LossBreakdown> constant(3);
    for (auto& entry : constant) {
        entry.data_abs = 0.5;
        entry.total = 0.7;
    }
    const auto summary = loss_history_summary(constant);
    CHECK(summary.data_abs.min == summary.data_abs.final);
    CHECK(summary.total.epoch_of_min == 0);

    std::vector<LossBreakdown> single(1);
    single[0].total = 2.0;
    CHECK(loss_history_summary(single).total.epoch_of_min == 0);

    std::vector<LossBreakdown> dipping(3);
    dipping[0].total = 3.0;
    dipping[1].total = 1.0;
    dipping[2].total = 2.0;
    const auto dip = loss_history_summary(dipping);
    CHECK(dip.total.min == 1.0);
    CHECK(dip.total.epoch_of_min == 1);
    CHECK(dip.total.final == 2.0);

    CHECK_THROWS_AS(loss_history_summary({}), std::invalid_argument);
}

TEST_CASE("fit validates inputs") {
    MlpConfig mlp;
    TrainingConfig config;
    PointCloudSequence empty;
    CHECK_THROWS_AS(fit(empty, mlp, config), std::invalid_argument);

    TrainingConfig bad;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = TrainingConfig{};
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = TrainingConfig{};
    bad.n_reg_times_per_step = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
