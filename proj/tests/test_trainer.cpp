#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "neurolds/seqcore.hpp"
#include "neurolds/trainer.hpp"

using namespace neurolds;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.dim = 2;
    cfg.n_points = 24;
    cfg.hidden = 16;
    cfg.layers = 3;
    cfg.bands = 4;
    cfg.pretrain_epochs = 40;
    cfg.finetune_epochs = 30;
    cfg.pretrain_lr = 3e-3;
    cfg.finetune_lr = 2e-3;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("family defaults") {
    const auto sym = TrainConfig::defaults_for(KernelFamily::sym);
    CHECK(sym.hidden == 768);
    CHECK(sym.layers == 7);
    CHECK(sym.bands == 64);
    CHECK(sym.pretrain_lr == 2.61e-3);
    CHECK(sym.finetune_lr == 5.04e-3);
    CHECK(sym.final_lr_ratio == 3.02e-2);

    const auto star = TrainConfig::defaults_for(KernelFamily::star);
    CHECK(star.loss == KernelFamily::star);
    CHECK(star.hidden == 512);
    CHECK(star.layers == 5);
    CHECK(star.bands == 64);
    CHECK(star.pretrain_lr == 1.38e-3);
    CHECK(star.finetune_lr == 3.52e-4);
    CHECK(star.final_lr_ratio == 4.39e-2);

    const auto ctr = TrainConfig::defaults_for(KernelFamily::ctr);
    CHECK(ctr.hidden == 768);
    CHECK(ctr.layers == 7);
    CHECK(ctr.bands == 32);
    CHECK(ctr.pretrain_lr == 2.85e-3);
    CHECK(ctr.finetune_lr == 4.14e-3);
    CHECK(ctr.final_lr_ratio == 1.14e-1);
}

TEST_CASE("config text round trip") {
    TrainConfig cfg = tiny_config();
    cfg.loss = KernelFamily::per;
    cfg.gamma = {0.25, 1.0 / 3.0};
    cfg.prefix_weights = {WeightScheme::length_proportional, {}};
    cfg.reference = SequenceKind::halton;
    cfg.burn_in = 7;
    std::stringstream ss;
    write_train_config(ss, cfg);
    const auto back = parse_train_config(ss);
    CHECK(back.dim == cfg.dim);
    CHECK(back.n_points == cfg.n_points);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.layers == cfg.layers);
    CHECK(back.bands == cfg.bands);
    CHECK(back.pretrain_lr == cfg.pretrain_lr);
    CHECK(back.finetune_lr == cfg.finetune_lr);
    CHECK(back.final_lr_ratio == cfg.final_lr_ratio);
    CHECK(back.pretrain_epochs == cfg.pretrain_epochs);
    CHECK(back.finetune_epochs == cfg.finetune_epochs);
    CHECK(back.loss == cfg.loss);
    CHECK(back.gamma == cfg.gamma);
    CHECK(back.prefix_weights.scheme == cfg.prefix_weights.scheme);
    CHECK(back.reference == cfg.reference);
    CHECK(back.burn_in == 7);
    CHECK(back.seed == 5);
}

TEST_CASE("config parsing") {
    std::istringstream in("# comment\nseed: 3  # trailing\nloss: star\n\nhidden: 32\n");
    const auto cfg = parse_train_config(in);
    // `loss` applies the family defaults before other keys.
    CHECK(cfg.loss == KernelFamily::star);
    CHECK(cfg.layers == 5);
    CHECK(cfg.hidden == 32);
    CHECK(cfg.seed == 3);

    std::istringstream bad_key("depth: 3\n");
    CHECK_THROWS_AS(parse_train_config(bad_key), std::invalid_argument);
    std::istringstream bad_value("dim: two\n");
    CHECK_THROWS_AS(parse_train_config(bad_value), std::invalid_argument);
    std::istringstream no_colon("dim 2\n");
    CHECK_THROWS_AS(parse_train_config(no_colon), std::invalid_argument);
    CHECK_THROWS_AS(load_train_config("/nonexistent/cfg.txt"), std::runtime_error);
}

TEST_CASE("config validation") {
    auto ok = tiny_config();
    CHECK_NOTHROW(ok.validate());
    auto c = ok;
    c.pretrain_lr = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ok;
    c.final_lr_ratio = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.final_lr_ratio = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ok;
    c.finetune_epochs = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ok;
    c.reference = SequenceKind::uniform;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ok;
    c.gamma = {1.0};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ok;
    c.pretrain_epochs = 0;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("cosine schedule endpoints") {
    CHECK(cosine_lr(1e-2, 0.1, 0, 100) == doctest::Approx(1e-2).epsilon(1e-15));
    CHECK(cosine_lr(1e-2, 0.1, 99, 100) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(cosine_lr(1e-2, 0.1, 500, 100) == doctest::Approx(1e-3).epsilon(1e-12));
    const double mid = cosine_lr(1.0, 0.2, 50, 101);
    CHECK(mid == doctest::Approx(0.2 + 0.8 * 0.5).epsilon(1e-12));
    double prev = 2.0;
    for (std::size_t e = 0; e < 100; ++e) {
        const double lr = cosine_lr(1.0, 0.05, e, 100);
        CHECK(lr <= prev);
        prev = lr;
    }
}

TEST_CASE("training indices and targets") {
    CHECK(training_indices(4) == std::vector<std::uint64_t>{1, 2, 3, 4});
    auto cfg = tiny_config();
    cfg.burn_in = 128;
    const auto t = reference_targets(cfg);
    // Sequence-local index i maps to raw index i - 1 + burn_in.
    CHECK(t(0, 0) == sobol_point(128, 2)[0]);
    CHECK(t(0, 1) == sobol_point(128, 2)[1]);
    CHECK(t(23, 1) == sobol_point(151, 2)[1]);
    cfg.reference = SequenceKind::halton;
    CHECK(reference_targets(cfg)(0, 1) == halton_point(128, 2)[1]);
}

TEST_CASE("bounding box volume") {
    PointBuffer p(3, 2, {0.1, 0.2, 0.5, 0.9, 0.3, 0.4});
    CHECK(bounding_box_volume(p) == doctest::Approx(0.4 * 0.7).epsilon(1e-15));
    PointBuffer same(4, 2, std::vector<double>(8, 0.3));
    CHECK(bounding_box_volume(same) == 0.0);
}

TEST_CASE("zero pretraining epochs returns the initialization") {
    auto cfg = tiny_config();
    cfg.pretrain_epochs = 0;
    const auto r = pretrain(cfg);
    CHECK(r.model.parameters() == initial_model(cfg).parameters());
    CHECK(r.log.records.size() == 1);
}

TEST_CASE("pretraining reduces the regression error and is deterministic") {
    const auto cfg = tiny_config();
    const auto targets = reference_targets(cfg);
    const double start = pretrain_mse(initial_model(cfg), targets);
    const auto a = pretrain(cfg);
    const auto b = pretrain(cfg);
    CHECK(a.model.parameters() == b.model.parameters());
    CHECK(a.loss < start);
    CHECK(a.loss == pretrain_mse(a.model, targets));
    REQUIRE(a.log.records.size() == cfg.pretrain_epochs + 1);
    for (std::size_t e = 0; e < a.log.records.size(); ++e) {
        CHECK(a.log.records[e].stage == "pretrain");
        CHECK(a.log.records[e].epoch == e);
    }
    CHECK(a.log.records.front().loss == doctest::Approx(start).epsilon(1e-14));
    CHECK(a.model.metadata.extra.count("pretrain_mse") == 1);
}

TEST_CASE("finetune with lr zero keeps the model and a constant loss") {
    auto cfg = tiny_config();
    cfg.finetune_lr = 0.0;
    const auto pre = pretrain(cfg);
    const auto r = finetune(pre.model, cfg);
    CHECK(r.model.parameters() == pre.model.parameters());
    const double first = r.log.records.front().loss;
    for (const auto& rec : r.log.records) CHECK(rec.loss == first);
}

TEST_CASE("finetune returns the best checkpoint") {
    auto cfg = tiny_config();
    cfg.finetune_lr = 5e-3;
    const auto pre = pretrain(cfg);
    const auto r = finetune(pre.model, cfg);
    // Recorded loss equals a fresh evaluation of the returned model.
    const double recomputed = model_prefix_loss(r.model, cfg);
    CHECK(std::abs(r.loss - recomputed) <= 1e-12 * std::abs(recomputed));
    for (const auto& rec : r.log.records) CHECK(r.loss <= rec.loss);
    CHECK(r.loss <= r.log.records.front().loss);
    REQUIRE(r.log.records.size() == cfg.finetune_epochs + 1);
    CHECK(r.log.records.back().epoch == cfg.finetune_epochs);
    for (std::size_t e = 0; e < r.log.records.size(); ++e) CHECK(r.log.records[e].epoch == e);
    CHECK(r.log.records.front().lr == doctest::Approx(cfg.finetune_lr).epsilon(1e-15));

    const auto again = finetune(pre.model, cfg);
    CHECK(again.model.parameters() == r.model.parameters());
}

TEST_CASE("one-dimensional pretraining interpolates 64 Sobol' targets") {
    TrainConfig cfg;
    cfg.dim = 1;
    cfg.n_points = 64;
    cfg.hidden = 64;
    cfg.layers = 3;
    cfg.bands = 16;
    cfg.seed = 1;
    const auto r = pretrain(cfg);
    CHECK(r.loss <= 1e-4);
}

TEST_CASE("collapsed output aborts with the last good model") {
    auto cfg = tiny_config();
    MlpModel flat = initial_model(cfg);
    // Zero weights put every point at the cube center.
    std::fill(flat.parameters().begin(), flat.parameters().end(), 0.0);
    try {
        (void)finetune(flat, cfg);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("collapsed") != std::string::npos);
        CHECK(e.last_good.parameters() == flat.parameters());
    }
}

TEST_CASE("model shape must match the config") {
    auto cfg = tiny_config();
    auto other = cfg;
    other.n_points = 30;
    CHECK_THROWS_AS(finetune(initial_model(other), cfg), std::invalid_argument);
    other = cfg;
    other.dim = 3;
    CHECK_THROWS_AS(pretrain(initial_model(other), cfg), std::invalid_argument);
}

TEST_CASE("direct fine-tuning is flagged and configuration is recorded") {
    auto cfg = tiny_config();
    cfg.pretrain_epochs = 0;
    cfg.finetune_epochs = 5;
    try {
        const auto r = train_full(cfg);
        REQUIRE(r.log.warnings.size() == 1);
        CHECK(r.log.warnings[0].find("unsupported regime") != std::string::npos);
        CHECK(r.model.metadata.extra.at("warning.0") == r.log.warnings[0]);
        CHECK(r.model.metadata.extra.at("config.pretrain_epochs") == "0");
    } catch (const TrainingError& e) {
        REQUIRE(!e.log.warnings.empty());
        CHECK(e.log.warnings[0].find("unsupported regime") != std::string::npos);
    }

    cfg = tiny_config();
    cfg.finetune_epochs = 5;
    const auto r = train_full(cfg);
    CHECK(r.log.warnings.empty());
    CHECK(r.log.records.size() == cfg.pretrain_epochs + 1 + cfg.finetune_epochs + 1);
    CHECK(r.model.metadata.extra.at("config.hidden") == "16");
    CHECK(r.model.metadata.extra.count("finetune_loss") == 1);
}

TEST_CASE("log csv and checkpoints") {
    auto cfg = tiny_config();
    const auto dir = std::filesystem::temp_directory_path() / "neurolds_test_trainer";
    std::filesystem::create_directories(dir);
    cfg.checkpoint_path = (dir / "ckpt.bin").string();
    cfg.checkpoint_every = 10;
    cfg.finetune_epochs = 12;
    const auto r = train_full(cfg);
    CHECK(std::filesystem::exists(cfg.checkpoint_path));
    const auto ck = load_model(cfg.checkpoint_path);
    CHECK(ck.parameters() == r.model.parameters());

    std::ostringstream os;
    r.log.write_csv(os);
    const auto text = os.str();
    CHECK(text.rfind("stage,epoch,loss,lr,seconds\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(r.log.records.size() + 1));
    std::filesystem::remove_all(dir);
}
