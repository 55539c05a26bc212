#include "haad/trainer.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <vector>

using namespace haad;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("haad_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

trainer::TrainConfig small_config() {
    trainer::TrainConfig config;
    config.normal_label = "wave";
    config.epochs = 8;
    config.batch_size = 4;
    config.seed = 99;
    config.encoder.layers = 2;
    config.encoder.hidden = 8;
    config.encoder.d_out = 4;
    config.encoder.fuse_dim = 8;
    config.encoder.coefficients = 3;
    config.flow_layers = 3;
    return config;
}

}  // namespace

TEST_CASE("learning-rate schedule hits the endpoints and the midpoint") {
    trainer::TrainConfig config;
    CHECK(trainer::lr_at(0, config) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(trainer::lr_at(50, config) == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(trainer::lr_at(25, config) == doctest::Approx(1e-4).epsilon(1e-10));
    for (int e = 1; e <= 50; ++e)
        CHECK(trainer::lr_at(e, config) < trainer::lr_at(e - 1, config));
    CHECK_THROWS_AS(trainer::lr_at(51, config), std::invalid_argument);
}

TEST_CASE("adam first step matches the hand-evaluated recurrence") {
    ad::ParamStore store;
    auto p = store.create("p", ad::Matrix::Zero(1, 1));
    trainer::AdamOptimizer adam(store.ordered(), {});
    p->zero_grad();
    p->grad(0, 0) = 1.0;
    adam.step(0.1);
    // bias-corrected m_hat = v_hat = 1, so the step is -lr / (1 + eps)
    CHECK(p->value(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam leaves parameters untouched under zero gradients") {
    ad::ParamStore store;
    Rng rng(3);
    auto p = store.create("p", testing::random_matrix(3, 2, rng));
    const ad::Matrix before = p->value;
    trainer::AdamOptimizer adam(store.ordered(), {});
    p->zero_grad();
    adam.step(0.1);
    adam.step(0.1);
    CHECK(testing::exactly_equal(p->value, before));
}

TEST_CASE("adam updates are deterministic") {
    auto run = []() {
        ad::ParamStore store;
        Rng rng(5);
        auto p = store.create("p", testing::random_matrix(2, 2, rng));
        trainer::AdamOptimizer adam(store.ordered(), {});
        for (int s = 0; s < 5; ++s) {
            p->zero_grad();
            p->grad = testing::random_matrix(2, 2, rng);
            adam.step(0.01);
        }
        return p->value;
    };
    CHECK(testing::exactly_equal(run(), run()));
}

TEST_CASE("training on the synthetic wave class") {
    const fs::path dir = temp_dir("train");
    const auto manifest = motion::synth_dataset(7, 6, 20, 30, 0.01, dir);
    const auto config = small_config();
    const auto trained = trainer::train(manifest, config);

    SUBCASE("per-epoch records and the feature bank have the documented shapes") {
        CHECK(trained.epoch_train_nll.size() == 8);
        CHECK(trained.epoch_holdout_nll.size() == 8);
        CHECK(trained.feature_bank.rows() == 5);  // 6 wave clips minus 20% holdout
        CHECK(trained.feature_bank.cols() == 8);
        CHECK(trained.final_train_nll == trained.epoch_train_nll.back());
    }
    SUBCASE("mean train NLL decreases from the first to the last epoch") {
        CHECK(trained.epoch_train_nll.back() < trained.epoch_train_nll.front());
    }
    SUBCASE("identical seeds give identical model bytes") {
        const auto again = trainer::train(manifest, config);
        trainer::save_model(trained, dir / "a.model");
        trainer::save_model(again, dir / "b.model");
        CHECK(slurp(dir / "a.model") == slurp(dir / "b.model"));
    }
    SUBCASE("clips of other labels never influence training") {
        motion::DatasetManifest waves_only = manifest;
        std::erase_if(waves_only.clips,
                      [](const motion::ClipDescriptor& d) { return d.label != "wave"; });
        const auto again = trainer::train(waves_only, config);
        trainer::save_model(trained, dir / "full.model");
        trainer::save_model(again, dir / "waves.model");
        CHECK(slurp(dir / "full.model") == slurp(dir / "waves.model"));
    }
    SUBCASE("save then load restores parameters and bank bit for bit") {
        trainer::save_model(trained, dir / "rt.model");
        const auto loaded = trainer::load_model(dir / "rt.model");
        CHECK(testing::exactly_equal(loaded.feature_bank, trained.feature_bank));
        const auto a = trained.model->params.ordered();
        const auto b = loaded.model->params.ordered();
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(a[k].name == b[k].name);
            CHECK(testing::exactly_equal(a[k].node->value, b[k].node->value));
        }
    }
}

TEST_CASE("training errors") {
    const fs::path dir = temp_dir("train_err");
    const auto manifest = motion::synth_dataset(13, 3, 20, 30, 0.01, dir);
    auto config = small_config();

    SUBCASE("unknown label") {
        config.normal_label = "cartwheel";
        CHECK_THROWS_WITH_AS(trainer::train(manifest, config),
                             doctest::Contains("label not found"), std::runtime_error);
    }
    SUBCASE("a single normal clip is not enough") {
        motion::DatasetManifest one = manifest;
        bool kept = false;
        std::erase_if(one.clips, [&](const motion::ClipDescriptor& d) {
            if (d.label != "wave") return true;
            if (kept) return true;
            kept = true;
            return false;
        });
        CHECK_THROWS_WITH_AS(trainer::train(one, config),
                             doctest::Contains("insufficient normal samples"),
                             std::runtime_error);
    }
    SUBCASE("clips shorter than the coefficient count are rejected") {
        config.encoder.coefficients = 64;
        CHECK_THROWS_WITH_AS(trainer::train(manifest, config),
                             doctest::Contains("fewer than M"), std::runtime_error);
    }
    SUBCASE("invalid hyperparameters are rejected up front") {
        config.holdout_fraction = 1.0;
        CHECK_THROWS_AS(trainer::train(manifest, config), std::invalid_argument);
    }
}

TEST_CASE("model file rejects damage") {
    const fs::path dir = temp_dir("model_file");
    const auto manifest = motion::synth_dataset(17, 3, 20, 30, 0.01, dir);
    const auto trained = trainer::train(manifest, small_config());
    trainer::save_model(trained, dir / "m.model");
    auto bytes = slurp(dir / "m.model");

    SUBCASE("bad magic") {
        bytes[0] = 'x';
        std::ofstream(dir / "bad.model", std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_WITH_AS(trainer::load_model(dir / "bad.model"),
                             doctest::Contains("bad magic"), std::runtime_error);
    }
    SUBCASE("truncated payload") {
        std::ofstream(dir / "short.model", std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
        CHECK_THROWS_WITH_AS(trainer::load_model(dir / "short.model"),
                             doctest::Contains("truncated model"), std::runtime_error);
    }
    SUBCASE("header with the wrong parameter count") {
        const std::uint32_t len = static_cast<std::uint32_t>(
            static_cast<unsigned char>(bytes[8]) |
            (static_cast<unsigned char>(bytes[9]) << 8) |
            (static_cast<unsigned char>(bytes[10]) << 16) |
            (static_cast<unsigned char>(bytes[11]) << 24));
        auto header = nlohmann::json::parse(std::string(bytes.data() + 12, len));
        header["params"].erase(header["params"].size() - 1);
        const std::string edited = header.dump();
        std::ofstream out(dir / "edited.model", std::ios::binary);
        out.write(bytes.data(), 8);
        const std::uint32_t new_len = static_cast<std::uint32_t>(edited.size());
        const unsigned char lb[4] = {static_cast<unsigned char>(new_len & 0xff),
                                     static_cast<unsigned char>((new_len >> 8) & 0xff),
                                     static_cast<unsigned char>((new_len >> 16) & 0xff),
                                     static_cast<unsigned char>((new_len >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(lb), 4);
        out.write(edited.data(), static_cast<std::streamsize>(edited.size()));
        out.write(bytes.data() + 12 + len,
                  static_cast<std::streamsize>(bytes.size() - 12 - len));
        out.close();
        CHECK_THROWS_WITH_AS(trainer::load_model(dir / "edited.model"),
                             doctest::Contains("parameter-count mismatch"),
                             std::runtime_error);
    }
}
