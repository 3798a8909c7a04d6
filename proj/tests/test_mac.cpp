#include <doctest.h>

#include <cmath>
#include <fstream>

#include "relabel/errors.hpp"
#include "relabel/mac.hpp"
#include "relabel/model_io.hpp"
#include "relabel/rng.hpp"
#include "relabel/synthetic.hpp"

#include "support/tmpdir.hpp"

using namespace relabel;

namespace {

MacConfig tiny_config(std::size_t input_dim = 6, double dropout = 0.5) {
    MacConfig cfg;
    cfg.input_dim = input_dim;
    cfg.trunk_width = 8;
    cfg.branch_width = 5;
    cfg.dropout_rate = dropout;
    cfg.schema = default_synthetic_schema(3);
    return cfg;
}

Matrix random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
    Matrix x(n, d);
    Rng rng(seed);
    for (double& v : x.data) v = rng.normal();
    return x;
}

}  // namespace

TEST_CASE("init_model is deterministic per seed and shaped by config") {
    const MacConfig cfg = tiny_config();
    const MacModel m1 = init_model(cfg, 42);
    const MacModel m2 = init_model(cfg, 42);
    const MacModel m3 = init_model(cfg, 43);

    CHECK(m1.trunk.weight.rows == 6);
    CHECK(m1.trunk.weight.cols == 8);
    CHECK(m1.branches.size() == 3);
    CHECK(m1.branches[0].hidden.weight.rows == 8);
    CHECK(m1.branches[0].output.weight.cols == 2);
    for (double b : m1.trunk.bias) CHECK(b == 0.0);

    CHECK(m1.trunk.weight.data == m2.trunk.weight.data);
    CHECK(m1.branches[2].output.weight.data == m2.branches[2].output.weight.data);
    CHECK(m1.trunk.weight.data != m3.trunk.weight.data);
}

TEST_CASE("forward emits probability rows in both modes") {
    const MacModel model = init_model(tiny_config(), 7);
    const Matrix x = random_inputs(9, 6, 1);

    for (ForwardMode mode : {ForwardMode::Deterministic, ForwardMode::Stochastic}) {
        Rng rng(3);
        const auto probs = mac_forward(model, x, mode, &rng);
        REQUIRE(probs.size() == 3);
        for (const Matrix& pa : probs) {
            REQUIRE(pa.rows == 9);
            REQUIRE(pa.cols == 2);
            for (std::size_t i = 0; i < pa.rows; ++i) {
                double sum = 0.0;
                for (std::size_t c = 0; c < pa.cols; ++c) {
                    CHECK(pa.at(i, c) >= 0.0);
                    sum += pa.at(i, c);
                }
                CHECK(std::fabs(sum - 1.0) <= 1e-6);
            }
        }
    }
}

TEST_CASE("dropout_rate 0 makes stochastic and deterministic passes identical") {
    const MacModel model = init_model(tiny_config(6, 0.0), 7);
    const Matrix x = random_inputs(4, 6, 2);
    Rng rng(5);
    const auto det = mac_forward(model, x, ForwardMode::Deterministic);
    const auto sto = mac_forward(model, x, ForwardMode::Stochastic, &rng);
    for (std::size_t a = 0; a < det.size(); ++a) CHECK(det[a].data == sto[a].data);
}

TEST_CASE("stochastic passes with equal rng state coincide, otherwise differ") {
    const MacModel model = init_model(tiny_config(), 7);
    const Matrix x = random_inputs(4, 6, 2);
    Rng r1(99), r2(99), r3(100);
    const auto a = mac_forward(model, x, ForwardMode::Stochastic, &r1);
    const auto b = mac_forward(model, x, ForwardMode::Stochastic, &r2);
    const auto c = mac_forward(model, x, ForwardMode::Stochastic, &r3);
    CHECK(a[0].data == b[0].data);
    CHECK(a[0].data != c[0].data);
}

TEST_CASE("forward rejects mismatched input dimension") {
    const MacModel model = init_model(tiny_config(), 7);
    const Matrix x = random_inputs(4, 5, 2);
    CHECK_THROWS_AS(mac_forward(model, x, ForwardMode::Deterministic), Error);
}

TEST_CASE("predict maps argmax to tri-state with ties to -1") {
    // Zeroed model: all logits equal, softmax exactly (0.5, 0.5) per row.
    MacConfig cfg = tiny_config(4, 0.0);
    MacModel model = init_model(cfg, 1);
    for (auto block : parameter_blocks(model))
        for (double& v : block) v = 0.0;
    const Matrix x = random_inputs(3, 4, 9);
    const DeterministicPrediction pred = mac_predict(model, x);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t a = 0; a < 3; ++a) CHECK(pred.labels.at(i, a) == -1);

    // Bias the first attribute's True logit; prediction flips to +1.
    model.branches[0].output.bias[0] = 2.0;
    const DeterministicPrediction pred2 = mac_predict(model, x);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(pred2.labels.at(i, 0) == 1);
        CHECK(pred2.confidence.at(i, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    }
    CHECK(pred2.labels.rows == 3);
    CHECK(pred2.labels.cols == 3);
}

TEST_CASE("model serialization round trips exactly") {
    test_support::TmpDir dir("model");
    const MacConfig cfg = tiny_config();
    MacModel model = init_model(cfg, 11);
    // perturb running stats so they are not the init values
    model.trunk_bn.running_mean[2] = 0.75;
    model.branches[1].hidden_bn.running_var[0] = 2.5;

    const std::string path = (dir.path() / "model.bin").string();
    save_model(path, model);
    const MacModel loaded = load_model(path, cfg.schema);

    CHECK(loaded.trunk.weight.data == model.trunk.weight.data);
    CHECK(loaded.trunk_bn.running_mean == model.trunk_bn.running_mean);
    CHECK(loaded.branches[1].hidden_bn.running_var == model.branches[1].hidden_bn.running_var);
    CHECK(loaded.branches[2].output.bias == model.branches[2].output.bias);
    CHECK(loaded.config.dropout_rate == model.config.dropout_rate);

    const Matrix x = random_inputs(5, 6, 3);
    const auto p1 = mac_forward(model, x, ForwardMode::Deterministic);
    const auto p2 = mac_forward(loaded, x, ForwardMode::Deterministic);
    for (std::size_t a = 0; a < p1.size(); ++a) CHECK(p1[a].data == p2[a].data);

    SUBCASE("wrong schema is rejected") {
        const AttributeSchema other = default_synthetic_schema(4);
        CHECK_THROWS_WITH_AS(load_model(path, other), doctest::Contains("schema hash"), Error);
    }
    SUBCASE("truncated file is rejected") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        bytes.resize(bytes.size() / 2);
        const std::string cut = (dir.path() / "cut.bin").string();
        std::ofstream out(cut, std::ios::binary);
        out << bytes;
        out.close();
        CHECK_THROWS_WITH_AS(load_model(cut, cfg.schema), doctest::Contains("truncated"), Error);
    }
}
