#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "vbp/model.hpp"
#include "vbp/model_io.hpp"

namespace fs = std::filesystem;
using vbp::Model;

namespace {

std::vector<char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path temp_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / ("vbp_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

const std::vector<float>& conv_weights(const vbp::LayerSpec& l) {
    return std::get<vbp::Conv2d>(l).weights;
}

}  // namespace

TEST_CASE("gtsdb preset follows the published layer plan") {
    Model m = vbp::preset("gtsdb", 1);
    // 8 x (bn + conv + relu) + flatten + fc + relu + fc
    CHECK(m.layers.size() == 8 * 3 + 1 + 3);
    CHECK(m.input_shape == std::array<int, 3>{3, 125, 125});
    std::vector<int> channels, strides;
    for (const auto& l : m.layers)
        if (const auto* c = std::get_if<vbp::Conv2d>(&l)) {
            channels.push_back(c->out_channels);
            strides.push_back(c->stride_h);
        }
    CHECK(channels == std::vector<int>{16, 16, 24, 24, 32, 32, 48, 48});
    CHECK(strides == std::vector<int>{1, 2, 1, 2, 1, 2, 1, 2});
    std::vector<int> fc_dims;
    for (const auto& l : m.layers)
        if (const auto* f = std::get_if<vbp::FullyConnected>(&l)) fc_dims.push_back(f->out_dim);
    CHECK(fc_dims == std::vector<int>{64, 43});
}

TEST_CASE("netsvf preset conv channel sequence") {
    Model m = vbp::preset("netsvf", 3);
    std::vector<int> channels;
    for (const auto& l : m.layers)
        if (const auto* c = std::get_if<vbp::Conv2d>(&l)) channels.push_back(c->out_channels);
    CHECK(channels == std::vector<int>{32, 32, 48, 48, 64, 64, 96, 96, 128, 128});
    CHECK(vbp::output_dim(m) == 1);
}

TEST_CASE("preset generation is a pure function of name and seed") {
    Model a = vbp::preset("tiny", 7);
    Model b = vbp::preset("tiny", 7);
    Model c = vbp::preset("tiny", 8);
    REQUIRE(a.layers.size() == b.layers.size());
    CHECK(conv_weights(a.layers[1]) == conv_weights(b.layers[1]));
    CHECK(conv_weights(a.layers[1]) != conv_weights(c.layers[1]));
}

TEST_CASE("unknown preset name is rejected") {
    CHECK_THROWS_AS(vbp::preset("resnet200", 1), vbp::Error);
}

TEST_CASE("save/load round-trip is bit-exact and deterministic") {
    const fs::path dir = temp_dir("roundtrip");
    Model m = vbp::preset("tiny", 42);
    vbp::save_model(m, dir / "manifest.json");
    Model loaded = vbp::load_model(dir / "manifest.json");

    REQUIRE(loaded.layers.size() == m.layers.size());
    CHECK(conv_weights(loaded.layers[1]) == conv_weights(m.layers[1]));
    CHECK(conv_weights(loaded.layers[4]) == conv_weights(m.layers[4]));
    CHECK(std::get<vbp::FullyConnected>(loaded.layers[7]).weights ==
          std::get<vbp::FullyConnected>(m.layers[7]).weights);

    const auto manifest1 = slurp(dir / "manifest.json");
    const auto blob1 = slurp(dir / "weights.bin");
    vbp::save_model(loaded, dir / "manifest.json");
    CHECK(slurp(dir / "manifest.json") == manifest1);
    CHECK(slurp(dir / "weights.bin") == blob1);
}

TEST_CASE("truncated weights blob reports expected vs actual byte count") {
    const fs::path dir = temp_dir("truncated");
    vbp::save_model(vbp::preset("tiny", 1), dir / "manifest.json");
    auto bytes = slurp(dir / "weights.bin");
    bytes.resize(bytes.size() - 4);
    {
        std::ofstream f(dir / "weights.bin", std::ios::binary | std::ios::trunc);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    try {
        vbp::load_model(dir / "manifest.json");
        FAIL("expected IoError");
    } catch (const vbp::IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("expected") != std::string::npos);
    }
}

TEST_CASE("corrupted weights blob fails the checksum") {
    const fs::path dir = temp_dir("corrupt");
    vbp::save_model(vbp::preset("tiny", 1), dir / "manifest.json");
    auto bytes = slurp(dir / "weights.bin");
    bytes[8] = static_cast<char>(bytes[8] ^ 0x40);
    {
        std::ofstream f(dir / "weights.bin", std::ios::binary | std::ios::trunc);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    try {
        vbp::load_model(dir / "manifest.json");
        FAIL("expected IoError");
    } catch (const vbp::IoError& e) {
        CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }
}

TEST_CASE("manifest with inconsistent declared geometry fails shape-chain validation") {
    const fs::path dir = temp_dir("shapechain");
    vbp::save_model(vbp::preset("tiny", 1), dir / "manifest.json");
    nlohmann::json manifest;
    {
        std::ifstream f(dir / "manifest.json");
        f >> manifest;
    }
    // Claiming stride 2 shrinks the conv output, so the flatten size no
    // longer matches the FC head.
    manifest["layers"][1]["stride"] = {2, 2};
    {
        std::ofstream f(dir / "manifest.json");
        f << manifest.dump(2);
    }
    try {
        vbp::load_model(dir / "manifest.json");
        FAIL("expected ShapeError");
    } catch (const vbp::ShapeError& e) {
        CHECK(std::string(e.what()).find("layer") != std::string::npos);
    }
}

TEST_CASE("missing manifest and unwritable target are reported") {
    CHECK_THROWS_AS(vbp::load_model("/nonexistent/manifest.json"), vbp::IoError);
    CHECK_THROWS_AS(vbp::save_model(vbp::preset("tiny", 1), "/nonexistent/dir/manifest.json"),
                    vbp::IoError);
}

TEST_CASE("validate rejects broken shape chains with the layer index") {
    Model m = vbp::preset("tiny", 1);
    std::get<vbp::Conv2d>(m.layers[4]).in_channels = 5;
    CHECK_THROWS_AS(vbp::validate(m), vbp::ShapeError);

    Model m2 = vbp::preset("tiny", 1);
    // conv without a ReLU before the next conv
    m2.layers.erase(m2.layers.begin() + 2);
    CHECK_THROWS_AS(vbp::validate(m2), vbp::ShapeError);
}
