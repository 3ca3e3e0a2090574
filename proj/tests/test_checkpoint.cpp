#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "rt/checkpoint.hpp"

using namespace rt;

namespace {

Model sample_model() {
    ModelConfig cfg;
    cfg.kind = ModelConfig::Kind::mlp;
    cfg.input_shape = {1, 8, 8};
    cfg.hidden = {6, 5};
    cfg.classes = 3;
    return build_model(cfg, 77);
}

bool models_equal(const Model& a, const Model& b) {
    if (!(a.config == b.config) || a.params.size() != b.params.size()) return false;
    for (size_t i = 0; i < a.params.size(); ++i) {
        if (a.params[i].first != b.params[i].first) return false;
        const Tensor& ta = a.params[i].second;
        const Tensor& tb = b.params[i].second;
        if (ta.shape != tb.shape) return false;
        if (std::memcmp(ta.ptr(), tb.ptr(), static_cast<size_t>(ta.numel()) * sizeof(Scalar)) != 0)
            return false;
    }
    return true;
}

std::string checkpoint_bytes(const Model& m) {
    std::ostringstream out(std::ios::binary);
    write_checkpoint(out, m);
    return out.str();
}

}  // namespace

TEST_CASE("checkpoints round trip bitwise through streams") {
    Model m = sample_model();
    std::string bytes = checkpoint_bytes(m);
    std::istringstream in(bytes, std::ios::binary);
    Model r = read_checkpoint(in);
    CHECK(models_equal(m, r));

    // a second serialization is byte identical
    CHECK(checkpoint_bytes(r) == bytes);
}

TEST_CASE("checkpoints round trip through files, rescnn included") {
    ModelConfig cfg = ModelConfig::rescnn_tiny({1, 8, 8}, 4);
    cfg.blocks_per_stage = 2;
    Model m = build_model(cfg, 8);
    const char* path = "test_ckpt_rt.rckpt";
    save_checkpoint(m, path);
    Model r = load_checkpoint(path);
    CHECK(models_equal(m, r));
    std::remove(path);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("cannot open"),
                         std::runtime_error);
}

TEST_CASE("loader distinguishes magic, version and truncation") {
    Model m = sample_model();
    std::string good = checkpoint_bytes(m);

    std::string bad = good;
    bad[0] = 'X';
    {
        std::istringstream in(bad, std::ios::binary);
        CHECK_THROWS_WITH_AS(read_checkpoint(in), doctest::Contains("bad magic"),
                             std::runtime_error);
    }
    bad = good;
    bad[5] = '2';
    {
        std::istringstream in(bad, std::ios::binary);
        CHECK_THROWS_WITH_AS(read_checkpoint(in),
                             doctest::Contains("unsupported checkpoint format version '2'"),
                             std::runtime_error);
    }
    bad = good.substr(0, good.size() - 7);
    {
        std::istringstream in(bad, std::ios::binary);
        CHECK_THROWS_WITH_AS(read_checkpoint(in), doctest::Contains("truncated"),
                             std::runtime_error);
    }
    bad = good.substr(0, 3);
    {
        std::istringstream in(bad, std::ios::binary);
        CHECK_THROWS_WITH_AS(read_checkpoint(in), doctest::Contains("truncated"),
                             std::runtime_error);
    }
}

TEST_CASE("loader cross-checks parameters against the architecture") {
    Model m = sample_model();

    std::string bytes = checkpoint_bytes(m);
    uint32_t arch_len = 0;
    std::memcpy(&arch_len, bytes.data() + 6, 4);
    size_t count_at = 6 + 4 + arch_len;  // magic+version, arch length, arch block

    // wrong parameter count: claim one more than the architecture builds
    {
        std::string bad = bytes;
        uint32_t fake = static_cast<uint32_t>(m.params.size()) + 1;
        std::memcpy(bad.data() + count_at, &fake, 4);
        std::istringstream in(bad, std::ios::binary);
        CHECK_THROWS_WITH_AS(read_checkpoint(in), doctest::Contains("parameters"),
                             std::runtime_error);
    }

    // a tampered parameter name must be rejected
    {
        std::string bad = bytes;
        size_t name_at = count_at + 4 + 2;  // count, first name length
        bad[name_at] = 'z';                 // "fc0.w" -> "zc0.w"
        std::istringstream in(bad, std::ios::binary);
        CHECK_THROWS_WITH_AS(read_checkpoint(in), doctest::Contains("architecture expects"),
                             std::runtime_error);
    }
}

TEST_CASE("loaded checkpoints are usable models") {
    Model m = sample_model();
    // make the weights distinctive so the round trip is meaningful
    m.param("fc0.b")[0] = Scalar(42);
    std::string bytes = checkpoint_bytes(m);
    std::istringstream in(bytes, std::ios::binary);
    Model r = read_checkpoint(in);
    CHECK(r.param("fc0.b")[0] == Scalar(42));
    Tensor x = Tensor::full({1, 1, 8, 8}, Scalar(0.5));
    Tensor a = logits(m, x);
    Tensor b = logits(r, x);
    CHECK(std::memcmp(a.ptr(), b.ptr(), static_cast<size_t>(a.numel()) * sizeof(Scalar)) == 0);
}
