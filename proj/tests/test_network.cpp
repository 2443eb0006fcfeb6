#include "doctest.h"

#include <cmath>

#include "ifd/checkpoint.hpp"
#include "ifd/network.hpp"
#include "test_util.hpp"

using namespace ifd;
using namespace ifd::test;

TEST_SUITE_BEGIN("network");

TEST_CASE("zero-initialized small-conv maps zero images to zero features") {
    BackboneConfig cfg;
    Rng rng(1);
    Backbone net(cfg, rng);
    std::vector<ParamRef> params;
    net.collect("b", &params, nullptr);
    for (auto& p : params)
        if (p.name.find("gamma") == std::string::npos) p.value->fill(0.0f);
    Tensor x({1, 3, 64, 32});
    const Tensor y = net.forward(x, false);
    for (float v : y.v) CHECK(v == 0.0f);
}

TEST_CASE("backbone forward is deterministic") {
    BackboneConfig cfg;
    Rng rng(2);
    Backbone net(cfg, rng);
    Tensor x({2, 3, 64, 32});
    Rng data(3);
    fill_random(x, data);
    const Tensor a = net.forward(x, false);
    const Tensor b = net.forward(x, false);
    CHECK(max_abs_diff(a, b) == 0.0f);
}

TEST_CASE("64x32 input at stride 8 with C=64 gives 64x8x4 features") {
    BackboneConfig cfg;  // widths 16/32/64/64, stride 8
    Rng rng(4);
    Backbone net(cfg, rng);
    Tensor x({1, 3, 64, 32});
    const Tensor y = net.forward(x, false);
    CHECK(y.shape == std::vector<int>{1, 64, 8, 4});
}

TEST_CASE("undersized images are rejected") {
    BackboneConfig cfg;
    Rng rng(5);
    Backbone net(cfg, rng);
    Tensor tiny({1, 3, 4, 4});
    CHECK_THROWS_AS(net.forward(tiny, false), std::invalid_argument);
}

TEST_CASE("resnet50 option produces the documented shape") {
    BackboneConfig cfg;
    cfg.arch = "resnet50";
    cfg.output_stride = 32;
    Rng rng(6);
    Backbone net(cfg, rng);
    CHECK(net.channels() == 2048);
    Tensor x({1, 3, 64, 32});
    const Tensor y = net.forward(x, false);
    CHECK(y.shape == std::vector<int>{1, 2048, 2, 1});

    BackboneConfig cfg16 = cfg;
    cfg16.output_stride = 16;
    Rng rng2(6);
    Backbone net16(cfg16, rng2);
    const Tensor y16 = net16.forward(x, false);
    CHECK(y16.shape == std::vector<int>{1, 2048, 4, 2});
}

TEST_CASE("ikt attention with zero kernel and bias is exactly 0.5") {
    Rng rng(7);
    IKTModule ikt(7, rng);
    ikt.conv.weight.fill(0.0f);
    ikt.conv.bias.fill(0.0f);
    Tensor fa({8, 6, 5});
    fill_random(fa, rng);
    const Tensor wi = ikt_attention(fa, ikt);
    CHECK(wi.shape == std::vector<int>{1, 6, 5});
    for (float v : wi.v) CHECK(v == 0.5f);
}

TEST_CASE("ikt attention rises monotonically in the bias") {
    Rng rng(8);
    IKTModule ikt(3, rng);
    Tensor fa({4, 5, 4});
    fill_random(fa, rng);
    double means[3];
    const float biases[3] = {0.0f, 5.0f, 10.0f};
    for (int i = 0; i < 3; ++i) {
        ikt.conv.bias.fill(biases[i]);
        const Tensor wi = ikt_attention(fa, ikt);
        double acc = 0.0;
        for (float v : wi.v) acc += v;
        means[i] = acc / wi.numel();
    }
    CHECK(means[0] < means[1]);
    CHECK(means[1] < means[2]);
}

TEST_CASE("ikt attention matches the per-position loop oracle") {
    Rng rng(9);
    const int c = 7, h = 6, w = 5, k = 3;
    IKTModule ikt(k, rng);
    Tensor fa({c, h, w});
    fill_random(fa, rng);
    const Tensor wi = ikt_attention(fa, ikt);

    // oracle: explicit chan-max/mean, explicit convolution, sigmoid
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = ikt.conv.bias(0);
            for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw) {
                    const int sy = y - k / 2 + kh, sx = x - k / 2 + kw;
                    if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                    float mx = fa(0, sy, sx);
                    double mean = 0.0;
                    for (int ch = 0; ch < c; ++ch) {
                        mx = std::max(mx, fa(ch, sy, sx));
                        mean += fa(ch, sy, sx);
                    }
                    mean /= c;
                    acc += mx * ikt.conv.weight(0, 0, kh, kw) + mean * ikt.conv.weight(0, 1, kh, kw);
                }
            const double expect = 1.0 / (1.0 + std::exp(-acc));
            CHECK(wi(0, y, x) == doctest::Approx(expect).epsilon(1e-4));
        }
}

TEST_CASE("ikt attention stays strictly inside (0,1)") {
    Rng rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        IKTModule ikt(trial % 2 ? 3 : 7, rng);
        Tensor fa({5, 4, 4});
        fill_random(fa, rng, trial % 3 == 0 ? 100.0f : 1.0f);
        const Tensor wi = ikt_attention(fa, ikt);
        for (float v : wi.v) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
    }
}

TEST_CASE("ikt attention is invariant to channel permutations") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        IKTModule ikt(3, rng);
        const int c = 6, h = 4, w = 3;
        Tensor fa({c, h, w});
        fill_random(fa, rng);
        const Tensor base = ikt_attention(fa, ikt);

        std::vector<int> perm(c);
        for (int i = 0; i < c; ++i) perm[i] = i;
        rng.shuffle(perm);
        Tensor shuffled({c, h, w});
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) shuffled(ch, y, x) = fa(perm[ch], y, x);
        const Tensor permuted = ikt_attention(shuffled, ikt);
        CHECK(max_abs_diff(base, permuted) == 0.0f);
    }
}

TEST_CASE("NaN input to ikt raises a numeric error") {
    Rng rng(12);
    IKTModule ikt(3, rng);
    Tensor fa({2, 3, 3});
    fa(1, 1, 1) = std::nanf("");
    CHECK_THROWS_WITH_AS(ikt_attention(fa, ikt), doctest::Contains("numeric error"),
                         std::runtime_error);
}

TEST_CASE("apply_attention identities and oracle") {
    Rng rng(13);
    Tensor fg({5, 4, 3});
    fill_random(fg, rng);

    Tensor ones = Tensor::full({1, 4, 3}, 1.0f);
    CHECK(max_abs_diff(apply_attention(ones, fg), fg) == 0.0f);

    Tensor zeros({1, 4, 3});
    for (float v : apply_attention(zeros, fg).v) CHECK(v == 0.0f);

    Tensor wi({1, 4, 3});
    fill_random(wi, rng);
    const Tensor frg = apply_attention(wi, fg);
    for (int c = 0; c < 5; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 3; ++x)
                CHECK(frg(c, y, x) == doctest::Approx(wi(0, y, x) * fg(c, y, x)));

    Tensor bad({1, 5, 3});
    CHECK_THROWS_AS(apply_attention(bad, fg), std::invalid_argument);
}

TEST_CASE("clothing_feature: all-ones mask with identity BN is the normalized spatial mean") {
    const int c = 6, h = 4, w = 3;
    CBDPath path(c);
    Rng rng(14);
    Tensor frg({c, h, w});
    fill_random(frg, rng);
    Tensor ones = Tensor::full({h, w}, 1.0f);
    // eval mode with unit running stats makes BN the identity
    const Tensor fc = clothing_feature(frg, ones, path, false);

    std::vector<double> mean(c, 0.0);
    double norm = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) mean[ch] += frg(ch, y, x);
        mean[ch] /= h * w;
        norm += mean[ch] * mean[ch];
    }
    norm = std::sqrt(norm);
    for (int ch = 0; ch < c; ++ch)
        CHECK(fc(ch) == doctest::Approx(mean[ch] / norm).epsilon(1e-4));
}

TEST_CASE("clothing_feature: all-zero mask yields the zero vector") {
    const int c = 4;
    CBDPath path(c);
    Rng rng(15);
    Tensor frg({c, 3, 3});
    fill_random(frg, rng);
    Tensor zeros({3, 3});
    const Tensor fc = clothing_feature(frg, zeros, path, false);
    for (float v : fc.v) CHECK(v == 0.0f);
}

TEST_CASE("clothing_feature random case matches the loop oracle") {
    const int c = 5, h = 4, w = 2;
    CBDPath path(c);
    Rng rng(16);
    Tensor frg({c, h, w}), wc({h, w});
    fill_random(frg, rng);
    for (float& v : wc.v) v = static_cast<float>(rng.uniform());
    const Tensor fc = clothing_feature(frg, wc, path, false);

    std::vector<double> pooled(c, 0.0);
    double norm = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) pooled[ch] += wc(y, x) * frg(ch, y, x);
        pooled[ch] /= h * w;
        norm += pooled[ch] * pooled[ch];
    }
    norm = std::sqrt(norm);
    for (int ch = 0; ch < c; ++ch)
        CHECK(fc(ch) == doctest::Approx(pooled[ch] / norm).epsilon(1e-4));
}

TEST_CASE("identity head basics and matrix oracle") {
    Rng rng(17);
    const int c = 6, ids = 4;
    IdentityHead head(c, ids, rng);

    SUBCASE("zero features and zero classifier give zero logits") {
        head.fc().weight.fill(0.0f);
        Tensor f({1, c, 3, 2});
        auto out = head.forward(f, false);
        for (float v : out.logits.v) CHECK(v == 0.0f);
    }
    SUBCASE("constructed classifier puts the argmax on the favored class") {
        head.fc().weight.fill(0.0f);
        for (int j = 0; j < c; ++j) head.fc().weight(2, j) = 1.0f;
        Tensor f = Tensor::full({1, c, 2, 2}, 1.0f);
        auto out = head.forward(f, false);
        int best = 0;
        for (int j = 1; j < ids; ++j)
            if (out.logits(0, j) > out.logits(0, best)) best = j;
        CHECK(best == 2);
    }
    SUBCASE("random case matches the matrix-product oracle") {
        Tensor f({2, c, 3, 2});
        fill_random(f, rng);
        auto out = head.forward(f, false);
        for (int n = 0; n < 2; ++n)
            for (int o = 0; o < ids; ++o) {
                double acc = head.fc().bias(o);
                for (int ch = 0; ch < c; ++ch) {
                    double mean = 0.0;
                    for (int y = 0; y < 3; ++y)
                        for (int x = 0; x < 2; ++x) mean += f(n, ch, y, x);
                    acc += (mean / 6.0) * head.fc().weight(o, ch);
                }
                CHECK(out.logits(n, o) == doctest::Approx(acc).epsilon(1e-4));
            }
    }
}

TEST_CASE("streams share no weights") {
    ModelConfig mc;
    mc.num_identities = 4;
    mc.variant = Variant::IFD;
    mc.init_seed = 3;
    DualStreamModel model(mc);

    Rng rng(18);
    Tensor images({1, 3, 64, 32}), masked({1, 3, 64, 32}), wc({1, 1, 8, 4});
    fill_random(images, rng);
    fill_random(masked, rng);
    wc.fill(0.5f);

    auto before = model.forward(images, masked, wc, false);

    // mutate every main-stream parameter; attention outputs must not move
    std::vector<ParamRef> main_params;
    model.main_stream().collect("main", &main_params, nullptr);
    for (auto& p : main_params)
        for (float& v : p.value->v) v += 0.37f;
    auto after = model.forward(images, masked, wc, false);
    CHECK(max_abs_diff(before.w_i, after.w_i) == 0.0f);
    CHECK(max_abs_diff(before.logits_attn, after.logits_attn) == 0.0f);

    // and vice versa
    std::vector<ParamRef> attn_params = model.attention_params();
    auto before2 = model.forward(images, masked, wc, false);
    for (auto& p : attn_params)
        for (float& v : p.value->v) v += 0.37f;
    auto after2 = model.forward(images, masked, wc, false);
    CHECK(max_abs_diff(before2.logits_main, after2.logits_main) > 0.0f);  // via W_I
    Tensor fg_before = model.main_stream().forward(images, false);
    Tensor fg_after = model.main_stream().forward(images, false);
    CHECK(max_abs_diff(fg_before, fg_after) == 0.0f);
}

TEST_CASE("checkpoint round-trip is bit-identical and records the config") {
    TempDir dir("ckpt");
    ModelConfig mc;
    mc.num_identities = 3;
    mc.variant = Variant::IFD;
    mc.init_seed = 9;
    mc.backbone.ikt_kernel = 5;
    DualStreamModel model(mc);

    CheckpointData data;
    data.header["backbone"] = {{"arch", mc.backbone.arch},
                               {"ikt_kernel", mc.backbone.ikt_kernel}};
    for (const ArrayRef& a : model.all_arrays()) data.entries.emplace_back(a.name, *a.value);
    const std::string path = dir.str() + "/model.ckpt";
    save_checkpoint(path, data);

    const CheckpointData loaded = load_checkpoint(path);
    CHECK(loaded.header.at("backbone").at("ikt_kernel") == 5);
    REQUIRE(loaded.entries.size() == data.entries.size());
    for (std::size_t i = 0; i < data.entries.size(); ++i) {
        CHECK(loaded.entries[i].first == data.entries[i].first);
        CHECK(loaded.entries[i].second.shape == data.entries[i].second.shape);
        CHECK(max_abs_diff(loaded.entries[i].second, data.entries[i].second) == 0.0f);
    }
    CHECK(loaded.has("ikt.conv.weight"));
}

TEST_SUITE_END();
