#include "doctest.h"

#include "ifd/masking.hpp"
#include "test_util.hpp"

using namespace ifd;
using namespace ifd::test;

TEST_SUITE_BEGIN("masking");

namespace {

GrayImage parsing_of(int h, int w, std::uint8_t code) {
    GrayImage g;
    g.height = h;
    g.width = w;
    g.pixels.assign(static_cast<std::size_t>(h) * w, code);
    return g;
}

} // namespace

TEST_CASE("clothing pixels map to 1, others to 0") {
    const RegionVocabulary vocab = RegionVocabulary::default_vocabulary();
    GrayImage parsing = parsing_of(2, 2, 0);
    parsing.at(0, 0) = 3;  // upper-clothes
    parsing.at(0, 1) = 1;  // hair
    parsing.at(1, 0) = 4;  // pants
    const Tensor mask = clothing_region_mask(parsing, vocab);
    CHECK(mask(0, 0) == 1.0f);
    CHECK(mask(0, 1) == 0.0f);
    CHECK(mask(1, 0) == 1.0f);
    CHECK(mask(1, 1) == 0.0f);
}

TEST_CASE("all-background parsing gives an all-zero mask") {
    const RegionVocabulary vocab = RegionVocabulary::default_vocabulary();
    const Tensor mask = clothing_region_mask(parsing_of(5, 4, 0), vocab);
    for (float v : mask.v) CHECK(v == 0.0f);
}

TEST_CASE("unknown region codes are reported") {
    const RegionVocabulary vocab = RegionVocabulary::default_vocabulary();
    GrayImage parsing = parsing_of(2, 2, 0);
    parsing.at(0, 0) = 200;
    parsing.at(1, 1) = 201;
    CHECK_THROWS_WITH_AS(clothing_region_mask(parsing, vocab), doctest::Contains("200, 201"),
                         std::runtime_error);
}

TEST_CASE("mask binarity holds over random parsings") {
    const RegionVocabulary vocab = RegionVocabulary::default_vocabulary();
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        GrayImage parsing = parsing_of(6, 5, 0);
        for (auto& p : parsing.pixels) p = static_cast<std::uint8_t>(rng.below(9));
        const Tensor mask = clothing_region_mask(parsing, vocab);
        for (float v : mask.v) CHECK((v == 0.0f || v == 1.0f));
    }
}

TEST_CASE("masked image replaces exactly the clothing region") {
    const RegionVocabulary vocab = RegionVocabulary::default_vocabulary();
    Rng rng(7);
    Sample s;
    s.image = Tensor({3, 8, 6});
    fill_random(s.image, rng, 0.2f);
    for (float& v : s.image.v) v = std::fabs(v);

    SUBCASE("no clothing pixels: identity") {
        s.parsing = parsing_of(8, 6, 2);
        const MaskedImage m = clothing_masked_image(s, vocab, 0.0f);
        CHECK(max_abs_diff(m.image, s.image) == 0.0f);
    }
    SUBCASE("all clothing, fill 0: black image") {
        s.parsing = parsing_of(8, 6, 4);
        const MaskedImage m = clothing_masked_image(s, vocab, 0.0f);
        for (float v : m.image.v) CHECK(v == 0.0f);
    }
    SUBCASE("half clothing: per-pixel oracle") {
        s.parsing = parsing_of(8, 6, 0);
        for (int y = 4; y < 8; ++y)
            for (int x = 0; x < 6; ++x) s.parsing.at(y, x) = 3;
        const MaskedImage m = clothing_masked_image(s, vocab, 0.5f);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 6; ++x) {
                    if (y >= 4)
                        CHECK(m.image(c, y, x) == 0.5f);
                    else
                        CHECK(m.image(c, y, x) == s.image(c, y, x));
                }
    }
}

TEST_CASE("head pixels survive masking bit-identically over random samples") {
    const RegionVocabulary vocab = RegionVocabulary::default_vocabulary();
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        Sample s;
        s.image = Tensor({3, 6, 5});
        fill_random(s.image, rng);
        s.parsing = parsing_of(6, 5, 0);
        for (auto& p : s.parsing.pixels) p = static_cast<std::uint8_t>(rng.below(9));
        const MaskedImage m = clothing_masked_image(s, vocab, 0.0f);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 5; ++x) {
                const int code = s.parsing.at(y, x);
                if (code == 1 || code == 2)  // hair, face
                    for (int c = 0; c < 3; ++c) CHECK(m.image(c, y, x) == s.image(c, y, x));
            }
    }
}

TEST_CASE("adding clothing codes never decreases the mask sum") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        GrayImage parsing = parsing_of(7, 4, 0);
        for (auto& p : parsing.pixels) p = static_cast<std::uint8_t>(rng.below(9));
        RegionVocabulary small = RegionVocabulary::default_vocabulary();
        RegionVocabulary big = RegionVocabulary::default_vocabulary();
        big.clothing_set.insert(big.labels.at("shoes"));
        double sum_small = 0.0, sum_big = 0.0;
        for (float v : clothing_region_mask(parsing, small).v) sum_small += v;
        for (float v : clothing_region_mask(parsing, big).v) sum_big += v;
        CHECK(sum_big >= sum_small);
    }
}

TEST_CASE("downsample: all-ones stays all-ones at any target") {
    Tensor ones = Tensor::full({12, 10}, 1.0f);
    for (auto [th, tw] : {std::pair{1, 1}, {3, 2}, {5, 7}, {12, 10}}) {
        const Tensor out = downsample_mask(ones, th, tw);
        for (float v : out.v) CHECK(v == doctest::Approx(1.0f).epsilon(1e-6));
    }
}

TEST_CASE("2x2 half mask to 1x1 is 0.5") {
    Tensor m({2, 2});
    m(0, 0) = 1.0f;
    m(0, 1) = 1.0f;
    const Tensor out = downsample_mask(m, 1, 1);
    CHECK(out(0, 0) == doctest::Approx(0.5f));
}

TEST_CASE("random 32x16 mask to 8x4 equals the block-mean oracle") {
    Rng rng(17);
    Tensor m({32, 16});
    for (float& v : m.v) v = rng.uniform() < 0.5 ? 1.0f : 0.0f;
    const Tensor out = downsample_mask(m, 8, 4);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (int y = i * 4; y < (i + 1) * 4; ++y)
                for (int x = j * 4; x < (j + 1) * 4; ++x) acc += m(y, x);
            CHECK(out(i, j) == doctest::Approx(acc / 16.0).epsilon(1e-6));
        }
}

TEST_CASE("downsample preserves the mean when target divides source") {
    Rng rng(19);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor m({24, 12});
        for (float& v : m.v) v = rng.uniform() < 0.4 ? 1.0f : 0.0f;
        const Tensor out = downsample_mask(m, 6, 4);
        double src = 0.0, dst = 0.0;
        for (float v : m.v) src += v;
        for (float v : out.v) dst += v;
        CHECK(dst / out.numel() == doctest::Approx(src / m.numel()).epsilon(1e-6));
        for (float v : out.v) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("zero target dimension is rejected") {
    Tensor m({4, 4});
    CHECK_THROWS_AS(downsample_mask(m, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS(downsample_mask(m, 2, 0), std::invalid_argument);
}

TEST_CASE("feature mask is all-zero iff pixel mask is all-zero") {
    const RegionVocabulary vocab = RegionVocabulary::default_vocabulary();
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        GrayImage parsing = parsing_of(16, 8, 0);
        const bool any = trial % 2 == 0;
        if (any)
            parsing.at(static_cast<int>(rng.below(16)), static_cast<int>(rng.below(8))) = 3;
        const ClothingMask m = make_clothing_mask(parsing, vocab, 4, 2);
        double fsum = 0.0;
        for (float v : m.feature.v) fsum += v;
        CHECK((fsum > 0.0) == any);
    }
}

TEST_SUITE_END();
