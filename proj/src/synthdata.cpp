#include "ifd/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ifd/image_io.hpp"
#include "ifd/rng.hpp"

namespace fs = std::filesystem;

namespace ifd {

void SynthConfig::validate() const {
    if (num_identities < 1 || clothings_per_identity < 1 || images_per_appearance < 1)
        throw std::invalid_argument("synth: counts must be >= 1");
    if (height < 16 || width < 8)
        throw std::invalid_argument("synth: image size must be at least 16x8");
    if (sigma < 0.0f || sigma > 1.0f) throw std::invalid_argument("synth: sigma must be in [0,1]");
    if (rho < 0.0f || rho > 1.0f) throw std::invalid_argument("synth: rho must be in [0,1]");
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    return z ^ (z >> 27);
}

struct Rgb {
    float r, g, b;
};

Rgb hsv(float h, float s, float v) {
    h = h - std::floor(h);
    const float c = v * s;
    const float hp = h * 6.0f;
    const float x = c * (1.0f - std::fabs(std::fmod(hp, 2.0f) - 1.0f));
    float r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const float m = v - c;
    return {r + m, g + m, b + m};
}

// Golden-ratio hue walk: visually distinct, deterministic per index.
Rgb unique_color(int index, float hue_shift) {
    const float hue = static_cast<float>(std::fmod(0.618033988749895 * (index + 1) + hue_shift, 1.0));
    return hsv(hue, 0.85f, 0.75f);
}

const Rgb kPalette[4] = {hsv(0.0f, 0.8f, 0.7f), hsv(0.33f, 0.8f, 0.7f),
                         hsv(0.58f, 0.8f, 0.7f), hsv(0.83f, 0.8f, 0.7f)};

struct Figure {
    // All boxes in unjittered canvas coordinates [row0,row1) x [col0,col1).
    int hair_r0, hair_r1, face_r0, face_r1, head_c0, head_c1;
    int body_r0, body_r1, body_c0, body_c1;
    int pants_r0, pants_r1, pants_c0, pants_c1;
    int legs_r1, shoes_r1;
    int arm_w;
    int hair_extra;  // identity-scaled contour thickness
};

Figure layout(int h, int w, int hair_extra) {
    Figure f;
    f.hair_r0 = h * 4 / 100;
    f.hair_r1 = h * 11 / 100;
    f.face_r0 = f.hair_r1;
    f.face_r1 = h * 28 / 100;
    f.head_c0 = w * 30 / 100;
    f.head_c1 = w * 70 / 100;
    f.body_r0 = f.face_r1;
    f.body_r1 = h * 60 / 100;
    f.body_c0 = w * 22 / 100;
    f.body_c1 = w * 78 / 100;
    f.pants_r0 = f.body_r1;
    f.pants_r1 = h * 86 / 100;
    f.pants_c0 = w * 28 / 100;
    f.pants_c1 = w * 72 / 100;
    f.legs_r1 = h * 93 / 100;
    f.shoes_r1 = h * 99 / 100;
    f.arm_w = std::max(1, w * 6 / 100);
    f.hair_extra = hair_extra;
    return f;
}

struct RenderedSample {
    Tensor image;      // {3,H,W}
    GrayImage parsing; // codes from the default vocabulary
};

// Region codes of the default vocabulary.
enum Code : std::uint8_t {
    BG = 0, HAIR = 1, FACE = 2, UPPER = 3, PANTS = 4, ARMS = 6, LEGS = 7, SHOES = 8
};

RenderedSample render(const SynthConfig& cfg, int identity, int clothing, int image_index) {
    // Identity-determined attributes.
    Rng id_rng(mix(cfg.seed, mix(0x1D, identity)));
    bool glyph[5][5];
    for (auto& row : glyph)
        for (bool& cell : row) cell = id_rng.uniform() < 0.5;
    glyph[2][2] = true;  // never an empty glyph
    const int hair_extra = static_cast<int>(id_rng.below(4));  // contour width cue
    const Rgb hair_color = hsv(0.08f + 0.06f * static_cast<float>(id_rng.uniform()), 0.6f,
                               0.10f + 0.10f * static_cast<float>(id_rng.uniform()));

    // Appearance-determined clothing colors.
    const int app_index = identity * cfg.clothings_per_identity + clothing;
    Rng app_rng(mix(cfg.seed, mix(0xA9, app_index)));
    Rgb upper, pants;
    if (app_rng.uniform() < cfg.rho) {
        upper = unique_color(app_index, 0.0f);
        pants = unique_color(app_index, 0.37f);
    } else {
        upper = kPalette[app_rng.below(4)];
        pants = kPalette[app_rng.below(4)];
    }

    // Per-image horizontal jitter and noise. The jitter window is kept small
    // so raw-pixel matching stays feasible through the mask (the identity
    // signal must survive alignment error).
    Rng img_rng(mix(cfg.seed, mix(mix(0x57, app_index), image_index)));
    const int dx = static_cast<int>(img_rng.below(3)) - 1;
    const int dy = 0;

    const int h = cfg.height, w = cfg.width;
    RenderedSample out;
    out.image = Tensor({3, h, w});
    out.parsing.height = h;
    out.parsing.width = w;
    out.parsing.pixels.assign(static_cast<std::size_t>(h) * w, BG);

    const Rgb skin{0.85f, 0.72f, 0.60f};
    const Rgb shoe{0.12f, 0.10f, 0.10f};
    const Figure f = layout(h, w, hair_extra);

    auto put = [&](int y, int x, Code code, const Rgb& color) {
        const int yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) return;
        out.parsing.at(yy, xx) = code;
        out.image(0, yy, xx) = color.r;
        out.image(1, yy, xx) = color.g;
        out.image(2, yy, xx) = color.b;
    };

    // Background first: mid gray plus noise.
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                float v = 0.5f + cfg.sigma * img_rng.uniform(-1.0f, 1.0f);
                out.image(c, y, x) = std::clamp(v, 0.0f, 1.0f);
            }
        }

    // Hair cap; thickness carries the identity contour cue.
    for (int y = f.hair_r0 - f.hair_extra; y < f.hair_r1; ++y)
        for (int x = f.head_c0 - f.hair_extra; x < f.head_c1 + f.hair_extra; ++x)
            put(y, x, HAIR, hair_color);
    // Face box with the identity glyph.
    const int fh = f.face_r1 - f.face_r0, fw = f.head_c1 - f.head_c0;
    for (int y = f.face_r0; y < f.face_r1; ++y)
        for (int x = f.head_c0; x < f.head_c1; ++x) {
            const int gy = std::min(4, (y - f.face_r0) * 5 / fh);
            const int gx = std::min(4, (x - f.head_c0) * 5 / fw);
            put(y, x, FACE, glyph[gy][gx] ? Rgb{0.08f, 0.08f, 0.08f} : skin);
        }
    // Torso and arms.
    for (int y = f.body_r0; y < f.body_r1; ++y) {
        for (int x = f.body_c0 - f.arm_w; x < f.body_c0; ++x) put(y, x, ARMS, skin);
        for (int x = f.body_c0; x < f.body_c1; ++x) put(y, x, UPPER, upper);
        for (int x = f.body_c1; x < f.body_c1 + f.arm_w; ++x) put(y, x, ARMS, skin);
    }
    // Pants, legs, shoes.
    for (int y = f.pants_r0; y < f.pants_r1; ++y)
        for (int x = f.pants_c0; x < f.pants_c1; ++x) put(y, x, PANTS, pants);
    for (int y = f.pants_r1; y < f.legs_r1; ++y)
        for (int x = f.pants_c0; x < f.pants_c1; ++x) put(y, x, LEGS, skin);
    for (int y = f.legs_r1; y < f.shoes_r1; ++y)
        for (int x = f.pants_c0; x < f.pants_c1; ++x) put(y, x, SHOES, shoe);

    return out;
}

int camera_of(int clothing, int image_index) { return clothing * 2 + image_index % 2; }

struct Emitted {
    std::string image_path, parsing_path;
    int identity, clothing, camera, image_index;
};

std::vector<Emitted> render_all(const SynthConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "parsing");
    std::vector<Emitted> all;
    char name[64];
    for (int id = 0; id < cfg.num_identities; ++id)
        for (int cl = 0; cl < cfg.clothings_per_identity; ++cl)
            for (int im = 0; im < cfg.images_per_appearance; ++im) {
                RenderedSample s = render(cfg, id, cl, im);
                std::snprintf(name, sizeof(name), "%03d_%02d_%03d", id, cl, im);
                Emitted e;
                e.image_path = std::string("images/") + name + ".ppm";
                e.parsing_path = std::string("parsing/") + name + ".pgm";
                e.identity = id;
                e.clothing = cl;
                e.camera = camera_of(cl, im);
                e.image_index = im;
                write_ppm((fs::path(out_dir) / e.image_path).string(), s.image);
                write_pgm((fs::path(out_dir) / e.parsing_path).string(), s.parsing);
                all.push_back(std::move(e));
            }
    return all;
}

void write_rows(const std::string& path, const std::vector<Emitted>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write error: cannot open " + path);
    out << "# image\tparsing\tidentity\tclothing\tcamera\n";
    for (const auto& e : rows)
        out << e.image_path << "\t" << e.parsing_path << "\t" << e.identity << "\t" << e.clothing
            << "\t" << e.camera << "\n";
}

} // namespace

std::string generate(const SynthConfig& config, const std::string& out_dir) {
    const auto all = render_all(config, out_dir);
    const std::string manifest = (fs::path(out_dir) / "all.tsv").string();
    write_rows(manifest, all);
    return manifest;
}

SynthSplit generate_split(const SynthConfig& config, const std::string& out_dir) {
    if (config.clothings_per_identity < 2)
        throw std::invalid_argument(
            "synth: generate_split needs at least 2 clothings per identity, got " +
            std::to_string(config.clothings_per_identity));
    const auto all = render_all(config, out_dir);

    const int held_out = config.clothings_per_identity - 1;
    std::vector<Emitted> train, query, gallery;
    std::vector<char> gallery_anchor(static_cast<std::size_t>(config.num_identities), 0);
    for (const auto& e : all) {
        if (e.clothing != held_out) {
            train.push_back(e);
            // one training-clothing image per identity anchors the gallery
            if (e.clothing == 0 && !gallery_anchor[static_cast<std::size_t>(e.identity)]) {
                gallery.push_back(e);
                gallery_anchor[static_cast<std::size_t>(e.identity)] = 1;
            }
        } else {
            // held-out clothing: odd image indices query, even ones gallery;
            // the two sides land on different cameras
            if (e.image_index % 2 == 1)
                query.push_back(e);
            else
                gallery.push_back(e);
        }
    }
    if (query.empty())
        throw std::invalid_argument("synth: images_per_appearance must be >= 2 to form a query set");

    write_rows((fs::path(out_dir) / "all.tsv").string(), all);
    SynthSplit split;
    split.train_manifest = (fs::path(out_dir) / "train.tsv").string();
    split.query_manifest = (fs::path(out_dir) / "query.tsv").string();
    split.gallery_manifest = (fs::path(out_dir) / "gallery.tsv").string();
    write_rows(split.train_manifest, train);
    write_rows(split.query_manifest, query);
    write_rows(split.gallery_manifest, gallery);
    return split;
}

} // namespace ifd
