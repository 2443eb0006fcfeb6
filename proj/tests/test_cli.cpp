#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ifd/checkpoint.hpp"
#include "test_util.hpp"

using namespace ifd;
using namespace ifd::test;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

int run(const std::string& args, const std::string& log) {
    const std::string cmd = std::string(IFD_CLI_PATH) + " " + args + " >" + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// tiny synthetic setup + fast training config shared by the cli cases
std::string fast_overrides() {
    return "--set synth.num_identities=4 --set synth.clothings_per_identity=2 "
           "--set synth.images_per_appearance=4 --set synth.height=32 --set synth.width=16 "
           "--set backbone.widths=8,8,16,16 --set backbone.ikt_kernel=3 "
           "--set sampler.P=2 --set sampler.B=2";
}

} // namespace

TEST_CASE("generate writes manifests and is idempotent") {
    TempDir dir("cli_gen");
    const std::string out = dir.str() + "/data";
    const std::string log = dir.str() + "/log.txt";
    CHECK(run("generate --out " + out + " " + fast_overrides(), log) == 0);
    for (const char* m : {"train.tsv", "query.tsv", "gallery.tsv", "all.tsv"})
        CHECK(fs::exists(fs::path(out) / m));
    CHECK(fs::exists(fs::path(out) / "effective_config.txt"));

    const std::string before = slurp(out + "/train.tsv");
    const std::string img = slurp(out + "/images/000_00_000.ppm");
    CHECK(run("generate --out " + out + " " + fast_overrides(), log) == 0);
    CHECK(slurp(out + "/train.tsv") == before);
    CHECK(slurp(out + "/images/000_00_000.ppm") == img);
}

TEST_CASE("generate honors overrides") {
    TempDir dir("cli_gen8");
    const std::string out = dir.str() + "/data";
    const std::string log = dir.str() + "/log.txt";
    CHECK(run("generate --out " + out + " " + fast_overrides() +
                  " --set synth.num_identities=8",
              log) == 0);
    std::ifstream manifest(out + "/all.tsv");
    std::string line;
    std::set<std::string> ids;
    while (std::getline(manifest, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string f;
        for (int i = 0; i < 3; ++i) std::getline(ls, f, '\t');
        ids.insert(f);
    }
    CHECK(ids.size() == 8);
}

TEST_CASE("missing config file exits 2 and names the path") {
    TempDir dir("cli_noconf");
    const std::string log = dir.str() + "/log.txt";
    CHECK(run("generate --config /nope/missing.conf --out " + dir.str(), log) == 2);
    CHECK(slurp(log).find("/nope/missing.conf") != std::string::npos);
}

TEST_CASE("unknown config keys exit 2") {
    TempDir dir("cli_badkey");
    const std::string log = dir.str() + "/log.txt";
    CHECK(run("generate --out " + dir.str() + " --set nosuch.key=1", log) == 2);
    CHECK(slurp(log).find("unknown key") != std::string::npos);
    CHECK(run("generate --out " + dir.str() + " --set sampler.P=abc", log) == 2);
}

TEST_CASE("train, eval, dump-attention pipeline") {
    TempDir dir("cli_pipe");
    const std::string data = dir.str() + "/data";
    const std::string log = dir.str() + "/log.txt";
    REQUIRE(run("generate --out " + data + " " + fast_overrides(), log) == 0);

    SUBCASE("epochs 0 0 writes an initialization checkpoint only") {
        const std::string out = dir.str() + "/run0";
        CHECK(run("train --data " + data + " --out " + out + " --epochs 0 0 " + fast_overrides(),
                  log) == 0);
        CHECK(fs::exists(out + "/checkpoint.ckpt"));
        CHECK_FALSE(fs::exists(out + "/checkpoint_phase1.ckpt"));
        const CheckpointData ckpt = load_checkpoint(out + "/checkpoint.ckpt");
        CHECK(ckpt.header.at("global_step").get<int>() == 0);
    }

    SUBCASE("baseline checkpoints lack attention parameters") {
        const std::string out = dir.str() + "/base";
        CHECK(run("train --data " + data + " --out " + out +
                      " --variant baseline --epochs 0 1 " + fast_overrides(),
                  log) == 0);
        const CheckpointData ckpt = load_checkpoint(out + "/checkpoint.ckpt");
        CHECK_FALSE(ckpt.has("ikt.conv.weight"));
        CHECK(ckpt.has("main.stage0.conv.weight"));
    }

    SUBCASE("trained run logs the planned number of steps and evaluates") {
        const std::string out = dir.str() + "/run";
        // 16 train samples / (P*B=4) = 4 steps per epoch, 1+2 epochs
        CHECK(run("train --data " + data + " --out " + out + " --epochs 1 2 " + fast_overrides(),
                  log) == 0);
        int rows = 0;
        std::ifstream metrics(out + "/metrics.tsv");
        std::string line;
        while (std::getline(metrics, line))
            if (!line.empty() && line[0] != '#') ++rows;
        CHECK(rows == 12);

        const std::string evout = dir.str() + "/eval";
        CHECK(run("eval --data " + data + " --out " + evout + " --checkpoint " + out +
                      "/checkpoint.ckpt --mode all " + fast_overrides(),
                  log) == 0);
        for (const char* m : {"general", "same-clothing", "clothing-change"})
            CHECK(fs::exists(evout + "/results_" + std::string(m) + ".txt"));
        const std::string text = slurp(log);
        CHECK(text.find("mode = general") != std::string::npos);
        CHECK(text.find("mode = same-clothing") != std::string::npos);
        CHECK(text.find("mode = clothing-change") != std::string::npos);

        const std::string dumpout = dir.str() + "/dump";
        CHECK(run("dump-attention --data " + data + " --out " + dumpout + " --checkpoint " +
                      out + "/checkpoint.ckpt " + fast_overrides(),
                  log) == 0);
        int maps = 0;
        for (const auto& e : fs::directory_iterator(dumpout + "/attention")) {
            ++maps;
            (void)e;
        }
        CHECK(maps == 8);  // query split of 4 ids x 2 odd images
    }
}

TEST_CASE("oracle features reach rank-1 100%") {
    TempDir dir("cli_oracle");
    const std::string data = dir.str() + "/data";
    const std::string log = dir.str() + "/log.txt";
    REQUIRE(run("generate --out " + data + " " + fast_overrides(), log) == 0);
    const std::string out = dir.str() + "/eval";
    CHECK(run("eval --data " + data + " --out " + out + " --oracle --mode cc " +
                  fast_overrides(),
              log) == 0);
    CHECK(slurp(out + "/results_clothing-change.txt").find("rank1 = 100.00") !=
          std::string::npos);
}

TEST_CASE("dump-attention with a zeroed kernel writes mid-gray maps") {
    TempDir dir("cli_gray");
    const std::string data = dir.str() + "/data";
    const std::string log = dir.str() + "/log.txt";
    REQUIRE(run("generate --out " + data + " " + fast_overrides(), log) == 0);
    const std::string out = dir.str() + "/init";
    REQUIRE(run("train --data " + data + " --out " + out + " --epochs 0 0 " + fast_overrides(),
                log) == 0);

    // zero the ikt kernel in the checkpoint
    CheckpointData ckpt = load_checkpoint(out + "/checkpoint.ckpt");
    for (auto& [name, tensor] : ckpt.entries)
        if (name == "ikt.conv.weight" || name == "ikt.conv.bias") tensor.fill(0.0f);
    save_checkpoint(out + "/zeroed.ckpt", ckpt);

    const std::string dumpout = dir.str() + "/dump";
    REQUIRE(run("dump-attention --data " + data + " --out " + dumpout + " --checkpoint " + out +
                    "/zeroed.ckpt " + fast_overrides(),
                log) == 0);
    const std::string pgm = slurp(dumpout + "/attention/000_01_001_wi.pgm");
    REQUIRE_FALSE(pgm.empty());
    // every raster byte is 128 (0.5 quantized)
    const std::size_t raster = pgm.find("255\n") + 4;
    for (std::size_t i = raster; i < pgm.size(); ++i)
        CHECK(static_cast<unsigned char>(pgm[i]) == 128);
}

TEST_CASE("ablate emits the five-row table sharing seed and config hash") {
    TempDir dir("cli_ablate");
    const std::string data = dir.str() + "/data";
    const std::string log = dir.str() + "/log.txt";
    REQUIRE(run("generate --out " + data + " " + fast_overrides(), log) == 0);
    const std::string out = dir.str() + "/ablate";
    CHECK(run("ablate --data " + data + " --out " + out + " --epochs 1 1 " + fast_overrides(),
              log) == 0);

    std::ifstream table(out + "/ablation.tsv");
    std::string line;
    std::vector<std::string> variants;
    std::set<std::string> seeds, hashes;
    while (std::getline(table, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string variant, r1, map, seed, hash;
        std::getline(ls, variant, '\t');
        std::getline(ls, r1, '\t');
        std::getline(ls, map, '\t');
        std::getline(ls, seed, '\t');
        std::getline(ls, hash, '\t');
        variants.push_back(variant);
        seeds.insert(seed);
        hashes.insert(hash);
    }
    CHECK(variants == std::vector<std::string>{"baseline", "ikt", "cbd", "ifd-cl", "ifd"});
    CHECK(seeds.size() == 1);
    CHECK(hashes.size() == 1);
}

TEST_SUITE_END();
