#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ifd/config.hpp"
#include "ifd/evaluation.hpp"
#include "ifd/image_io.hpp"
#include "ifd/masking.hpp"
#include "ifd/synthdata.hpp"
#include "ifd/training.hpp"

namespace fs = std::filesystem;
using namespace ifd;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "out";
    std::string data_root;
    int seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "configuration file (key = value lines)");
    cmd->add_option("--set", args.overrides, "override a config key (key=value, repeatable)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--data", args.data_root, "dataset root (shorthand for --set data.root=...)");
    cmd->add_option("--seed", args.seed, "seed shorthand: sets synth.seed, train.seed, sampler.seed");
}

Config build_config(const CommonArgs& args) {
    Config cfg;
    if (!args.config_path.empty()) {
        if (!fs::exists(args.config_path))
            throw std::invalid_argument("config error: config file not found: " + args.config_path);
        cfg.load_file(args.config_path);
    }
    for (const std::string& kv : args.overrides) cfg.apply_override(kv);
    if (!args.data_root.empty()) cfg.set("data.root", args.data_root);
    if (args.seed >= 0) {
        cfg.set("synth.seed", std::to_string(args.seed));
        cfg.set("train.seed", std::to_string(args.seed));
        cfg.set("sampler.seed", std::to_string(args.seed + 1));
    }
    return cfg;
}

void echo_config(const Config& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "effective_config.txt");
    out << cfg.echo();
}

RegionVocabulary vocab_of(const Config& cfg) {
    const std::string path = cfg.get_string("data.vocab");
    return path.empty() ? RegionVocabulary::default_vocabulary() : RegionVocabulary::load(path);
}

std::string manifest_path(const Config& cfg, const std::string& key) {
    const fs::path p = cfg.get_string(key);
    if (p.is_absolute()) return p.string();
    return (fs::path(cfg.get_string("data.root")) / p).string();
}

int run_generate(const CommonArgs& args) {
    Config cfg = build_config(args);
    echo_config(cfg, args.out_dir);
    const SynthSplit split = generate_split(cfg.synth_config(), args.out_dir);
    std::cout << "wrote " << split.train_manifest << "\n"
              << "wrote " << split.query_manifest << "\n"
              << "wrote " << split.gallery_manifest << "\n";
    return 0;
}

struct TrainedRun {
    TrainState state;
    std::string checkpoint_path;
};

TrainedRun train_one(Config& cfg, const std::string& variant, const std::string& out_dir,
                     const std::string& resume_path) {
    fs::create_directories(out_dir);
    const RegionVocabulary vocab = vocab_of(cfg);
    const DatasetIndex train_set = load_dataset(cfg.get_string("data.root"),
                                                manifest_path(cfg, "data.train_manifest"));
    TrainConfig tc = TrainConfig::from(cfg);
    const PreparedData data = prepare_training_data(train_set, vocab, tc.backbone.output_stride);

    TrainState state;
    if (!resume_path.empty())
        state = load_train_state(resume_path);
    else
        state = init_train_state(tc, parse_variant(variant), data.num_identities);

    std::ofstream log(fs::path(out_dir) / "metrics.tsv", std::ios::app);
    const std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%d %H:%M:%S", std::gmtime(&now));
    log << "# run " << stamp << " variant=" << variant_name(state.model->config().variant)
        << " config=" << cfg.hash() << "\n";
    log << "# step\tepoch\tid_main\tid_attn\tccl\ttotal\tlr\n";

    train_phase1(state, tc, data, &log);
    if (state.model->attention_stream() && tc.phase1_epochs > 0)
        save_train_state((fs::path(out_dir) / "checkpoint_phase1.ckpt").string(), state);
    train_phase2(state, tc, data, &log);

    TrainedRun run;
    run.checkpoint_path = (fs::path(out_dir) / "checkpoint.ckpt").string();
    save_train_state(run.checkpoint_path, state);
    run.state = std::move(state);
    return run;
}

std::vector<EvalRecord> oracle_records(const DatasetIndex& set, int dim) {
    std::vector<EvalRecord> records;
    for (const Sample& s : set.samples) {
        EvalRecord r;
        r.feature.assign(static_cast<std::size_t>(dim), 0.0f);
        r.feature[static_cast<std::size_t>(s.identity)] = 1.0f;
        r.identity = s.identity;
        r.clothing = s.clothing;
        r.camera = s.camera;
        records.push_back(std::move(r));
    }
    return records;
}

std::map<EvalMode, EvalResult> evaluate_checkpoint(Config& cfg, const std::string& checkpoint,
                                                   bool oracle, const std::string& mode,
                                                   const std::string& out_dir) {
    const RegionVocabulary vocab = vocab_of(cfg);
    const DatasetIndex query_set =
        load_dataset(cfg.get_string("data.root"), manifest_path(cfg, "data.query_manifest"));
    const DatasetIndex gallery_set =
        load_dataset(cfg.get_string("data.root"), manifest_path(cfg, "data.gallery_manifest"));

    std::vector<EvalRecord> query, gallery;
    if (oracle) {
        int dim = 0;
        for (const Sample& s : query_set.samples) dim = std::max(dim, s.identity + 1);
        for (const Sample& s : gallery_set.samples) dim = std::max(dim, s.identity + 1);
        query = oracle_records(query_set, dim);
        gallery = oracle_records(gallery_set, dim);
    } else {
        if (checkpoint.empty())
            throw std::invalid_argument("config error: eval needs --checkpoint or --oracle");
        TrainState state = load_train_state(checkpoint);
        query = extract_features(*state.model, query_set, vocab);
        gallery = extract_features(*state.model, gallery_set, vocab);
    }
    const Tensor dist = distance_matrix(query, gallery);

    std::vector<EvalMode> modes;
    if (mode == "all")
        modes = {EvalMode::General, EvalMode::SameClothing, EvalMode::ClothingChange};
    else
        modes = {parse_eval_mode(mode)};

    std::map<EvalMode, EvalResult> results;
    fs::create_directories(out_dir);
    for (EvalMode m : modes) {
        EvalProtocol protocol;
        protocol.mode = m;
        const EvalResult r = cmc_map(dist, query, gallery, protocol);
        results[m] = r;
        const std::string block = format_results(m, r);
        std::cout << block << "\n";
        std::ofstream out(fs::path(out_dir) / ("results_" + std::string(eval_mode_name(m)) + ".txt"));
        out << block;
    }
    return results;
}

int run_ablate(Config cfg, const CommonArgs& args, int epochs1, int epochs2) {
    if (epochs1 >= 0) cfg.set("train.phase1_epochs", std::to_string(epochs1));
    if (epochs2 >= 0) cfg.set("train.phase2_epochs", std::to_string(epochs2));
    echo_config(cfg, args.out_dir);

    const char* variants[] = {"baseline", "ikt", "cbd", "ifd-cl", "ifd"};
    std::ostringstream table;
    table << "# variant\tcc_rank1\tcc_mAP\tseed\tconfig\n";
    for (const char* v : variants) {
        const std::string vdir = (fs::path(args.out_dir) / v).string();
        std::cout << "=== training variant " << v << " ===\n";
        TrainedRun run = train_one(cfg, v, vdir, "");
        auto results = evaluate_checkpoint(cfg, run.checkpoint_path, false, "cc", vdir);
        const EvalResult& r = results.at(EvalMode::ClothingChange);
        table << v << "\t" << 100.0 * r.rank(1) << "\t" << 100.0 * r.map << "\t"
              << cfg.get_int("train.seed") << "\t" << cfg.hash() << "\n";
    }
    std::ofstream out(fs::path(args.out_dir) / "ablation.tsv");
    out << table.str();
    std::cout << table.str();
    return 0;
}

int run_dump_attention(Config& cfg, const CommonArgs& args, const std::string& checkpoint,
                       const std::string& which_manifest) {
    echo_config(cfg, args.out_dir);
    const RegionVocabulary vocab = vocab_of(cfg);
    const std::string key = "data." + which_manifest + "_manifest";
    const DatasetIndex set = load_dataset(cfg.get_string("data.root"), manifest_path(cfg, key));
    TrainState state = load_train_state(checkpoint);
    if (!state.model->attention_stream())
        throw std::runtime_error("dump-attention: checkpoint variant '" +
                                 std::string(variant_name(state.model->config().variant)) +
                                 "' has no attention stream");

    const fs::path dir = fs::path(args.out_dir) / "attention";
    fs::create_directories(dir);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Sample& s = set.samples[i];
        Tensor masked = clothing_masked_image(s, vocab).image;
        Tensor batch({1, 3, s.height(), s.width()});
        batch.v = masked.v;
        Tensor wi = state.model->attention_maps(batch);
        Tensor map({wi.dim(2), wi.dim(3)});
        map.v = wi.v;
        const Tensor up = upsample_nearest(map, s.height(), s.width());
        const fs::path name = fs::path(s.image_path).stem();
        write_pgm_gray((dir / (name.string() + "_wi.pgm")).string(), up);
    }
    std::cout << "wrote " << set.size() << " attention maps to " << dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ifd: dual-stream clothing-change re-identification workbench"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, ablate_args, dump_args;

    auto* cmd_gen = app.add_subcommand("generate", "render the synthetic dataset and splits");
    add_common(cmd_gen, gen_args);

    auto* cmd_train = app.add_subcommand("train", "two-phase training");
    add_common(cmd_train, train_args);
    std::string train_variant = "ifd", resume_path;
    std::vector<int> train_epochs;
    cmd_train->add_option("--variant", train_variant, "baseline|ikt|cbd|ifd-cl|ifd");
    cmd_train->add_option("--resume", resume_path, "resume from a checkpoint");
    cmd_train->add_option("--epochs", train_epochs, "phase1 and phase2 epoch counts")
        ->expected(2);

    auto* cmd_eval = app.add_subcommand("eval", "CMC/mAP evaluation");
    add_common(cmd_eval, eval_args);
    std::string eval_mode = "all", eval_checkpoint;
    bool oracle = false;
    cmd_eval->add_option("--mode", eval_mode, "general|sc|cc|all");
    cmd_eval->add_option("--checkpoint", eval_checkpoint, "trained checkpoint to evaluate");
    cmd_eval->add_flag("--oracle", oracle, "use one-hot identity features (sanity path)");

    auto* cmd_ablate = app.add_subcommand("ablate", "train and evaluate all five variants");
    add_common(cmd_ablate, ablate_args);
    std::vector<int> ablate_epochs;
    cmd_ablate->add_option("--epochs", ablate_epochs, "phase1 and phase2 epoch counts")
        ->expected(2);

    auto* cmd_dump = app.add_subcommand("dump-attention", "write attention maps as images");
    add_common(cmd_dump, dump_args);
    std::string dump_checkpoint, dump_manifest = "query";
    cmd_dump->add_option("--checkpoint", dump_checkpoint, "trained checkpoint")->required();
    cmd_dump->add_option("--manifest", dump_manifest, "train|query|gallery manifest to render");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (cmd_gen->parsed()) return run_generate(gen_args);
        if (cmd_train->parsed()) {
            Config cfg = build_config(train_args);
            if (!train_epochs.empty()) {
                cfg.set("train.phase1_epochs", std::to_string(train_epochs[0]));
                cfg.set("train.phase2_epochs", std::to_string(train_epochs[1]));
            }
            echo_config(cfg, train_args.out_dir);
            train_one(cfg, train_variant, train_args.out_dir, resume_path);
            return 0;
        }
        if (cmd_eval->parsed()) {
            Config cfg = build_config(eval_args);
            echo_config(cfg, eval_args.out_dir);
            evaluate_checkpoint(cfg, eval_checkpoint, oracle, eval_mode, eval_args.out_dir);
            return 0;
        }
        if (cmd_ablate->parsed()) {
            Config cfg = build_config(ablate_args);
            const int e1 = ablate_epochs.empty() ? -1 : ablate_epochs[0];
            const int e2 = ablate_epochs.empty() ? -1 : ablate_epochs[1];
            return run_ablate(cfg, ablate_args, e1, e2);
        }
        if (cmd_dump->parsed()) {
            Config cfg = build_config(dump_args);
            return run_dump_attention(cfg, dump_args, dump_checkpoint, dump_manifest);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string what = e.what();
        return what.rfind("config error", 0) == 0 ? 2 : 1;
    }
    return 0;
}
