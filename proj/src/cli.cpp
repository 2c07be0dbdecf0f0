#include "voxalign/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "voxalign/checkpoint.hpp"
#include "voxalign/common.hpp"
#include "voxalign/embeddings.hpp"
#include "voxalign/model.hpp"
#include "voxalign/shapes.hpp"
#include "voxalign/trainer.hpp"

namespace voxalign {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for write: " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Dataset {
    DatasetManifest manifest;
    Vocabulary vocab;
    std::vector<TrainingExample> train, test;
};

Dataset load_dataset(const RunConfig& config, const fs::path& data_dir) {
    Dataset d;
    d.manifest = load_manifest(data_dir / "manifest.txt");
    d.vocab = load_vocab(data_dir / "vocab.txt");
    if (d.vocab.size() > config.model.text.vocab_size) {
        throw ConfigError(
            "dataset vocabulary has " + std::to_string(d.vocab.size()) +
            " ids but text.vocab_size is " +
            std::to_string(config.model.text.vocab_size) +
            "; raise text.vocab_size");
    }
    d.train = load_examples(data_dir, d.manifest, Split::train, d.vocab,
                            config.max_tokens);
    d.test = load_examples(data_dir, d.manifest, Split::test, d.vocab,
                           config.max_tokens);
    const Shape want{1, config.cohort.dims[0], config.cohort.dims[1],
                     config.cohort.dims[2]};
    if (d.train.front().volume.shape() != want) {
        throw ConfigError("dataset volumes are " +
                          shape_str(d.train.front().volume.shape()) +
                          " but the config wants " + shape_str(want) +
                          "; fix data.depth/height/width");
    }
    return d;
}

AlignmentModel restore_model(const RunConfig& config, const fs::path& run_dir) {
    AlignmentModel model(config.model);
    load_checkpoint(model.params(), run_dir / "checkpoint");
    return model;
}

}  // namespace

int cmd_synth(const RunConfig& config, const fs::path& out_dir,
              std::ostream& out) {
    fs::create_directories(out_dir);
    const std::vector<LabeledSample> samples = synthesize_cohort(config.cohort);

    DatasetManifest manifest;
    manifest.seed = config.seed;
    manifest.class_counts = config.cohort.counts;
    std::vector<std::string> corpus;
    for (const LabeledSample& s : samples) {
        const std::string stem = s.volume.subject_id;
        store_volume(s.volume, out_dir / (stem + ".vol"));
        const std::string text = render_report(s.record);
        write_text(out_dir / (stem + ".txt"), text);
        corpus.push_back(text);
        manifest.entries.push_back({stem + ".vol", s.volume.label,
                                    Split::train});
    }
    const Vocabulary vocab =
        build_vocab(corpus, config.model.text.vocab_size - 2);
    store_vocab(vocab, out_dir / "vocab.txt");

    const DatasetManifest split =
        split_dataset(manifest, config.train_fraction, config.seed);
    store_manifest(split, out_dir / "manifest.txt");
    write_text(out_dir / "config-resolved.txt", render_run_config(config));

    std::array<std::size_t, kNumClasses> train_counts{}, test_counts{};
    for (const ManifestEntry& e : split.entries) {
        auto& bucket = e.split == Split::train ? train_counts : test_counts;
        bucket[static_cast<std::size_t>(e.label)]++;
    }
    std::size_t train_total = 0, test_total = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        out << label_name(static_cast<Label>(c)) << ": "
            << config.cohort.counts[c] << " samples (" << train_counts[c]
            << " train, " << test_counts[c] << " test)\n";
        train_total += train_counts[c];
        test_total += test_counts[c];
    }
    out << "total: " << samples.size() << " samples (" << train_total
        << " train, " << test_total << " test)\n"
        << "vocabulary: " << vocab.size() << " ids\n"
        << "dataset written to " << out_dir.string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& config, const fs::path& data_dir,
              const fs::path& out_dir, std::ostream& out) {
    const Dataset data = load_dataset(config, data_dir);
    AlignmentModel model(config.model);

    out << "mode " << freeze_mode_name(config.mode) << ": "
        << model.params().trainable_elements() << " of "
        << model.params().total_elements() << " parameters train ("
        << data.train.size() << " train / " << data.test.size()
        << " test samples)\n";

    fs::create_directories(out_dir);
    std::string separation_lines;
    const TrainHistory history = train_model(
        model, data.train, config.train, [&](std::size_t epoch) {
            const EmbeddingTable table = export_embeddings(model, data.test);
            store_embeddings_csv(
                table,
                out_dir / ("embeddings-epoch" + std::to_string(epoch) + ".csv"));
            separation_lines += "epoch " + std::to_string(epoch) +
                                " separation " + fmt17(table.separation) + "\n";
            out << "epoch " << epoch << "/" << config.train.epochs
                << ": separation " << fmt17(table.separation) << "\n";
        });

    store_history(history, out_dir / "history.csv");
    write_text(out_dir / "separation.txt", separation_lines);
    store_checkpoint(model.params(), out_dir / "checkpoint");
    write_text(out_dir / "config-resolved.txt", render_run_config(config));

    const EvalResult result = evaluate(model, data.test);
    write_text(out_dir / "metrics.txt", format_metrics(result.metrics));

    out << "final train joint loss " << fmt17(history.epochs.back().joint)
        << ", train accuracy " << fmt17(history.epochs.back().accuracy)
        << "\n";
    out << "test split:\n" << format_metrics(result.metrics);
    out << "run written to " << out_dir.string() << "\n";
    return 0;
}

int cmd_eval(const RunConfig& config, const fs::path& data_dir,
             const fs::path& run_dir, std::ostream& out) {
    const Dataset data = load_dataset(config, data_dir);
    const AlignmentModel model = restore_model(config, run_dir);
    const EvalResult result = evaluate(model, data.test);
    const std::string text = format_metrics(result.metrics);
    write_text(run_dir / "metrics-eval.txt", text);
    out << text;
    return 0;
}

int cmd_export_embeddings(const RunConfig& config, const fs::path& data_dir,
                          const fs::path& run_dir, std::ostream& out) {
    const Dataset data = load_dataset(config, data_dir);
    const AlignmentModel model = restore_model(config, run_dir);
    const EmbeddingTable table = export_embeddings(model, data.test);
    const fs::path csv = run_dir / "embeddings-eval.csv";
    store_embeddings_csv(table, csv);
    out << "separation " << fmt17(table.separation) << "\n"
        << "embeddings written to " << csv.string() << "\n";
    return 0;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
    run_verify_suite(out, options);
    out << "all checks passed\n";
    return 0;
}

int cmd_shapes(const RunConfig& config, std::ostream& out) {
    out << "configured\n"
        << render_shape_trace(config.model.adapter, config.model.patch)
        << "\n"
        << render_reference_shape_trace();
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"desk-scale volumetric-and-text alignment pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand name

    std::string config_path, out_dir, mode_name;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool inject_fault = false;
    std::string data_dir, run_dir;

    app.add_option("--config", config_path, "key=value configuration file");
    auto* seed_opt =
        app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker cap (1 = fully serial)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{64}));
    app.add_option("--mode", mode_name, "freeze mode: fpm or tlp");

    CLI::App* synth = app.add_subcommand("synth", "generate a labeled cohort");
    CLI::App* train = app.add_subcommand("train", "fit the adapter pipeline");
    train->add_option("data", data_dir, "dataset directory from synth")
        ->required();
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "score a finished run on the test split");
    eval_cmd->add_option("data", data_dir, "dataset directory")->required();
    eval_cmd->add_option("run", run_dir, "run directory from train")
        ->required();
    CLI::App* exp = app.add_subcommand("export-embeddings",
                                       "write fused embeddings + 2D map");
    exp->add_option("data", data_dir, "dataset directory")->required();
    exp->add_option("run", run_dir, "run directory from train")->required();
    CLI::App* verify =
        app.add_subcommand("verify", "run the numerical self-audit");
    verify->add_flag("--inject-grad-fault", inject_fault,
                     "corrupt a backward rule; the audit must fail");
    app.add_subcommand("shapes", "print the tensor-shape walkthrough");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            return app.exit(e);
        }
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) {
            config = load_run_config(config_path);
        } else if (!run_dir.empty() &&
                   fs::exists(fs::path(run_dir) / "config-resolved.txt")) {
            // eval/export default to the configuration the run was made with
            config = load_run_config(fs::path(run_dir) / "config-resolved.txt");
        }
        if (seed_opt->count() > 0) config.seed = seed;
        if (!mode_name.empty()) config.mode = freeze_mode_from_name(mode_name);
        resolve_run_config(config);

        if (synth->parsed()) {
            if (out_dir.empty()) throw ConfigError("synth needs --out DIR");
            return cmd_synth(config, out_dir, std::cout);
        }
        if (train->parsed()) {
            if (out_dir.empty()) throw ConfigError("train needs --out DIR");
            return cmd_train(config, data_dir, out_dir, std::cout);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(config, data_dir, run_dir, std::cout);
        }
        if (exp->parsed()) {
            return cmd_export_embeddings(config, data_dir, run_dir, std::cout);
        }
        if (verify->parsed()) {
            return cmd_verify(VerifyOptions{inject_fault}, std::cout);
        }
        return cmd_shapes(config, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const VerifyError& e) {
        std::cerr << "verification failed: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace voxalign
