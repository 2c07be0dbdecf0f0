#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include <gtest/gtest.h>

#include "voxalign/checkpoint.hpp"
#include "voxalign/cohort.hpp"
#include "voxalign/common.hpp"
#include "voxalign/config.hpp"
#include "voxalign/embeddings.hpp"
#include "voxalign/metrics.hpp"
#include "voxalign/model.hpp"
#include "voxalign/optimizer.hpp"
#include "voxalign/report.hpp"
#include "voxalign/rng.hpp"
#include "voxalign/shapes.hpp"
#include "voxalign/trainer.hpp"

using namespace voxalign;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        dir_ = fs::temp_directory_path() /
               ("voxalign-train-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter_++));
        fs::create_directories(dir_);
    }
    ~TempDir() { fs::remove_all(dir_); }
    const fs::path& path() const { return dir_; }

private:
    static inline int counter_ = 0;
    fs::path dir_;
};

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.adapter.input_dims = {4, 8, 8};
    cfg.adapter.depth_reduction = 2;
    cfg.adapter.stage_channels = {1};
    cfg.patch.patch_dims = {2, 4, 4};
    cfg.vision.token_dim = 6;
    cfg.vision.n_frozen_blocks = 1;
    cfg.vision.proj_dim = 4;
    cfg.text.vocab_size = 16;
    cfg.text.token_dim = 6;
    cfg.text.n_frozen_blocks = 1;
    cfg.text.proj_dim = 4;
    cfg.head_hidden = 5;
    cfg.seed = 42;
    return cfg;
}

Tensor random_volume(const std::array<std::size_t, 3>& dims, Rng& rng) {
    const std::size_t n = dims[0] * dims[1] * dims[2];
    std::vector<double> data(n);
    for (double& v : data) v = rng.uniform(0.0, 1.0);
    return Tensor::from_data({1, dims[0], dims[1], dims[2]}, std::move(data));
}

std::vector<TrainingExample> toy_examples(const ModelConfig& cfg,
                                          std::size_t n) {
    Rng rng(7, "train-test/data");
    std::vector<TrainingExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        TrainingExample ex;
        ex.id = "ex-" + std::to_string(i);
        ex.label = kAllLabels[i % kNumClasses];
        ex.volume = random_volume(cfg.adapter.input_dims, rng);
        ex.tokens = {2 + i % 3, 5 + i % 5, 3 + i % 7, 2, 0, 0};
        out.push_back(std::move(ex));
    }
    return out;
}

Tensor scalar_param(double v) { return Tensor::scalar(v, true); }

}  // namespace

TEST(AdamW, HandSteppedFirstUpdate) {
    ParameterStore store;
    Tensor p = store.add("adapter.p", scalar_param(0.0), true);
    p.grad()[0] = 1.0;
    AdamWConfig cfg;
    cfg.lr_adapter = 0.1;
    cfg.weight_decay = 0.0;
    AdamW opt(store, cfg);
    opt.step();
    // mhat = vhat = 1 on step 1, so the update is -0.1 / (1 + 1e-8).
    EXPECT_NEAR(p.data()[0], -0.1, 1e-6);
    EXPECT_EQ(opt.step_count(), 1u);
}

TEST(AdamW, PureDecayShrinkageIsExact) {
    ParameterStore store;
    Tensor p = store.add("adapter.p", scalar_param(0.75), true);
    p.grad()[0] = 0.0;
    AdamWConfig cfg;
    cfg.lr_adapter = 0.1;
    cfg.weight_decay = 0.05;
    AdamW opt(store, cfg);
    const double decay = 1.0 - 0.1 * 0.05;
    opt.step();
    EXPECT_EQ(p.data()[0], 0.75 * decay);
    p.grad()[0] = 0.0;
    opt.step();
    EXPECT_EQ(p.data()[0], (0.75 * decay) * decay);
}

TEST(AdamW, PerGroupLearningRates) {
    ParameterStore store;
    Tensor a = store.add("adapter.k", scalar_param(0.0), true);
    Tensor q = store.add("vision.patch.proj", scalar_param(0.0), true);
    a.grad()[0] = 1.0;
    q.grad()[0] = 1.0;
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(store, cfg);
    EXPECT_EQ(opt.lr_for("adapter.res.conv1.kernel"), cfg.lr_adapter);
    EXPECT_EQ(opt.lr_for("head.w1"), cfg.lr_projection);
    EXPECT_EQ(opt.lr_for("temperature.raw"), cfg.lr_projection);
    opt.step();
    EXPECT_NEAR(a.data()[0], -1e-3, 1e-9);
    EXPECT_NEAR(q.data()[0], -1e-4, 1e-10);
}

TEST(AdamW, FrozenParameterIgnoresStaleGradient) {
    ParameterStore store;
    Tensor p = store.add("vision.block0.mix", scalar_param(2.0), true);
    p.grad()[0] = 5.0;  // stale buffer from before the freeze
    store.at("vision.block0.mix").trainable = false;
    AdamW opt(store, AdamWConfig{});
    opt.step();
    EXPECT_EQ(p.data()[0], 2.0);
}

TEST(AdamW, TrainableParameterWithoutGradientThrows) {
    ParameterStore store;
    store.add("adapter.p", scalar_param(1.0), true);
    AdamW opt(store, AdamWConfig{});
    EXPECT_THROW(opt.step(), std::logic_error);
}

TEST(AdamW, NonFiniteGradientRejected) {
    ParameterStore store;
    Tensor p = store.add("adapter.p", scalar_param(1.0), true);
    p.grad()[0] = std::numeric_limits<double>::quiet_NaN();
    AdamW opt(store, AdamWConfig{});
    EXPECT_THROW(opt.step(), NumericError);
}

TEST(AdamW, ConfigValidation) {
    AdamWConfig bad;
    bad.lr_adapter = 0.0;
    EXPECT_THROW(validate_optim_config(bad), ConfigError);
    bad = AdamWConfig{};
    bad.beta2 = 1.0;
    EXPECT_THROW(validate_optim_config(bad), ConfigError);
    bad = AdamWConfig{};
    bad.weight_decay = -0.1;
    EXPECT_THROW(validate_optim_config(bad), ConfigError);
    EXPECT_NO_THROW(validate_optim_config(AdamWConfig{}));
}

TEST(Metrics, HandWorkedExample) {
    const std::vector<Label> truth{Label::AD, Label::AD, Label::CN, Label::CN};
    const std::vector<Label> pred{Label::AD, Label::CN, Label::CN, Label::CN};
    const MetricsReport r = compute_metrics(truth, pred);
    const auto& ad = r.per_class[0];
    const auto& cn = r.per_class[1];
    const auto& mci = r.per_class[2];
    EXPECT_DOUBLE_EQ(ad.precision, 1.0);
    EXPECT_DOUBLE_EQ(ad.sensitivity, 0.5);
    EXPECT_DOUBLE_EQ(ad.f1, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(cn.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(cn.sensitivity, 1.0);
    EXPECT_DOUBLE_EQ(cn.f1, 0.8);
    // MCI is absent from truth and predictions: all zero, still averaged.
    EXPECT_EQ(mci.support, 0u);
    EXPECT_DOUBLE_EQ(mci.f1, 0.0);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
    EXPECT_DOUBLE_EQ(r.macro_f1, (2.0 / 3.0 + 0.8 + 0.0) / 3.0);
    EXPECT_DOUBLE_EQ(r.weighted_f1, (2.0 * (2.0 / 3.0) + 2.0 * 0.8) / 4.0);
    EXPECT_EQ(r.confusion[0][0], 1u);
    EXPECT_EQ(r.confusion[0][1], 1u);
    EXPECT_EQ(r.confusion[1][1], 2u);
}

TEST(Metrics, EqualSupportMakesWeightedEqualMacro) {
    const std::vector<Label> truth{Label::AD, Label::AD, Label::CN,
                                   Label::CN, Label::MCI, Label::MCI};
    const std::vector<Label> pred{Label::AD, Label::MCI, Label::CN,
                                  Label::AD, Label::MCI, Label::CN};
    const MetricsReport r = compute_metrics(truth, pred);
    EXPECT_DOUBLE_EQ(r.macro_precision, r.weighted_precision);
    EXPECT_DOUBLE_EQ(r.macro_sensitivity, r.weighted_sensitivity);
    EXPECT_DOUBLE_EQ(r.macro_f1, r.weighted_f1);
}

TEST(Metrics, AgreesWithBruteForceOnRandomAssignments) {
    std::mt19937 gen(1234);
    std::uniform_int_distribution<int> pick(0, 2);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<Label> truth(50), pred(50);
        for (int i = 0; i < 50; ++i) {
            truth[i] = kAllLabels[pick(gen)];
            pred[i] = kAllLabels[pick(gen)];
        }
        const MetricsReport r = compute_metrics(truth, pred);
        double macro_f1 = 0.0;
        std::size_t correct = 0;
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (int i = 0; i < 50; ++i) {
                const bool t = truth[i] == kAllLabels[c];
                const bool p = pred[i] == kAllLabels[c];
                tp += t && p;
                fp += !t && p;
                fn += t && !p;
            }
            const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
            const double sens = tp + fn ? double(tp) / double(tp + fn) : 0.0;
            const double f1 =
                prec + sens > 0.0 ? 2.0 * prec * sens / (prec + sens) : 0.0;
            ASSERT_DOUBLE_EQ(r.per_class[c].precision, prec);
            ASSERT_DOUBLE_EQ(r.per_class[c].sensitivity, sens);
            ASSERT_DOUBLE_EQ(r.per_class[c].f1, f1);
            macro_f1 += f1;
            correct += tp;
        }
        ASSERT_DOUBLE_EQ(r.macro_f1, macro_f1 / kNumClasses);
        ASSERT_DOUBLE_EQ(r.accuracy, double(correct) / 50.0);
    }
}

TEST(Metrics, RejectsEmptyAndMismatchedInputs) {
    EXPECT_THROW(compute_metrics({}, {}), DataError);
    EXPECT_THROW(compute_metrics({Label::AD}, {Label::AD, Label::CN}),
                 DataError);
}

TEST(Metrics, FormatListsClassesAndAverages) {
    const MetricsReport r = compute_metrics({Label::AD, Label::CN},
                                            {Label::AD, Label::CN});
    const std::string text = format_metrics(r);
    EXPECT_NE(text.find("AD"), std::string::npos);
    EXPECT_NE(text.find("MCI"), std::string::npos);
    EXPECT_NE(text.find("M-Avg"), std::string::npos);
    EXPECT_NE(text.find("W-Avg"), std::string::npos);
    EXPECT_NE(text.find("confusion"), std::string::npos);
}

TEST(Trainer, HistoryShapeAndShortFinalBatch) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    const auto examples = toy_examples(cfg, 5);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 2;
    tc.seed = 3;
    std::vector<std::size_t> epochs_seen;
    const TrainHistory h = train_model(
        model, examples, tc, [&](std::size_t e) { epochs_seen.push_back(e); });
    ASSERT_EQ(h.epochs.size(), 2u);
    ASSERT_EQ(h.batches.size(), 6u);  // ceil(5/2) = 3 per epoch
    EXPECT_EQ(h.batches[0].epoch, 1u);
    EXPECT_EQ(h.batches[3].epoch, 2u);
    for (std::size_t e = 0; e < 2; ++e) {
        EXPECT_EQ(h.batches[3 * e + 0].size, 2u);
        EXPECT_EQ(h.batches[3 * e + 1].size, 2u);
        EXPECT_EQ(h.batches[3 * e + 2].size, 1u);
    }
    EXPECT_EQ(epochs_seen, (std::vector<std::size_t>{1, 2}));
    // Epoch aggregates are sample-weighted means of their batches.
    const double joint = (2 * h.batches[0].joint + 2 * h.batches[1].joint +
                          1 * h.batches[2].joint) /
                         5.0;
    EXPECT_NEAR(h.epochs[0].joint, joint, 1e-12);
}

TEST(Trainer, DeterministicAcrossIdenticalRuns) {
    const ModelConfig cfg = tiny_config();
    const auto examples = toy_examples(cfg, 6);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.seed = 11;

    AlignmentModel m1(cfg), m2(cfg);
    const TrainHistory h1 = train_model(m1, examples, tc);
    const TrainHistory h2 = train_model(m2, examples, tc);
    ASSERT_EQ(h1.batches.size(), h2.batches.size());
    for (std::size_t i = 0; i < h1.batches.size(); ++i) {
        EXPECT_EQ(h1.batches[i].joint, h2.batches[i].joint);
        EXPECT_EQ(h1.batches[i].contrastive, h2.batches[i].contrastive);
    }
    const auto& p1 = m1.params().all();
    const auto& p2 = m2.params().all();
    ASSERT_EQ(p1.size(), p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        ASSERT_EQ(p1[i].tensor.data(), p2[i].tensor.data()) << p1[i].name;
    }
}

TEST(Trainer, RepeatedStepsOnOneBatchReduceItsLoss) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    const auto examples = toy_examples(cfg, 4);
    std::vector<const TrainingExample*> batch;
    for (const auto& ex : examples) batch.push_back(&ex);
    AdamW opt(model.params(), AdamWConfig{});
    const double first = train_batch(model, opt, batch).joint;
    double last = first;
    for (int i = 0; i < 29; ++i) last = train_batch(model, opt, batch).joint;
    EXPECT_LT(last, first);
}

TEST(Trainer, RejectsBadConfigAndEmptyData) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    const auto examples = toy_examples(cfg, 4);
    TrainConfig tc;
    tc.epochs = 0;
    EXPECT_THROW(train_model(model, examples, tc), ConfigError);
    tc.epochs = 1;
    tc.batch_size = 0;
    EXPECT_THROW(train_model(model, examples, tc), ConfigError);
    tc.batch_size = 2;
    EXPECT_THROW(train_model(model, {}, tc), DataError);
}

TEST(Trainer, EvaluatePredictsLowestIndexOnTiedLogits) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    // Zero the output layer: every sample scores (b2, b2, b2) = (0,0,0).
    auto& w2 = model.params().at("head.w2").tensor;
    auto& b2 = model.params().at("head.b2").tensor;
    std::fill(w2.data().begin(), w2.data().end(), 0.0);
    std::fill(b2.data().begin(), b2.data().end(), 0.0);
    const auto examples = toy_examples(cfg, 6);
    const EvalResult r = evaluate(model, examples);
    ASSERT_EQ(r.predicted.size(), 6u);
    for (Label p : r.predicted) EXPECT_EQ(p, Label::AD);
    EXPECT_EQ(r.metrics.total, 6u);
    EXPECT_EQ(r.ids.front(), "ex-0");
}

TEST(Trainer, StoreHistoryWritesBatchAndEpochRows) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    const auto examples = toy_examples(cfg, 4);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 2;
    const TrainHistory h = train_model(model, examples, tc);
    TempDir tmp;
    const fs::path file = tmp.path() / "history.csv";
    store_history(h, file);
    std::ifstream in(file);
    std::string line;
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, "epoch,batch,size,contrastive,ce,joint,accuracy");
    std::size_t rows = 0, epoch_rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        if (line.find(",epoch,") != std::string::npos) ++epoch_rows;
    }
    EXPECT_EQ(rows, 3u);  // 2 batch rows + 1 epoch row
    EXPECT_EQ(epoch_rows, 1u);
}

TEST(Trainer, LoadExamplesChecksManifestAgainstSidecars) {
    TempDir tmp;
    CohortConfig cc;
    cc.dims = {8, 8, 8};
    cc.counts = {2, 2, 2};
    cc.seed = 9;
    const auto cohort = synthesize_cohort(cc);
    DatasetManifest manifest;
    manifest.seed = 9;
    manifest.train_fraction = 0.5;
    std::vector<std::string> corpus;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const auto& s = cohort[i];
        store_volume(s.volume, tmp.path() / (s.volume.subject_id + ".vol"));
        const std::string text = render_report(s.record);
        corpus.push_back(text);
        std::ofstream(tmp.path() / (s.volume.subject_id + ".txt")) << text;
        manifest.entries.push_back({s.volume.subject_id + ".vol",
                                    s.volume.label,
                                    i % 2 ? Split::test : Split::train});
        manifest.class_counts[static_cast<std::size_t>(s.volume.label)]++;
    }
    const Vocabulary vocab = build_vocab(corpus, 64);

    const auto train = load_examples(tmp.path(), manifest, Split::train,
                                     vocab, 16);
    ASSERT_EQ(train.size(), 3u);
    for (const auto& ex : train) {
        EXPECT_EQ(ex.tokens.size(), 16u);
        EXPECT_EQ(ex.volume.shape(), (Shape{1, 8, 8, 8}));
    }

    // A manifest label that disagrees with the volume sidecar is corruption.
    DatasetManifest bad = manifest;
    bad.entries[0].label =
        bad.entries[0].label == Label::AD ? Label::CN : Label::AD;
    EXPECT_THROW(load_examples(tmp.path(), bad, Split::train, vocab, 16),
                 DataError);
}

TEST(Embeddings, FusedRowsHoldBothUnitNormHalves) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    const auto examples = toy_examples(cfg, 4);
    const EmbeddingTable t = export_embeddings(model, examples);
    ASSERT_EQ(t.dim, 8u);
    ASSERT_EQ(t.rows.size(), 32u);
    ASSERT_EQ(t.pca.size(), 4u);
    for (std::size_t r = 0; r < 4; ++r) {
        double nu = 0.0, nv = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            nu += t.rows[r * 8 + j] * t.rows[r * 8 + j];
            nv += t.rows[r * 8 + 4 + j] * t.rows[r * 8 + 4 + j];
        }
        EXPECT_NEAR(nu, 1.0, 1e-9);
        EXPECT_NEAR(nv, 1.0, 1e-9);
    }
    const EmbeddingTable again = export_embeddings(model, examples);
    EXPECT_EQ(t.rows, again.rows);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_EQ(t.pca[r][0], again.pca[r][0]);
        EXPECT_EQ(t.pca[r][1], again.pca[r][1]);
    }
    EXPECT_EQ(t.separation, again.separation);
}

TEST(Embeddings, SeparationScoreClosedForms) {
    // Two 1-d clusters: centroids 0 and 10, every sample 1 from its centroid.
    const std::vector<Label> labels{Label::AD, Label::AD, Label::CN,
                                    Label::CN};
    const std::vector<double> rows{-1.0, 1.0, 9.0, 11.0};
    EXPECT_DOUBLE_EQ(separation_score(labels, rows, 1), 10.0);

    // Zero within-class spread is infinitely separated.
    const std::vector<double> tight{0.0, 0.0, 10.0, 10.0};
    EXPECT_TRUE(std::isinf(separation_score(labels, tight, 1)));

    const std::vector<Label> one_class{Label::AD, Label::AD};
    EXPECT_THROW(separation_score(one_class, {0.0, 1.0}, 1), DataError);
}

TEST(Embeddings, CsvHasContractHeaderAndAllRows) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    const auto examples = toy_examples(cfg, 3);
    const EmbeddingTable t = export_embeddings(model, examples);
    TempDir tmp;
    const fs::path file = tmp.path() / "emb.csv";
    store_embeddings_csv(t, file);
    std::ifstream in(file);
    std::string line;
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, "id,label,e0,e1,e2,e3,e4,e5,e6,e7,pc1,pc2");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 3u);
}

TEST(Checkpoint, RoundTripRestoresExactBits) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    TempDir tmp;
    store_checkpoint(model.params(), tmp.path());
    const std::vector<double> before =
        model.params().at("adapter.stage0.kernel").tensor.data();
    model.params().at("adapter.stage0.kernel").tensor.data()[0] += 1.0;
    load_checkpoint(model.params(), tmp.path());
    EXPECT_EQ(model.params().at("adapter.stage0.kernel").tensor.data(),
              before);
}

TEST(Checkpoint, CorruptedPayloadRejected) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    TempDir tmp;
    store_checkpoint(model.params(), tmp.path());
    const fs::path victim = tmp.path() / "head.b2.bin";
    std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
    ASSERT_TRUE(f.good());
    f.seekp(8);  // first payload byte of the rank-1 tensor
    char byte = 0;
    f.seekg(8);
    f.read(&byte, 1);
    byte = static_cast<char>(byte ^ 0x20);
    f.seekp(8);
    f.write(&byte, 1);
    f.close();
    EXPECT_THROW(load_checkpoint(model.params(), tmp.path()), DataError);
}

TEST(Checkpoint, MissingTensorFileRejected) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    TempDir tmp;
    store_checkpoint(model.params(), tmp.path());
    fs::remove(tmp.path() / "head.w1.bin");
    EXPECT_THROW(load_checkpoint(model.params(), tmp.path()), DataError);
}

TEST(Checkpoint, ParameterCensusMismatchRejected) {
    const ModelConfig cfg = tiny_config();
    AlignmentModel model(cfg);
    TempDir tmp;
    store_checkpoint(model.params(), tmp.path());
    // Drop one manifest line: the stored census no longer matches the model.
    const fs::path mpath = tmp.path() / "manifest.txt";
    std::ifstream in(mpath);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    lines.pop_back();
    std::ofstream out(mpath, std::ios::trunc);
    for (const auto& l : lines) out << l << "\n";
    out.close();
    EXPECT_THROW(load_checkpoint(model.params(), tmp.path()), DataError);
}

TEST(Checkpoint, FreezeModeMismatchRejected) {
    ModelConfig cfg = tiny_config();
    cfg.mode = FreezeMode::TLP;
    AlignmentModel tlp(cfg);
    TempDir tmp;
    store_checkpoint(tlp.params(), tmp.path());
    cfg.mode = FreezeMode::FPM;
    AlignmentModel fpm(cfg);  // projections frozen: trainability flags differ
    EXPECT_THROW(load_checkpoint(fpm.params(), tmp.path()), DataError);
}

TEST(Config, RenderLoadRoundTrip) {
    RunConfig c;
    c.seed = 123;
    c.mode = FreezeMode::FPM;
    c.cohort.counts = {10, 11, 12};
    c.train.epochs = 4;
    c.train.optim.lr_adapter = 0.25;
    resolve_run_config(c);
    TempDir tmp;
    const fs::path file = tmp.path() / "config.txt";
    std::ofstream(file) << render_run_config(c);
    const RunConfig back = load_run_config(file);
    EXPECT_EQ(render_run_config(back), render_run_config(c));
    EXPECT_EQ(back.seed, 123u);
    EXPECT_EQ(back.mode, FreezeMode::FPM);
    EXPECT_EQ(back.train.epochs, 4u);
    EXPECT_EQ(back.train.optim.lr_adapter, 0.25);
}

TEST(Config, SeedAndDimsPropagateOnResolve) {
    RunConfig c;
    c.seed = 77;
    c.cohort.dims = {16, 32, 64};
    resolve_run_config(c);
    EXPECT_EQ(c.model.seed, 77u);
    EXPECT_EQ(c.model.vision.seed, 77u);
    EXPECT_EQ(c.model.text.seed, 77u);
    EXPECT_EQ(c.cohort.seed, 77u);
    EXPECT_EQ(c.train.seed, 77u);
    EXPECT_EQ(c.model.adapter.input_dims, (std::array<std::size_t, 3>{16, 32, 64}));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    RunConfig c;
    EXPECT_THROW(apply_config_entry(c, "train.momentum", "0.9"), ConfigError);
    EXPECT_THROW(apply_config_entry(c, "seed", "abc"), ConfigError);
    EXPECT_THROW(apply_config_entry(c, "mode", "both"), ConfigError);
    EXPECT_THROW(apply_config_entry(c, "adapter.kernel", "3,3"), ConfigError);

    c = RunConfig{};
    c.train_fraction = 1.0;
    EXPECT_THROW(resolve_run_config(c), ConfigError);
    c = RunConfig{};
    c.train.epochs = 0;
    EXPECT_THROW(resolve_run_config(c), ConfigError);
    c = RunConfig{};
    c.train.batch_size = 0;
    EXPECT_THROW(resolve_run_config(c), ConfigError);
}

TEST(Config, ParsesCommentsAndBlankLines) {
    TempDir tmp;
    const fs::path file = tmp.path() / "config.txt";
    std::ofstream(file) << "# leading comment\n"
                        << "\n"
                        << "seed = 9   # trailing comment\n"
                        << "mode=fpm\n"
                        << "  train.epochs =  3\n";
    const RunConfig c = load_run_config(file);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.mode, FreezeMode::FPM);
    EXPECT_EQ(c.train.epochs, 3u);
}

TEST(Config, MalformedLinesRejected) {
    TempDir tmp;
    const fs::path file = tmp.path() / "config.txt";
    std::ofstream(file) << "seed 9\n";
    EXPECT_THROW(load_run_config(file), ConfigError);
    std::ofstream(file, std::ios::trunc) << "seed =\n";
    EXPECT_THROW(load_run_config(file), ConfigError);
    EXPECT_THROW(load_run_config(tmp.path() / "absent.txt"), ConfigError);
}

TEST(Shapes, DeskTraceShowsAdapterAndPatchCount) {
    RunConfig c;
    resolve_run_config(c);
    const std::string trace =
        render_shape_trace(c.model.adapter, c.model.patch);
    EXPECT_NE(trace.find("adapter: (32,32,32) -> (4,32,32)"),
              std::string::npos);
    EXPECT_NE(trace.find("patches: 4"), std::string::npos);
}

TEST(Shapes, ReferenceTraceFlagsTokenCountDiscrepancy) {
    const std::string trace = render_reference_shape_trace();
    EXPECT_NE(trace.find("adapter: (256,256,256) -> (32,256,256)"),
              std::string::npos);
    EXPECT_NE(trace.find("patches: 2048"), std::string::npos);
    EXPECT_NE(trace.find("256"), std::string::npos);
    EXPECT_NE(trace.find("token width: 768"), std::string::npos);
    EXPECT_NE(trace.find("note:"), std::string::npos);
}
