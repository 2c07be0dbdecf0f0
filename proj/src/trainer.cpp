#include "voxalign/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "voxalign/alignment.hpp"
#include "voxalign/common.hpp"
#include "voxalign/ops.hpp"
#include "voxalign/rng.hpp"

namespace voxalign {

namespace {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open report file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t argmax_row(const std::vector<double>& data, std::size_t row,
                       std::size_t cols) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
        if (data[row * cols + c] > data[row * cols + best]) best = c;
    }
    return best;
}

}  // namespace

std::vector<TrainingExample> load_examples(
    const std::filesystem::path& manifest_dir, const DatasetManifest& manifest,
    Split split, const Vocabulary& vocab, std::size_t max_tokens) {
    std::vector<TrainingExample> out;
    for (const ManifestEntry& entry : manifest.entries) {
        if (entry.split != split) continue;
        const std::filesystem::path vol_path = manifest_dir / entry.path;
        VolumeSample sample = load_volume(vol_path);
        if (sample.label != entry.label) {
            throw DataError("label mismatch for " + entry.path +
                            ": manifest says " + label_name(entry.label) +
                            ", sidecar says " + label_name(sample.label));
        }
        std::filesystem::path report_path = vol_path;
        report_path.replace_extension(".txt");

        TrainingExample ex;
        ex.id = sample.subject_id;
        ex.label = sample.label;
        const auto& dims = sample.grid.dims;
        ex.volume = Tensor::from_data({1, dims[0], dims[1], dims[2]},
                                      std::move(sample.grid.voxels));
        ex.tokens = tokenize(read_text_file(report_path), vocab, max_tokens);
        out.push_back(std::move(ex));
    }
    if (out.empty()) {
        throw DataError(std::string("manifest has no entries in the ") +
                        split_name(split) + " split");
    }
    return out;
}

BatchStats train_batch(AlignmentModel& model, AdamW& optim,
                       const std::vector<const TrainingExample*>& batch) {
    if (batch.empty()) throw DataError("empty training batch");
    model.params().zero_grads();

    BatchStats stats;
    stats.size = batch.size();
    Tape tape;
    {
        TapeScope scope(tape);
        std::vector<Tensor> us, vs;
        std::vector<std::size_t> labels;
        for (const TrainingExample* ex : batch) {
            us.push_back(model.encode_volume(ex->volume));
            vs.push_back(model.encode_tokens(ex->tokens));
            labels.push_back(static_cast<std::size_t>(ex->label));
        }
        Tensor u = ops::concat_rows(us);
        Tensor v = ops::concat_rows(vs);
        Tensor con = contrastive_loss(u, v, model.temperature().tau()).total;
        Tensor logits = model.head_logits(u, v);
        Tensor ce = cross_entropy(logits, labels);
        Tensor joint = joint_loss(con, ce, model.loss_weights());
        tape.backward(joint);

        stats.contrastive = con.value();
        stats.ce = ce.value();
        stats.joint = joint.value();
        std::size_t hits = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (argmax_row(logits.data(), i, 3) == labels[i]) ++hits;
        }
        stats.accuracy = double(hits) / double(labels.size());
    }
    optim.step();
    return stats;
}

TrainHistory train_model(
    AlignmentModel& model, const std::vector<TrainingExample>& examples,
    const TrainConfig& config,
    const std::function<void(std::size_t)>& on_epoch_end) {
    if (config.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (config.batch_size < 1) {
        throw ConfigError("train: batch_size must be >= 1");
    }
    if (examples.empty()) throw DataError("train: no examples");

    AdamW optim(model.params(), config.optim);
    Rng shuffle_rng(config.seed, "train/shuffle");

    TrainHistory history;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const std::vector<std::size_t> order =
            shuffle_rng.permutation(examples.size());

        double con = 0.0, ce = 0.0, joint = 0.0, acc = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size();
             start += config.batch_size) {
            const std::size_t stop =
                std::min(start + config.batch_size, order.size());
            std::vector<const TrainingExample*> batch;
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(&examples[order[i]]);
            }
            BatchStats bs = train_batch(model, optim, batch);
            bs.epoch = epoch;
            bs.batch = ++batch_index;
            con += bs.contrastive * double(bs.size);
            ce += bs.ce * double(bs.size);
            joint += bs.joint * double(bs.size);
            acc += bs.accuracy * double(bs.size);
            history.batches.push_back(bs);
        }
        EpochStats es;
        es.epoch = epoch;
        es.contrastive = con / double(examples.size());
        es.ce = ce / double(examples.size());
        es.joint = joint / double(examples.size());
        es.accuracy = acc / double(examples.size());
        history.epochs.push_back(es);
        if (on_epoch_end) on_epoch_end(epoch);
    }
    return history;
}

void store_history(const TrainHistory& history,
                   const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write history file " + path.string());
    char line[192];
    out << "epoch,batch,size,contrastive,ce,joint,accuracy\n";
    for (const BatchStats& b : history.batches) {
        std::snprintf(line, sizeof line, "%zu,%zu,%zu,%.17g,%.17g,%.17g,%.17g\n",
                      b.epoch, b.batch, b.size, b.contrastive, b.ce, b.joint,
                      b.accuracy);
        out << line;
    }
    for (const EpochStats& e : history.epochs) {
        std::snprintf(line, sizeof line, "%zu,epoch,,%.17g,%.17g,%.17g,%.17g\n",
                      e.epoch, e.contrastive, e.ce, e.joint, e.accuracy);
        out << line;
    }
    if (!out) throw DataError("failed writing history file " + path.string());
}

EvalResult evaluate(const AlignmentModel& model,
                    const std::vector<TrainingExample>& examples) {
    if (examples.empty()) throw DataError("evaluate: no examples");
    EvalResult r;
    for (const TrainingExample& ex : examples) {
        Tensor u = model.encode_volume(ex.volume);
        Tensor v = model.encode_tokens(ex.tokens);
        Tensor logits = model.head_logits(u, v);
        r.ids.push_back(ex.id);
        r.truth.push_back(ex.label);
        r.predicted.push_back(
            static_cast<Label>(argmax_row(logits.data(), 0, 3)));
    }
    r.metrics = compute_metrics(r.truth, r.predicted);
    return r;
}

}  // namespace voxalign
