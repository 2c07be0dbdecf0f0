#include "voxalign/verify.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "voxalign/alignment.hpp"
#include "voxalign/checkpoint.hpp"
#include "voxalign/common.hpp"
#include "voxalign/grad_check.hpp"
#include "voxalign/metrics.hpp"
#include "voxalign/model.hpp"
#include "voxalign/ops.hpp"
#include "voxalign/optimizer.hpp"
#include "voxalign/rng.hpp"
#include "voxalign/trainer.hpp"
#include "voxalign/volume.hpp"

namespace voxalign {

namespace {

namespace fs = std::filesystem;

void expect(bool ok, const std::string& what) {
    if (!ok) throw VerifyError(what);
}

void expect_near(double got, double want, double tol, const std::string& what) {
    expect(std::abs(got - want) <= tol,
           what + " (got " + std::to_string(got) + ", want " +
               std::to_string(want) + ")");
}

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad, double lo,
                     double hi) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

ModelConfig toy_model_config() {
    ModelConfig c;
    c.adapter.input_dims = {4, 8, 8};
    c.adapter.depth_reduction = 2;
    c.adapter.stage_channels = {1};
    c.patch.patch_dims = {2, 4, 4};
    c.vision.token_dim = 6;
    c.vision.n_frozen_blocks = 1;
    c.vision.proj_dim = 4;
    c.text.vocab_size = 16;
    c.text.token_dim = 6;
    c.text.n_frozen_blocks = 1;
    c.text.proj_dim = 4;
    c.head_hidden = 5;
    c.seed = 42;
    c.temperature_init = 1.0;  // keeps finite-difference truncation mild
    return c;
}

Tensor toy_volume(Rng& rng) {
    std::vector<double> v(4 * 8 * 8);
    for (double& x : v) x = rng.uniform(0.0, 1.0);
    return Tensor::from_data({1, 4, 8, 8}, std::move(v));
}

Tensor toy_joint_loss(const AlignmentModel& m, const std::vector<Tensor>& vols,
                      const std::vector<std::vector<std::size_t>>& seqs,
                      const std::vector<std::size_t>& labels) {
    std::vector<Tensor> us, vs;
    for (std::size_t i = 0; i < vols.size(); ++i) {
        us.push_back(m.encode_volume(vols[i]));
        vs.push_back(m.encode_tokens(seqs[i]));
    }
    Tensor u = ops::concat_rows(us);
    Tensor v = ops::concat_rows(vs);
    Tensor con = contrastive_loss(u, v, m.temperature().tau()).total;
    Tensor ce = cross_entropy(m.head_logits(u, v), labels);
    return joint_loss(con, ce, m.loss_weights());
}

void check_primitive_gradients() {
    Rng rng(101, "verify/prims");
    // relu is deliberately first: the fault-injection switch corrupts its
    // backward rule and this check must then miss its tolerance.
    {
        Tensor x = random_tensor({4, 5}, rng, true, 0.2, 1.5);
        std::vector<Tensor> in{x};
        auto fn = [](const std::vector<Tensor>& v) {
            return ops::sum_all(ops::relu(v[0]));
        };
        GradCheckResult r = grad_check(fn, in, 1e-4);
        expect(r.max_rel_err < 1e-6,
               "relu gradient error " + std::to_string(r.max_rel_err));
    }
    {
        Tensor a = random_tensor({3, 4}, rng, true, -1.0, 1.0);
        Tensor b = random_tensor({4, 2}, rng, true, -1.0, 1.0);
        std::vector<Tensor> in{a, b};
        auto fn = [](const std::vector<Tensor>& v) {
            return ops::sum_all(ops::tanh_op(ops::matmul(v[0], v[1])));
        };
        GradCheckResult r = grad_check(fn, in, 1e-4);
        expect(r.max_rel_err < 1e-6,
               "matmul/tanh gradient error " + std::to_string(r.max_rel_err));
    }
    {
        Tensor x = random_tensor({1, 2, 6, 6}, rng, true, 0.0, 1.0);
        Tensor k = random_tensor({1, 1, 3, 3, 3}, rng, true, -0.5, 0.5);
        std::vector<Tensor> in{x, k};
        auto fn = [](const std::vector<Tensor>& v) {
            return ops::sum_all(ops::conv3d(v[0], v[1], {1, 1, 1}, {1, 1, 1}));
        };
        GradCheckResult r = grad_check(fn, in, 1e-4);
        expect(r.max_rel_err < 1e-6,
               "conv3d gradient error " + std::to_string(r.max_rel_err));
    }
    {
        Tensor x = random_tensor({3, 5}, rng, true, -1.0, 1.0);
        std::vector<Tensor> in{x};
        auto fn = [](const std::vector<Tensor>& v) {
            return ops::sum_all(
                ops::take_diag(ops::log_softmax_rows(
                    ops::matmul(v[0], ops::transpose(v[0])))));
        };
        GradCheckResult r = grad_check(fn, in, 1e-4);
        expect(r.max_rel_err < 1e-6,
               "log-softmax gradient error " + std::to_string(r.max_rel_err));
    }
}

void check_end_to_end_gradient() {
    ModelConfig cfg = toy_model_config();
    cfg.mode = FreezeMode::TLP;
    AlignmentModel m(cfg);

    Rng data_rng(2, "test/data");
    std::vector<Tensor> vols{toy_volume(data_rng), toy_volume(data_rng)};
    std::vector<std::vector<std::size_t>> seqs{{3, 5, 7}, {4, 6, 2}};
    std::vector<std::size_t> labels{0, 2};

    std::vector<Tensor> trainable;
    for (const Parameter& p : m.params().all()) {
        if (p.trainable) trainable.push_back(p.tensor);
    }
    auto fn = [&](const std::vector<Tensor>&) {
        return toy_joint_loss(m, vols, seqs, labels);
    };
    GradCheckResult r = grad_check(fn, trainable, 1e-3);
    expect(r.max_rel_err < 1e-4,
           "joint-loss gradient error " + std::to_string(r.max_rel_err));
}

void check_contrastive_closed_forms() {
    // single pair: exactly zero
    {
        Tensor u = Tensor::from_data({1, 3}, {0.3, -0.2, 0.8});
        Tensor v = Tensor::from_data({1, 3}, {0.1, 0.5, 0.2});
        ContrastiveResult r = contrastive_loss(u, v, Tensor::scalar(0.07));
        expect(r.total.value() == 0.0, "single-pair loss must be exactly 0");
    }
    // identical rows: ln N exactly from the stabilized softmax
    for (std::size_t n : {2u, 4u, 8u}) {
        std::vector<double> rows(n * 3);
        for (std::size_t i = 0; i < n; ++i) {
            rows[i * 3] = 0.4;
            rows[i * 3 + 1] = -0.1;
            rows[i * 3 + 2] = 0.7;
        }
        Tensor u = Tensor::from_data({n, 3}, rows);
        ContrastiveResult r = contrastive_loss(u, u, Tensor::scalar(1.0));
        expect_near(r.total.value(), std::log(double(n)), 1e-9,
                    "uniform-similarity loss for n=" + std::to_string(n));
    }
    // orthonormal rows: log(1 + (N-1) exp(-1/tau))
    for (std::size_t n : {2u, 4u, 8u}) {
        for (double tau : {0.07, 1.0, 10.0}) {
            std::vector<double> eye(n * n, 0.0);
            for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
            Tensor u = Tensor::from_data({n, n}, eye);
            ContrastiveResult r = contrastive_loss(u, u, Tensor::scalar(tau));
            expect_near(r.total.value(),
                        std::log(1.0 + double(n - 1) * std::exp(-1.0 / tau)),
                        1e-9, "orthonormal loss n=" + std::to_string(n));
        }
    }
    // very hot temperature flattens toward ln N
    {
        Rng rng(7, "verify/hot");
        Tensor u = random_tensor({4, 6}, rng, false, -1.0, 1.0);
        Tensor v = random_tensor({4, 6}, rng, false, -1.0, 1.0);
        ContrastiveResult r = contrastive_loss(u, v, Tensor::scalar(1e3));
        expect(std::abs(r.total.value() - std::log(4.0)) < 1e-3,
               "tau=1e3 loss must sit within 1e-3 of ln 4");
    }
}

void check_modality_symmetry() {
    Rng rng(55, "verify/symmetry");
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 2 + rng.uniform_index(7);
        const std::size_t d = 3 + rng.uniform_index(6);
        Tensor u = random_tensor({n, d}, rng, false, -1.0, 1.0);
        Tensor v = random_tensor({n, d}, rng, false, -1.0, 1.0);
        Tensor tau = Tensor::scalar(0.05 + rng.uniform(0.0, 2.0));
        ContrastiveResult a = contrastive_loss(u, v, tau);
        ContrastiveResult b = contrastive_loss(v, u, tau);
        expect(a.total.value() == b.total.value(),
               "swapped-modality loss differs at rep " + std::to_string(rep));
        expect(a.img_to_text.value() == b.text_to_img.value() &&
                   a.text_to_img.value() == b.img_to_text.value(),
               "swapped-modality directions differ at rep " +
                   std::to_string(rep));
    }
}

void check_optimizer_step() {
    // Hand-checkable first step: m-hat = g, v-hat = g^2, so the update is
    // -lr * g / (|g| + eps) = -lr for g = 1.
    {
        ParameterStore store;
        Tensor p = store.add("adapter.w", Tensor::from_data({2}, {1.0, -2.0}),
                             true);
        AdamWConfig cfg;
        cfg.lr_adapter = 0.1;
        cfg.weight_decay = 0.0;
        AdamW opt(store, cfg);
        p.grad().assign(2, 1.0);
        opt.step();
        expect_near(p.data()[0], 1.0 - 0.1, 1e-6, "adamw first step");
        expect_near(p.data()[1], -2.0 - 0.1, 1e-6, "adamw first step");
    }
    // Zero gradient leaves only decay, and decay is the exact factor.
    {
        ParameterStore store;
        Tensor p = store.add("head.w", Tensor::from_data({1}, {0.75}), true);
        AdamWConfig cfg;
        cfg.lr_projection = 0.05;
        cfg.weight_decay = 0.1;
        AdamW opt(store, cfg);
        p.grad().assign(1, 0.0);
        opt.step();
        expect(p.data()[0] == 0.75 * (1.0 - 0.05 * 0.1),
               "pure weight decay must be the exact factor");
    }
    // Frozen parameters are untouched even with a stale gradient buffer.
    {
        ParameterStore store;
        Tensor p = store.add("vision.embed", Tensor::from_data({1}, {3.0}),
                             true);
        Parameter& par = store.at("vision.embed");
        p.grad().assign(1, 5.0);
        par.trainable = false;
        AdamW opt(store, AdamWConfig{});
        opt.step();
        expect(p.data()[0] == 3.0, "frozen parameter moved");
    }
}

void check_metrics_oracle() {
    // truth (A,A,B,B), predictions (A,B,B,B) with A=AD, B=CN:
    // AD: precision 1, sensitivity 1/2, f1 2/3; CN: 2/3, 1, 4/5.
    std::vector<Label> truth{Label::AD, Label::AD, Label::CN, Label::CN};
    std::vector<Label> pred{Label::AD, Label::CN, Label::CN, Label::CN};
    MetricsReport r = compute_metrics(truth, pred);
    expect_near(r.per_class[0].precision, 1.0, 1e-12, "AD precision");
    expect_near(r.per_class[0].sensitivity, 0.5, 1e-12, "AD sensitivity");
    expect_near(r.per_class[0].f1, 2.0 / 3.0, 1e-12, "AD f1");
    expect_near(r.per_class[1].precision, 2.0 / 3.0, 1e-12, "CN precision");
    expect_near(r.per_class[1].f1, 0.8, 1e-12, "CN f1");
    expect_near(r.macro_f1, (2.0 / 3.0 + 0.8) / 3.0, 1e-12, "macro f1");
    expect_near(r.accuracy, 0.75, 1e-12, "accuracy");

    // equal supports: weighted and macro must agree exactly in value
    std::vector<Label> t2{Label::AD, Label::CN, Label::MCI};
    std::vector<Label> p2{Label::AD, Label::MCI, Label::MCI};
    MetricsReport r2 = compute_metrics(t2, p2);
    expect_near(r2.weighted_f1, r2.macro_f1, 1e-12,
                "weighted vs macro under equal support");
}

void check_volume_roundtrip() {
    const fs::path dir =
        fs::temp_directory_path() /
        ("voxalign-verify-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    try {
        Rng rng(77, "verify/volume");
        VolumeSample s;
        s.grid.dims = {4, 5, 6};
        s.grid.voxels.resize(4 * 5 * 6);
        for (double& v : s.grid.voxels) {
            v = to_storage_precision(rng.uniform(0.0, 1.0));
        }
        s.subject_id = "VER-0001";
        s.label = Label::MCI;
        s.processing_tag = "variant-0";
        const fs::path path = dir / "check.vol";
        store_volume(s, path);
        VolumeSample back = load_volume(path);
        expect(back.grid.voxels == s.grid.voxels,
               "volume voxels changed across store/load");
        expect(back.subject_id == s.subject_id && back.label == s.label,
               "volume metadata changed across store/load");

        // flip one payload byte; the checksum must catch it
        std::fstream f(path,
                       std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(8 + 16 + 3);
        char b = 0;
        f.seekg(8 + 16 + 3);
        f.read(&b, 1);
        b = static_cast<char>(b ^ 0x40);
        f.seekp(8 + 16 + 3);
        f.write(&b, 1);
        f.close();
        bool caught = false;
        try {
            load_volume(path);
        } catch (const DataError&) {
            caught = true;
        }
        expect(caught, "corrupted volume payload was not detected");
        fs::remove_all(dir);
    } catch (...) {
        fs::remove_all(dir);
        throw;
    }
}

void check_determinism() {
    auto run_once = [](std::vector<double>& flat) {
        ModelConfig cfg = toy_model_config();
        AlignmentModel m(cfg);
        Rng data_rng(5, "verify/determinism");
        std::vector<TrainingExample> examples;
        for (std::size_t i = 0; i < 6; ++i) {
            TrainingExample ex;
            ex.id = "S" + std::to_string(i);
            ex.label = static_cast<Label>(i % 3);
            ex.volume = toy_volume(data_rng);
            ex.tokens = {2 + i % 3, 5, 8};
            examples.push_back(std::move(ex));
        }
        TrainConfig tc;
        tc.epochs = 2;
        tc.batch_size = 3;
        tc.seed = 9;
        train_model(m, examples, tc);
        for (const Parameter& p : m.params().all()) {
            flat.insert(flat.end(), p.tensor.data().begin(),
                        p.tensor.data().end());
        }
    };
    std::vector<double> a, b;
    run_once(a);
    run_once(b);
    expect(a == b, "two identical training runs diverged");
}

}  // namespace

void run_verify_suite(std::ostream& out, const VerifyOptions& options) {
    ops::set_gradient_fault_injection(options.inject_grad_fault);
    struct Restore {
        ~Restore() { ops::set_gradient_fault_injection(false); }
    } restore;

    const struct {
        const char* name;
        void (*fn)();
    } checks[] = {
        {"primitive-gradients", check_primitive_gradients},
        {"end-to-end-gradient", check_end_to_end_gradient},
        {"contrastive-closed-forms", check_contrastive_closed_forms},
        {"modality-symmetry", check_modality_symmetry},
        {"optimizer-step", check_optimizer_step},
        {"metrics-oracle", check_metrics_oracle},
        {"volume-roundtrip", check_volume_roundtrip},
        {"determinism", check_determinism},
    };
    for (const auto& check : checks) {
        try {
            check.fn();
        } catch (const VerifyError& e) {
            out << "check " << check.name << ": FAILED\n";
            throw VerifyError(std::string(check.name) + ": " + e.what());
        } catch (const std::exception& e) {
            out << "check " << check.name << ": FAILED\n";
            throw VerifyError(std::string(check.name) + ": unexpected error: " +
                              e.what());
        }
        out << "check " << check.name << ": ok\n";
    }
}

}  // namespace voxalign
