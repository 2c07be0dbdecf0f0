#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <gtest/gtest.h>

#include "voxalign/cohort.hpp"
#include "voxalign/common.hpp"
#include "voxalign/report.hpp"
#include "voxalign/rng.hpp"
#include "voxalign/volume.hpp"

using namespace voxalign;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        dir_ = fs::temp_directory_path() /
               ("voxalign-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter_++));
        fs::create_directories(dir_);
    }
    ~TempDir() { fs::remove_all(dir_); }
    const fs::path& path() const { return dir_; }

private:
    static inline int counter_ = 0;
    fs::path dir_;
};

VolumeGrid make_grid(std::array<std::size_t, 3> dims, double fill = 0.0) {
    VolumeGrid g;
    g.dims = dims;
    g.voxels.assign(dims[0] * dims[1] * dims[2], fill);
    return g;
}

}  // namespace

TEST(Resample, SameDimsIsIdentity) {
    Rng rng(2, "resample-id");
    VolumeGrid g = make_grid({3, 4, 5});
    for (double& v : g.voxels) v = rng.uniform();
    VolumeGrid r = resample_trilinear(g, g.dims);
    ASSERT_EQ(r.dims, g.dims);
    for (std::size_t i = 0; i < g.voxels.size(); ++i) {
        EXPECT_DOUBLE_EQ(r.voxels[i], g.voxels[i]);
    }
}

TEST(Resample, ConstantStaysConstant) {
    VolumeGrid g = make_grid({4, 4, 4}, 0.37);
    VolumeGrid r = resample_trilinear(g, {7, 3, 9});
    for (double v : r.voxels) EXPECT_DOUBLE_EQ(v, 0.37);
}

TEST(Resample, DepthRampHitsThirds) {
    VolumeGrid g = make_grid({2, 2, 2});
    for (std::size_t h = 0; h < 2; ++h) {
        for (std::size_t w = 0; w < 2; ++w) {
            g.at(0, h, w) = 0.0;
            g.at(1, h, w) = 1.0;
        }
    }
    VolumeGrid r = resample_trilinear(g, {4, 2, 2});
    const double want[4] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
    for (std::size_t d = 0; d < 4; ++d) {
        for (std::size_t h = 0; h < 2; ++h) {
            for (std::size_t w = 0; w < 2; ++w) {
                EXPECT_NEAR(r.at(d, h, w), want[d], 1e-15);
            }
        }
    }
}

TEST(Resample, StaysInsideSourceRange) {
    Rng rng(5, "resample-range");
    VolumeGrid g = make_grid({5, 6, 7});
    for (double& v : g.voxels) v = rng.uniform(-3.0, 9.0);
    const double mn = *std::min_element(g.voxels.begin(), g.voxels.end());
    const double mx = *std::max_element(g.voxels.begin(), g.voxels.end());
    VolumeGrid r = resample_trilinear(g, {11, 4, 13});
    for (double v : r.voxels) {
        EXPECT_GE(v, mn);
        EXPECT_LE(v, mx);
    }
}

TEST(Resample, TinyExtentsRejected) {
    VolumeGrid g = make_grid({4, 4, 4});
    EXPECT_THROW(resample_trilinear(g, {1, 4, 4}), ConfigError);
    VolumeGrid thin = make_grid({1, 4, 4});
    EXPECT_THROW(resample_trilinear(thin, {4, 4, 4}), ConfigError);
}

TEST(Normalize, HandValuesAndIdempotence) {
    VolumeGrid g = make_grid({1, 1, 3});
    g.voxels = {2.0, 4.0, 6.0};
    VolumeGrid n = normalize_intensity(g);
    EXPECT_DOUBLE_EQ(n.voxels[0], 0.0);
    EXPECT_DOUBLE_EQ(n.voxels[1], 0.5);
    EXPECT_DOUBLE_EQ(n.voxels[2], 1.0);

    VolumeGrid again = normalize_intensity(n);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(again.voxels[i], n.voxels[i]);
    }

    VolumeGrid flat = make_grid({2, 2, 2}, 5.5);
    for (double v : normalize_intensity(flat).voxels) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(VolumeIo, RoundTripIsBitIdentical) {
    TempDir tmp;
    Rng rng(9, "volio");
    VolumeSample s;
    s.grid = make_grid({3, 4, 5});
    for (double& v : s.grid.voxels) v = to_storage_precision(rng.uniform());
    s.subject_id = "AD-0001";
    s.label = Label::AD;
    s.processing_tag = "variant-2";

    const fs::path p = tmp.path() / "AD-0001.vol";
    store_volume(s, p);
    VolumeSample back = load_volume(p);
    EXPECT_EQ(back.grid.dims, s.grid.dims);
    for (std::size_t i = 0; i < s.grid.voxels.size(); ++i) {
        EXPECT_EQ(back.grid.voxels[i], s.grid.voxels[i]);
    }
    EXPECT_EQ(back.subject_id, s.subject_id);
    EXPECT_EQ(back.label, s.label);
    EXPECT_EQ(back.processing_tag, s.processing_tag);
}

TEST(VolumeIo, DistinctFailureModes) {
    TempDir tmp;
    VolumeSample s;
    s.grid = make_grid({2, 2, 2}, 0.5);
    s.subject_id = "CN-0000";
    s.label = Label::CN;
    s.processing_tag = "variant-0";
    const fs::path p = tmp.path() / "x.vol";
    store_volume(s, p);

    auto mutate = [&](auto fn, const char* name) {
        std::ifstream in(p, std::ios::binary);
        std::string blob((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        fn(blob);
        const fs::path mp = tmp.path() / name;
        std::ofstream out(mp, std::ios::binary);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        out.close();
        fs::copy_file(tmp.path() / "x.meta", fs::path(mp).replace_extension(".meta"),
                      fs::copy_options::overwrite_existing);
        return mp;
    };

    const fs::path trunc = mutate(
        [](std::string& b) { b.resize(b.size() - 6); }, "trunc.vol");
    EXPECT_THROW(
        try { load_volume(trunc); } catch (const DataError& e) {
            EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
            throw;
        },
        DataError);

    const fs::path extra = mutate(
        [](std::string& b) { b += "zz"; }, "extra.vol");
    EXPECT_THROW(
        try { load_volume(extra); } catch (const DataError& e) {
            EXPECT_NE(std::string(e.what()).find("does not match"),
                      std::string::npos);
            throw;
        },
        DataError);

    const fs::path badver = mutate(
        [](std::string& b) { b[8] = 7; }, "badver.vol");
    EXPECT_THROW(
        try { load_volume(badver); } catch (const DataError& e) {
            EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
            throw;
        },
        DataError);

    const fs::path badsum = mutate(
        [](std::string& b) { b[24] = static_cast<char>(b[24] + 1); },
        "badsum.vol");
    EXPECT_THROW(
        try { load_volume(badsum); } catch (const DataError& e) {
            EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
            throw;
        },
        DataError);

    const fs::path badmagic = mutate(
        [](std::string& b) { b[0] = 'X'; }, "badmagic.vol");
    EXPECT_THROW(load_volume(badmagic), DataError);
}

TEST(Report, TemplateMatchesExampleRecord) {
    ReportRecord rec{71, 'F', 16, 1, 24, 0.5,
                     "Decline in condition likely due to comorbid worsening of "
                     "health."};
    EXPECT_EQ(render_report(rec),
              "Age: 71. Sex: F. Education: 16 years. APOE4 alleles: 1. "
              "MMSE: 24. CDR: 0.5. Notes: Decline in condition likely due to "
              "comorbid worsening of health.");
    EXPECT_EQ(render_report(rec), render_report(rec));
}

TEST(Report, EmptyNoteRendersNone) {
    ReportRecord rec{80, 'M', 12, 0, 29, 0.0, ""};
    const std::string text = render_report(rec);
    EXPECT_NE(text.find("Notes: none"), std::string::npos);
    EXPECT_NE(text.find("CDR: 0."), std::string::npos);
}

TEST(Report, InvariantViolationsRejected) {
    ReportRecord ok{70, 'F', 10, 0, 30, 1.0, "x"};
    EXPECT_NO_THROW(validate_record(ok));
    ReportRecord bad = ok;
    bad.mmse = 31;
    EXPECT_THROW(render_report(bad), DataError);
    bad = ok;
    bad.apoe4_count = 3;
    EXPECT_THROW(render_report(bad), DataError);
    bad = ok;
    bad.cdr = 0.7;
    EXPECT_THROW(render_report(bad), DataError);
    bad = ok;
    bad.sex = 'x';
    EXPECT_THROW(render_report(bad), DataError);
}

TEST(Report, NumericFieldsMakeDistinctStrings) {
    ReportRecord a{70, 'F', 10, 0, 25, 1.0, "stable."};
    ReportRecord b = a;
    b.mmse = 26;
    EXPECT_NE(render_report(a), render_report(b));
    b = a;
    b.cdr = 2.0;
    EXPECT_NE(render_report(a), render_report(b));
    b = a;
    b.age = 71;
    EXPECT_NE(render_report(a), render_report(b));
}

TEST(Vocab, FrequencyThenLexicographicOrder) {
    Vocabulary v = build_vocab({"a b", "a c"}, 5);
    EXPECT_EQ(v.size(), 5u);
    EXPECT_EQ(v.id_of("a"), 2u);
    EXPECT_EQ(v.id_of("b"), 3u);
    EXPECT_EQ(v.id_of("c"), 4u);
    EXPECT_EQ(v.id_of("zzz"), Vocabulary::kUnk);

    Vocabulary tight = build_vocab({"a b", "a c"}, 3);
    EXPECT_EQ(tight.size(), 3u);
    EXPECT_EQ(tight.id_of("a"), 2u);
    EXPECT_EQ(tight.id_of("b"), Vocabulary::kUnk);

    EXPECT_THROW(build_vocab({}, 5), DataError);
    EXPECT_THROW(build_vocab({"a"}, 2), ConfigError);
}

TEST(Vocab, TokenizerLowercasesAndSplitsPunctuation) {
    const auto toks = split_tokens("MMSE: 24. CDR: 0.5!");
    const std::vector<std::string> want{"mmse", "24", "cdr", "0", "5"};
    EXPECT_EQ(toks, want);
}

TEST(Vocab, TokenizePadsAndTruncates) {
    Vocabulary v = build_vocab({"a b", "a c"}, 5);
    const std::vector<std::size_t> got = tokenize("a b", v, 4);
    const std::vector<std::size_t> want{2, 3, 0, 0};
    EXPECT_EQ(got, want);
    EXPECT_EQ(tokenize("a b", v, 1), (std::vector<std::size_t>{2}));
    EXPECT_EQ(tokenize("q", v, 2),
              (std::vector<std::size_t>{Vocabulary::kUnk, Vocabulary::kPad}));
    EXPECT_THROW(tokenize("a", v, 0), ConfigError);
}

TEST(Vocab, StoreLoadRoundTrip) {
    TempDir tmp;
    Vocabulary v = build_vocab({"alpha beta", "alpha gamma delta"}, 10);
    const fs::path p = tmp.path() / "vocab.txt";
    store_vocab(v, p);
    Vocabulary back = load_vocab(p);
    EXPECT_EQ(back.tokens, v.tokens);
    for (const std::string& t : v.tokens) EXPECT_EQ(back.id_of(t), v.id_of(t));
}

TEST(Cohort, DeterministicUnderSeed) {
    CohortConfig cfg;
    cfg.dims = {12, 12, 12};
    cfg.counts = {3, 3, 3};
    cfg.seed = 77;
    const auto a = synthesize_cohort(cfg);
    const auto b = synthesize_cohort(cfg);
    ASSERT_EQ(a.size(), 9u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].volume.subject_id, b[i].volume.subject_id);
        EXPECT_EQ(a[i].volume.processing_tag, b[i].volume.processing_tag);
        ASSERT_EQ(a[i].volume.grid.voxels.size(),
                  b[i].volume.grid.voxels.size());
        for (std::size_t j = 0; j < a[i].volume.grid.voxels.size(); ++j) {
            EXPECT_EQ(a[i].volume.grid.voxels[j], b[i].volume.grid.voxels[j]);
        }
        EXPECT_EQ(render_report(a[i].record), render_report(b[i].record));
    }
}

TEST(Cohort, CountsAndNormalizationContract) {
    CohortConfig cfg;
    cfg.dims = {10, 10, 10};
    cfg.counts = {4, 5, 6};
    cfg.seed = 3;
    const auto cohort = synthesize_cohort(cfg);
    EXPECT_EQ(cohort.size(), 15u);
    std::array<std::size_t, 3> per_class{};
    for (const auto& s : cohort) {
        ++per_class[static_cast<std::size_t>(s.volume.label)];
        for (double v : s.volume.grid.voxels) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            EXPECT_EQ(v, to_storage_precision(v));
        }
    }
    EXPECT_EQ(per_class[0], 4u);
    EXPECT_EQ(per_class[1], 5u);
    EXPECT_EQ(per_class[2], 6u);

    CohortConfig bad = cfg;
    bad.dims = {7, 10, 10};
    EXPECT_THROW(synthesize_cohort(bad), ConfigError);
    bad = cfg;
    bad.counts = {0, 5, 5};
    EXPECT_THROW(synthesize_cohort(bad), ConfigError);
}

TEST(Cohort, SignalRegionShrinksWithSeverity) {
    CohortConfig cfg;
    cfg.dims = {16, 16, 16};
    cfg.counts = {50, 50, 50};
    cfg.seed = 11;
    const auto cohort = synthesize_cohort(cfg);
    std::array<double, 3> mean_signal{};
    std::array<std::size_t, 3> n{};
    for (const auto& s : cohort) {
        std::size_t bright = 0;
        for (double v : s.volume.grid.voxels) {
            if (v > 0.6) ++bright;
        }
        mean_signal[static_cast<std::size_t>(s.volume.label)] += bright;
        ++n[static_cast<std::size_t>(s.volume.label)];
    }
    for (int c = 0; c < 3; ++c) mean_signal[c] /= static_cast<double>(n[c]);
    const double ad = mean_signal[static_cast<std::size_t>(Label::AD)];
    const double cn = mean_signal[static_cast<std::size_t>(Label::CN)];
    const double mci = mean_signal[static_cast<std::size_t>(Label::MCI)];
    EXPECT_LT(ad, mci);
    EXPECT_LT(mci, cn);
}

TEST(Cohort, ReportsStayInClassRangesWithZeroUnkRate) {
    CohortConfig cfg;
    cfg.dims = {10, 10, 10};
    cfg.counts = {30, 30, 30};
    cfg.seed = 21;
    const auto cohort = synthesize_cohort(cfg);
    std::vector<std::string> corpus;
    for (const auto& s : cohort) {
        validate_record(s.record);
        corpus.push_back(render_report(s.record));
    }
    Vocabulary vocab = build_vocab(corpus, 512);
    for (const std::string& text : corpus) {
        for (const std::string& tok : split_tokens(text)) {
            EXPECT_NE(vocab.id_of(tok), Vocabulary::kUnk) << tok;
        }
    }
}

TEST(SplitDataset, RoundedStratifiedCut) {
    DatasetManifest m;
    const std::array<std::size_t, 3> counts{10, 20, 30};
    for (std::size_t li = 0; li < 3; ++li) {
        for (std::size_t i = 0; i < counts[li]; ++i) {
            m.entries.push_back({label_name(kAllLabels[li]) +
                                     std::string("-") + std::to_string(i) +
                                     ".vol",
                                 kAllLabels[li], Split::train});
        }
    }
    DatasetManifest s = split_dataset(m, 0.7, 42);
    std::array<std::size_t, 3> train{};
    std::array<std::size_t, 3> test{};
    for (const auto& e : s.entries) {
        (e.split == Split::train
             ? train
             : test)[static_cast<std::size_t>(e.label)]++;
    }
    EXPECT_EQ(train[0], 7u);
    EXPECT_EQ(train[1], 14u);
    EXPECT_EQ(train[2], 21u);
    EXPECT_EQ(test[0], 3u);
    EXPECT_EQ(test[1], 6u);
    EXPECT_EQ(test[2], 9u);
    EXPECT_EQ(s.entries.size(), m.entries.size());

    DatasetManifest s2 = split_dataset(m, 0.7, 42);
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
        EXPECT_EQ(s.entries[i].split, s2.entries[i].split);
        EXPECT_EQ(s.entries[i].path, m.entries[i].path);
    }

    EXPECT_THROW(split_dataset(m, 0.0, 1), ConfigError);
    EXPECT_THROW(split_dataset(m, 1.0, 1), ConfigError);

    DatasetManifest tiny;
    tiny.entries.push_back({"a.vol", Label::AD, Split::train});
    tiny.entries.push_back({"b.vol", Label::CN, Split::train});
    tiny.entries.push_back({"c.vol", Label::CN, Split::train});
    tiny.entries.push_back({"d.vol", Label::MCI, Split::train});
    tiny.entries.push_back({"e.vol", Label::MCI, Split::train});
    EXPECT_THROW(split_dataset(tiny, 0.7, 1), DataError);
}

TEST(Manifest, StoreLoadRoundTrip) {
    TempDir tmp;
    DatasetManifest m;
    m.seed = 99;
    m.train_fraction = 0.7;
    m.class_counts = {2, 2, 2};
    m.entries = {{"AD-0000.vol", Label::AD, Split::train},
                 {"AD-0001.vol", Label::AD, Split::test},
                 {"CN-0000.vol", Label::CN, Split::train},
                 {"CN-0001.vol", Label::CN, Split::test},
                 {"MCI-0000.vol", Label::MCI, Split::train},
                 {"MCI-0001.vol", Label::MCI, Split::test}};
    const fs::path p = tmp.path() / "manifest.txt";
    store_manifest(m, p);
    DatasetManifest back = load_manifest(p);
    EXPECT_EQ(back.seed, m.seed);
    EXPECT_DOUBLE_EQ(back.train_fraction, m.train_fraction);
    EXPECT_EQ(back.class_counts, m.class_counts);
    ASSERT_EQ(back.entries.size(), m.entries.size());
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        EXPECT_EQ(back.entries[i].path, m.entries[i].path);
        EXPECT_EQ(back.entries[i].label, m.entries[i].label);
        EXPECT_EQ(back.entries[i].split, m.entries[i].split);
    }

    std::ofstream f(p, std::ios::app);
    f << "mystery=1\n";
    f.close();
    EXPECT_THROW(load_manifest(p), DataError);
}
