#include "voxalign/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "voxalign/common.hpp"
#include "voxalign/rng.hpp"

namespace voxalign {

namespace {

struct ClassProfile {
    double radius_frac;      // signal ellipsoid semi-axis / half-extent
    int age_lo, age_hi;
    int mmse_lo, mmse_hi;
    std::vector<double> cdr_values;
    std::vector<double> cdr_weights;
    std::vector<double> apoe4_weights;  // for counts 0,1,2
    std::vector<const char*> phrases;
    const char* impression;  // fixed closing clause, one per class
};

const ClassProfile& profile_for(Label label) {
    // Every phrase in a pool repeats that class's marker words so the bag of
    // tokens separates the classes even after mean pooling.
    static const ClassProfile ad{
        0.44, 62, 90, 14, 21,
        {1.0, 2.0, 3.0}, {0.5, 0.35, 0.15},
        {0.30, 0.45, 0.25},
        {"severe memory impairment; dependent for daily living.",
         "severe impairment with disorientation; dependent on caregiver "
         "support.",
         "severe functional impairment; dependent in routine activities."},
        "impression: advanced degenerative dementia pattern. progressive "
        "decline anticipated."};
    static const ClassProfile cn{
        0.60, 55, 85, 28, 30,
        {0.0}, {1.0},
        {0.70, 0.25, 0.05},
        {"cognition intact; normal daily function; fully independent.",
         "normal exam; memory intact; independent in daily tasks.",
         "intact recall; normal screening; independent living."},
        "impression: unremarkable healthy aging pattern. stable course "
        "expected."};
    static const ClassProfile mci{
        0.52, 60, 88, 23, 26,
        {0.5}, {1.0},
        {0.50, 0.35, 0.15},
        {"mild memory lapses; borderline screening; largely self-sufficient.",
         "mild word-finding lapses; borderline recall performance.",
         "mild lapses in recent recall; borderline cognitive scores."},
        "impression: early prodromal borderline pattern. close monitoring "
        "recommended."};
    switch (label) {
        case Label::AD: return ad;
        case Label::CN: return cn;
        case Label::MCI: return mci;
    }
    throw DataError("invalid label value");
}

const std::vector<const char*>& nuisance_phrases() {
    static const std::vector<const char*> phrases{
        "", "sleep adequate.", "bp controlled.", "followup planned."};
    return phrases;
}

// One pass of a 3x3x3 box mean with clamped borders.
VolumeGrid box_smooth(const VolumeGrid& g) {
    VolumeGrid out;
    out.dims = g.dims;
    out.voxels.resize(g.voxels.size());
    const auto [D, H, W] = g.dims;
    for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t w = 0; w < W; ++w) {
                double acc = 0.0;
                int n = 0;
                for (int dd = -1; dd <= 1; ++dd) {
                    const std::int64_t id = static_cast<std::int64_t>(d) + dd;
                    if (id < 0 || id >= static_cast<std::int64_t>(D)) continue;
                    for (int dh = -1; dh <= 1; ++dh) {
                        const std::int64_t ih = static_cast<std::int64_t>(h) + dh;
                        if (ih < 0 || ih >= static_cast<std::int64_t>(H)) continue;
                        for (int dw = -1; dw <= 1; ++dw) {
                            const std::int64_t iw =
                                static_cast<std::int64_t>(w) + dw;
                            if (iw < 0 || iw >= static_cast<std::int64_t>(W)) {
                                continue;
                            }
                            acc += g.at(static_cast<std::size_t>(id),
                                        static_cast<std::size_t>(ih),
                                        static_cast<std::size_t>(iw));
                            ++n;
                        }
                    }
                }
                out.at(d, h, w) = acc / n;
            }
        }
    }
    return out;
}

VolumeGrid generate_volume(Label label, const std::array<std::size_t, 3>& dims,
                           int smooth_passes, Rng& rng) {
    // Generate above target resolution so the resampling path is exercised
    // on every sample.
    std::array<std::size_t, 3> gen_dims;
    for (int a = 0; a < 3; ++a) gen_dims[a] = dims[a] + std::max<std::size_t>(dims[a] / 8, 2);

    VolumeGrid g;
    g.dims = gen_dims;
    g.voxels.resize(g.voxel_count());
    for (double& v : g.voxels) v = rng.uniform(0.25, 0.45);

    const ClassProfile& prof = profile_for(label);
    // Wide enough that neighboring classes overlap in size for a fraction of
    // subjects; those cases are only decidable from the report text.
    const double scale_jitter = rng.uniform(0.90, 1.10);
    std::array<double, 3> center, radius;
    for (int a = 0; a < 3; ++a) {
        center[a] = (static_cast<double>(gen_dims[a]) - 1.0) / 2.0 +
                    rng.uniform(-1.0, 1.0);
        radius[a] = prof.radius_frac * scale_jitter * rng.uniform(0.98, 1.02) *
                    (static_cast<double>(gen_dims[a]) / 2.0 - 1.0);
    }
    for (std::size_t d = 0; d < gen_dims[0]; ++d) {
        const double zd = (static_cast<double>(d) - center[0]) / radius[0];
        for (std::size_t h = 0; h < gen_dims[1]; ++h) {
            const double zh = (static_cast<double>(h) - center[1]) / radius[1];
            for (std::size_t w = 0; w < gen_dims[2]; ++w) {
                const double zw = (static_cast<double>(w) - center[2]) / radius[2];
                if (zd * zd + zh * zh + zw * zw <= 1.0) {
                    g.at(d, h, w) = rng.uniform(0.80, 0.90);
                }
            }
        }
    }

    for (int i = 0; i < smooth_passes; ++i) g = box_smooth(g);
    VolumeGrid out = normalize_intensity(resample_trilinear(g, dims));
    for (double& v : out.voxels) v = to_storage_precision(v);
    return out;
}

ReportRecord generate_record(Label label, Rng& rng) {
    const ClassProfile& prof = profile_for(label);
    ReportRecord rec;
    rec.age = static_cast<int>(rng.uniform_int(prof.age_lo, prof.age_hi));
    rec.sex = rng.uniform_index(2) == 0 ? 'M' : 'F';
    rec.education_years = static_cast<int>(rng.uniform_int(12, 18));
    rec.apoe4_count = static_cast<int>(rng.categorical(prof.apoe4_weights));
    rec.mmse = static_cast<int>(rng.uniform_int(prof.mmse_lo, prof.mmse_hi));
    rec.cdr = prof.cdr_values[rng.categorical(prof.cdr_weights)];
    std::string note = prof.phrases[rng.uniform_index(prof.phrases.size())];
    const char* extra =
        nuisance_phrases()[rng.uniform_index(nuisance_phrases().size())];
    if (extra[0] != '\0') note += std::string(" ") + extra;
    note += std::string(" ") + prof.impression;
    rec.note = std::move(note);
    validate_record(rec);
    return rec;
}

}  // namespace

std::vector<LabeledSample> synthesize_cohort(const CohortConfig& config) {
    for (int a = 0; a < 3; ++a) {
        if (config.dims[a] < 8) {
            throw ConfigError(
                "synthesize_cohort: extent " + std::to_string(config.dims[a]) +
                " on axis " + std::to_string(a) +
                " is too small to contain the signal ellipsoid (minimum 8)");
        }
    }
    for (std::size_t c : config.counts) {
        if (c < 1) {
            throw ConfigError("synthesize_cohort: every class needs at least "
                              "one sample");
        }
    }

    std::vector<LabeledSample> cohort;
    cohort.reserve(config.counts[0] + config.counts[1] + config.counts[2]);
    for (std::size_t li = 0; li < kNumClasses; ++li) {
        const Label label = kAllLabels[li];
        for (std::size_t i = 0; i < config.counts[li]; ++i) {
            char idbuf[32];
            std::snprintf(idbuf, sizeof idbuf, "%s-%04zu", label_name(label), i);
            Rng rng(config.seed, std::string("cohort/") + idbuf);

            LabeledSample s;
            s.volume.subject_id = idbuf;
            s.volume.label = label;
            const int smooth_passes =
                1 + static_cast<int>(rng.uniform_index(2));
            s.volume.processing_tag =
                "variant-" + std::to_string(smooth_passes);
            s.volume.grid =
                generate_volume(label, config.dims, smooth_passes, rng);
            s.record = generate_record(label, rng);
            cohort.push_back(std::move(s));
        }
    }
    return cohort;
}

const char* split_name(Split split) {
    return split == Split::train ? "train" : "test";
}

Split split_from_name(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "test") return Split::test;
    throw DataError("unknown split '" + std::string(name) + "'");
}

DatasetManifest split_dataset(const DatasetManifest& manifest,
                              double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("split_dataset: train_fraction must lie in (0,1)");
    }
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        by_class[static_cast<std::size_t>(manifest.entries[i].label)].push_back(i);
    }
    DatasetManifest out = manifest;
    out.seed = seed;
    out.train_fraction = train_fraction;
    for (std::size_t li = 0; li < kNumClasses; ++li) {
        const auto& idx = by_class[li];
        if (idx.size() < 2) {
            throw DataError(std::string("split_dataset: class ") +
                            label_name(kAllLabels[li]) + " has " +
                            std::to_string(idx.size()) +
                            " samples; need at least 2");
        }
        out.class_counts[li] = idx.size();
        Rng rng(seed, std::string("split/") + label_name(kAllLabels[li]));
        const std::vector<std::size_t> perm = rng.permutation(idx.size());
        const auto want = static_cast<std::size_t>(std::min<long long>(
            std::llround(train_fraction * static_cast<double>(idx.size())),
            static_cast<long long>(idx.size())));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            out.entries[idx[perm[k]]].split =
                k < want ? Split::train : Split::test;
        }
    }
    return out;
}

void store_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open for write: " + path.string());
    char frac[64];
    std::snprintf(frac, sizeof frac, "%.17g", manifest.train_fraction);
    f << "manifest-version=1\n"
      << "seed=" << manifest.seed << "\n"
      << "train_fraction=" << frac << "\n";
    for (std::size_t li = 0; li < kNumClasses; ++li) {
        f << "count." << label_name(kAllLabels[li]) << "="
          << manifest.class_counts[li] << "\n";
    }
    for (const ManifestEntry& e : manifest.entries) {
        f << "sample=" << e.path << "," << label_name(e.label) << ","
          << split_name(e.split) << "\n";
    }
    if (!f) throw DataError("write failed: " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest: " + path.string());
    DatasetManifest m;
    std::string line;
    bool versioned = false;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError("malformed manifest line " + std::to_string(lineno) +
                            " in " + path.string());
        }
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "manifest-version") {
            if (val != "1") {
                throw DataError("unsupported manifest version " + val + ": " +
                                path.string());
            }
            versioned = true;
        } else if (key == "seed") {
            m.seed = std::stoull(val);
        } else if (key == "train_fraction") {
            m.train_fraction = std::stod(val);
        } else if (key.rfind("count.", 0) == 0) {
            const Label label = label_from_name(key.substr(6));
            m.class_counts[static_cast<std::size_t>(label)] = std::stoull(val);
        } else if (key == "sample") {
            std::istringstream ss(val);
            std::string p, l, s;
            if (!std::getline(ss, p, ',') || !std::getline(ss, l, ',') ||
                !std::getline(ss, s)) {
                throw DataError("malformed sample line " +
                                std::to_string(lineno) + " in " + path.string());
            }
            m.entries.push_back({p, label_from_name(l), split_from_name(s)});
        } else {
            throw DataError("unknown manifest key '" + key + "' in " +
                            path.string());
        }
    }
    if (!versioned) {
        throw DataError("manifest missing version line: " + path.string());
    }
    return m;
}

}  // namespace voxalign
