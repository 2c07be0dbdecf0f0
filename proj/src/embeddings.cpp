#include "voxalign/embeddings.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "voxalign/common.hpp"

namespace voxalign {

namespace {

// Deterministic top eigenvector of the covariance implied by the centered
// rows: fixed start, fixed iteration count, sign fixed by the first
// nonzero coordinate. Returns a zero vector for zero-variance data.
std::vector<double> power_component(const std::vector<double>& centered,
                                    std::size_t n, std::size_t dim) {
    std::vector<double> v(dim, 1.0 / std::sqrt(double(dim)));
    std::vector<double> next(dim);
    for (int iter = 0; iter < 128; ++iter) {
        // next = C v with C = X^T X (no 1/n; scaling cancels in normalize)
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = centered.data() + i * dim;
            double dot = 0.0;
            for (std::size_t j = 0; j < dim; ++j) dot += row[j] * v[j];
            for (std::size_t j = 0; j < dim; ++j) next[j] += dot * row[j];
        }
        double norm = 0.0;
        for (double x : next) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return std::vector<double>(dim, 0.0);
        for (std::size_t j = 0; j < dim; ++j) v[j] = next[j] / norm;
    }
    for (std::size_t j = 0; j < dim; ++j) {
        if (v[j] != 0.0) {
            if (v[j] < 0.0) {
                for (double& x : v) x = -x;
            }
            break;
        }
    }
    return v;
}

}  // namespace

double separation_score(const std::vector<Label>& labels,
                        const std::vector<double>& rows, std::size_t dim) {
    if (dim == 0 || labels.empty() || rows.size() != labels.size() * dim) {
        throw ShapeError("separation_score: rows/labels size mismatch");
    }
    std::array<std::vector<double>, kNumClasses> centroid;
    std::array<std::size_t, kNumClasses> count{};
    for (auto& c : centroid) c.assign(dim, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        ++count[c];
        for (std::size_t j = 0; j < dim; ++j) {
            centroid[c][j] += rows[i * dim + j];
        }
    }
    std::vector<std::size_t> present;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (count[c] == 0) continue;
        for (double& x : centroid[c]) x /= double(count[c]);
        present.push_back(c);
    }
    if (present.size() < 2) {
        throw DataError("separation_score: need at least two classes, got " +
                        std::to_string(present.size()));
    }

    double between = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < present.size(); ++a) {
        for (std::size_t b = a + 1; b < present.size(); ++b) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = centroid[present[a]][j] - centroid[present[b]][j];
                d2 += d * d;
            }
            between += std::sqrt(d2);
            ++pairs;
        }
    }
    between /= double(pairs);

    double within = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        double d2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = rows[i * dim + j] - centroid[c][j];
            d2 += d * d;
        }
        within += std::sqrt(d2);
    }
    within /= double(labels.size());

    if (within == 0.0) return std::numeric_limits<double>::infinity();
    return between / within;
}

EmbeddingTable export_embeddings(const AlignmentModel& model,
                                 const std::vector<TrainingExample>& examples) {
    if (examples.empty()) throw DataError("export_embeddings: no examples");
    EmbeddingTable t;
    const std::size_t proj = model.config().vision.proj_dim;
    t.dim = 2 * proj;
    for (const TrainingExample& ex : examples) {
        Tensor u = model.encode_volume(ex.volume);
        Tensor v = model.encode_tokens(ex.tokens);
        t.ids.push_back(ex.id);
        t.labels.push_back(ex.label);
        t.rows.insert(t.rows.end(), u.data().begin(), u.data().end());
        t.rows.insert(t.rows.end(), v.data().begin(), v.data().end());
    }

    const std::size_t n = t.ids.size();
    std::vector<double> mean(t.dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < t.dim; ++j) mean[j] += t.rows[i * t.dim + j];
    }
    for (double& m : mean) m /= double(n);
    std::vector<double> centered(t.rows);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < t.dim; ++j) centered[i * t.dim + j] -= mean[j];
    }

    const std::vector<double> pc1 = power_component(centered, n, t.dim);
    // deflate: remove the pc1 component from every row, then repeat
    std::vector<double> residual(centered);
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < t.dim; ++j) {
            dot += residual[i * t.dim + j] * pc1[j];
        }
        for (std::size_t j = 0; j < t.dim; ++j) {
            residual[i * t.dim + j] -= dot * pc1[j];
        }
    }
    const std::vector<double> pc2 = power_component(residual, n, t.dim);

    t.pca.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < t.dim; ++j) {
            a += centered[i * t.dim + j] * pc1[j];
            b += centered[i * t.dim + j] * pc2[j];
        }
        t.pca[i] = {a, b};
    }

    t.separation = separation_score(t.labels, t.rows, t.dim);
    return t;
}

void store_embeddings_csv(const EmbeddingTable& t,
                          const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write embeddings file " + path.string());
    out << "id,label";
    for (std::size_t j = 0; j < t.dim; ++j) out << ",e" << j;
    out << ",pc1,pc2\n";
    char num[32];
    for (std::size_t i = 0; i < t.ids.size(); ++i) {
        out << t.ids[i] << ',' << label_name(t.labels[i]);
        for (std::size_t j = 0; j < t.dim; ++j) {
            std::snprintf(num, sizeof num, ",%.17g", t.rows[i * t.dim + j]);
            out << num;
        }
        std::snprintf(num, sizeof num, ",%.17g", t.pca[i][0]);
        out << num;
        std::snprintf(num, sizeof num, ",%.17g", t.pca[i][1]);
        out << num << '\n';
    }
    if (!out) throw DataError("failed writing embeddings file " + path.string());
}

}  // namespace voxalign
