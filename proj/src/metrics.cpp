#include "voxalign/metrics.hpp"

#include <cstdio>

#include "voxalign/common.hpp"

namespace voxalign {

MetricsReport compute_metrics(const std::vector<Label>& truth,
                              const std::vector<Label>& predicted) {
    if (truth.size() != predicted.size()) {
        throw DataError("metrics: got " + std::to_string(truth.size()) +
                        " labels but " + std::to_string(predicted.size()) +
                        " predictions");
    }
    if (truth.empty()) throw DataError("metrics: empty evaluation set");

    MetricsReport r;
    r.total = truth.size();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        r.confusion[static_cast<std::size_t>(truth[i])]
                   [static_cast<std::size_t>(predicted[i])]++;
    }

    std::size_t diag = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        std::size_t tp = r.confusion[c][c];
        std::size_t truth_c = 0, pred_c = 0;
        for (std::size_t k = 0; k < kNumClasses; ++k) {
            truth_c += r.confusion[c][k];
            pred_c += r.confusion[k][c];
        }
        diag += tp;

        ClassMetrics& m = r.per_class[c];
        m.support = truth_c;
        m.precision = pred_c == 0 ? 0.0 : double(tp) / double(pred_c);
        m.sensitivity = truth_c == 0 ? 0.0 : double(tp) / double(truth_c);
        const double ps = m.precision + m.sensitivity;
        m.f1 = ps == 0.0 ? 0.0 : 2.0 * m.precision * m.sensitivity / ps;

        r.macro_precision += m.precision;
        r.macro_sensitivity += m.sensitivity;
        r.macro_f1 += m.f1;
        r.weighted_precision += m.precision * double(m.support);
        r.weighted_sensitivity += m.sensitivity * double(m.support);
        r.weighted_f1 += m.f1 * double(m.support);
    }
    r.accuracy = double(diag) / double(r.total);
    // Sum-then-divide on both averages: with equal power-of-two supports the
    // weighted mean lands bit-identical to the macro mean.
    r.macro_precision /= double(kNumClasses);
    r.macro_sensitivity /= double(kNumClasses);
    r.macro_f1 /= double(kNumClasses);
    r.weighted_precision /= double(r.total);
    r.weighted_sensitivity /= double(r.total);
    r.weighted_f1 /= double(r.total);
    return r;
}

std::string format_metrics(const MetricsReport& r) {
    char buf[160];
    std::string out;
    out += "class     support  precision  sensitivity  f1\n";
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const ClassMetrics& m = r.per_class[c];
        std::snprintf(buf, sizeof buf, "%-9s %7zu  %9.4f  %11.4f  %6.4f\n",
                      label_name(static_cast<Label>(c)), m.support,
                      m.precision, m.sensitivity, m.f1);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "accuracy  %.4f  (%zu samples)\n",
                  r.accuracy, r.total);
    out += buf;
    std::snprintf(buf, sizeof buf, "M-Avg     precision %.4f  sensitivity %.4f  f1 %.4f\n",
                  r.macro_precision, r.macro_sensitivity, r.macro_f1);
    out += buf;
    std::snprintf(buf, sizeof buf, "W-Avg     precision %.4f  sensitivity %.4f  f1 %.4f\n",
                  r.weighted_precision, r.weighted_sensitivity, r.weighted_f1);
    out += buf;
    out += "confusion (rows truth, cols prediction; AD CN MCI):\n";
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        std::snprintf(buf, sizeof buf, "  %-4s %5zu %5zu %5zu\n",
                      label_name(static_cast<Label>(c)), r.confusion[c][0],
                      r.confusion[c][1], r.confusion[c][2]);
        out += buf;
    }
    return out;
}

}  // namespace voxalign
