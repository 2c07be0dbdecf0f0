#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "voxalign/volume.hpp"

namespace voxalign {

struct ClassMetrics {
    std::size_t support = 0;
    double precision = 0.0;
    double sensitivity = 0.0;  // recall
    double f1 = 0.0;
};

struct MetricsReport {
    // confusion[truth][prediction], classes in AD, CN, MCI order
    std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
    std::array<ClassMetrics, kNumClasses> per_class{};
    std::size_t total = 0;
    double accuracy = 0.0;
    // macro: unweighted mean over all classes, absent classes included;
    // weighted: support-weighted mean, so it equals macro under equal support
    double macro_precision = 0.0, macro_sensitivity = 0.0, macro_f1 = 0.0;
    double weighted_precision = 0.0, weighted_sensitivity = 0.0,
           weighted_f1 = 0.0;
};

// Any zero denominator (empty class, empty prediction, P+S = 0) scores 0.
MetricsReport compute_metrics(const std::vector<Label>& truth,
                              const std::vector<Label>& predicted);

std::string format_metrics(const MetricsReport& report);

}  // namespace voxalign
