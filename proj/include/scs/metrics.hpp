#pragma once

#include <optional>
#include <span>

#include "scs/task.hpp"

namespace scs {

double accuracy(std::span<const int> predictions, std::span<const int> golds);

/// F1 of the positive class; 0 when precision + recall is 0.
double binary_f1(std::span<const int> predictions, std::span<const int> golds, int positive_label);

/// Dispatches on the task metric. binary-f1 requires positive_label.
double evaluate_metric(std::span<const int> predictions, std::span<const int> golds, Metric metric,
                       std::optional<int> positive_label = std::nullopt);

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);

}  // namespace scs
