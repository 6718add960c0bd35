#include "scs/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace scs {

double accuracy(std::span<const int> predictions, std::span<const int> golds) {
    if (predictions.size() != golds.size()) throw std::invalid_argument("accuracy: size mismatch");
    if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
    size_t hit = 0;
    for (size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == golds[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(predictions.size());
}

double binary_f1(std::span<const int> predictions, std::span<const int> golds, int positive_label) {
    if (predictions.size() != golds.size()) throw std::invalid_argument("binary_f1: size mismatch");
    if (predictions.empty()) throw std::invalid_argument("binary_f1: empty input");
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const bool pred_pos = predictions[i] == positive_label;
        const bool gold_pos = golds[i] == positive_label;
        if (pred_pos && gold_pos) ++tp;
        else if (pred_pos) ++fp;
        else if (gold_pos) ++fn;
    }
    const double denom = 2.0 * tp + fp + fn;  // = P + R scaled; zero iff no positive anywhere
    if (denom == 0.0) return 0.0;
    return 2.0 * tp / denom;
}

double evaluate_metric(std::span<const int> predictions, std::span<const int> golds, Metric metric,
                       std::optional<int> positive_label) {
    switch (metric) {
        case Metric::Accuracy:
            return accuracy(predictions, golds);
        case Metric::BinaryF1:
            if (!positive_label) throw std::invalid_argument("binary-f1 needs a positive label");
            return binary_f1(predictions, golds, *positive_label);
    }
    throw std::logic_error("unknown metric");
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean_std: empty input");
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

}  // namespace scs
