#pragma once

#include <cstdint>
#include <vector>

#include "upseg/mask.hpp"
#include "upseg/tensor.hpp"

namespace upseg {

/// p(i, j): pixels predicted as label i whose ground truth is label j.
class ConfusionCounts {
public:
    ConfusionCounts() = default;
    explicit ConfusionCounts(int num_labels);

    int num_labels() const { return labels_; }
    std::int64_t at(int predicted, int actual) const;
    std::int64_t& at(int predicted, int actual);
    /// sum_j p(i, j)
    std::int64_t predicted_total(int label) const;
    /// sum_j p(j, i)
    std::int64_t actual_total(int label) const;
    std::int64_t total() const;

    ConfusionCounts& operator+=(const ConfusionCounts& other);
    bool operator==(const ConfusionCounts&) const = default;

private:
    int labels_ = 0;
    std::vector<std::int64_t> counts_;
};

/// Per-label dice and jaccard for every label, plus means over the foreground
/// labels 1 .. L-1 (label 0 is background).
struct MetricsReport {
    std::vector<double> dice;
    std::vector<double> jaccard;
    double mean_dice = 0.0;
    double mean_jaccard = 0.0;
    ConfusionCounts counts;
};

/// Scores averaged per image ("macro") and from summed counts ("pooled").
struct EvaluationSummary {
    std::int64_t images = 0;
    double macro_dice = 0.0;
    double macro_jaccard = 0.0;
    MetricsReport pooled;
};

/// Label count implied by the model's output channels: binary models
/// (one channel) score two labels.
int label_count(int num_classes);

ConfusionCounts confusion(const Mask& predicted, const Mask& actual, int num_labels);

/// jaccard_i = p_ii / (sum_j p_ij + sum_j p_ji - p_ii),
/// dice_i = 2 p_ii / (sum_j p_ij + sum_j p_ji).
/// A label absent from both prediction and ground truth scores 1.0.
MetricsReport dice_jaccard(const ConfusionCounts& counts);

/// Stretches per-class probabilities to target extents with bilinear
/// interpolation, then labels each pixel: probability > 0.5 for one-channel
/// logits, argmax otherwise. Throws UsageError if asked to shrink.
Mask upscale_prediction(const Tensor& logits, std::int64_t target_height,
                        std::int64_t target_width);

EvaluationSummary evaluate(const Mask& predicted, const Mask& actual, int num_labels);

}  // namespace upseg
