#include "upseg/metrics.hpp"

#include <string>

#include "upseg/errors.hpp"
#include "upseg/ops.hpp"
#include "upseg/resample.hpp"

namespace upseg {

ConfusionCounts::ConfusionCounts(int num_labels)
    : labels_(num_labels), counts_(static_cast<std::size_t>(num_labels * num_labels), 0) {
    if (num_labels < 1) throw ConfigError("confusion counts need at least one label");
}

std::int64_t ConfusionCounts::at(int predicted, int actual) const {
    return counts_[static_cast<std::size_t>(predicted * labels_ + actual)];
}

std::int64_t& ConfusionCounts::at(int predicted, int actual) {
    return counts_[static_cast<std::size_t>(predicted * labels_ + actual)];
}

std::int64_t ConfusionCounts::predicted_total(int label) const {
    std::int64_t s = 0;
    for (int j = 0; j < labels_; ++j) s += at(label, j);
    return s;
}

std::int64_t ConfusionCounts::actual_total(int label) const {
    std::int64_t s = 0;
    for (int j = 0; j < labels_; ++j) s += at(j, label);
    return s;
}

std::int64_t ConfusionCounts::total() const {
    std::int64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
    if (other.labels_ != labels_) throw ShapeError("cannot add confusion counts of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

int label_count(int num_classes) { return num_classes == 1 ? 2 : num_classes; }

ConfusionCounts confusion(const Mask& predicted, const Mask& actual, int num_labels) {
    if (predicted.batch != actual.batch || predicted.height != actual.height ||
        predicted.width != actual.width) {
        throw ShapeError("confusion: prediction and ground truth extents differ");
    }
    ConfusionCounts counts(num_labels);
    for (std::size_t i = 0; i < predicted.labels.size(); ++i) {
        const int p = predicted.labels[i];
        const int a = actual.labels[i];
        if (p >= num_labels || a >= num_labels) {
            throw DomainError("label " + std::to_string(std::max(p, a)) + " outside [0, " +
                              std::to_string(num_labels) + ")");
        }
        ++counts.at(p, a);
    }
    return counts;
}

MetricsReport dice_jaccard(const ConfusionCounts& counts) {
    MetricsReport r;
    r.counts = counts;
    const int labels = counts.num_labels();
    for (int i = 0; i < labels; ++i) {
        const auto tp = static_cast<double>(counts.at(i, i));
        const auto sizes = static_cast<double>(counts.predicted_total(i) + counts.actual_total(i));
        if (sizes == 0.0) {
            r.dice.push_back(1.0);
            r.jaccard.push_back(1.0);
            continue;
        }
        r.dice.push_back(2.0 * tp / sizes);
        r.jaccard.push_back(tp / (sizes - tp));
    }
    const int first = labels > 1 ? 1 : 0;
    for (int i = first; i < labels; ++i) {
        r.mean_dice += r.dice[static_cast<std::size_t>(i)];
        r.mean_jaccard += r.jaccard[static_cast<std::size_t>(i)];
    }
    r.mean_dice /= labels - first;
    r.mean_jaccard /= labels - first;
    return r;
}

Mask upscale_prediction(const Tensor& logits, std::int64_t target_height,
                        std::int64_t target_width) {
    if (logits.rank() != 4) throw ShapeError("upscale_prediction expects N x C x H x W logits");
    const auto n = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    if (target_height < h || target_width < w) {
        throw UsageError("upscale_prediction cannot shrink " + shape_to_string(logits.shape()) +
                         " to " + std::to_string(target_height) + "x" +
                         std::to_string(target_width));
    }
    const std::int64_t hw = h * w, out_hw = target_height * target_width;
    auto x = logits.data();
    std::vector<double> probs(x.size());
    if (c == 1) {
        for (std::size_t i = 0; i < x.size(); ++i) probs[i] = sigmoid(x[i]);
    } else {
        auto soft = softmax_channel(logits.detach());
        probs.assign(soft.data().begin(), soft.data().end());
    }
    Mask out(n, target_height, target_width);
    std::vector<std::vector<double>> planes(static_cast<std::size_t>(c));
    for (std::int64_t in_ = 0; in_ < n; ++in_) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            std::span<const double> plane(probs.data() + (in_ * c + ch) * hw, static_cast<std::size_t>(hw));
            planes[static_cast<std::size_t>(ch)] =
                (target_height == h && target_width == w)
                    ? std::vector<double>(plane.begin(), plane.end())
                    : bilinear_resize(plane, h, w, target_height, target_width);
        }
        for (std::int64_t p = 0; p < out_hw; ++p) {
            std::uint8_t label = 0;
            if (c == 1) {
                label = planes[0][static_cast<std::size_t>(p)] > 0.5 ? 1 : 0;
            } else {
                double best = planes[0][static_cast<std::size_t>(p)];
                for (std::int64_t ch = 1; ch < c; ++ch) {
                    const double v = planes[static_cast<std::size_t>(ch)][static_cast<std::size_t>(p)];
                    if (v > best) {
                        best = v;
                        label = static_cast<std::uint8_t>(ch);
                    }
                }
            }
            out.labels[static_cast<std::size_t>(in_ * out_hw + p)] = label;
        }
    }
    return out;
}

EvaluationSummary evaluate(const Mask& predicted, const Mask& actual, int num_labels) {
    if (predicted.batch != actual.batch) throw ShapeError("evaluate: batch sizes differ");
    EvaluationSummary s;
    s.images = predicted.batch;
    ConfusionCounts pooled(num_labels);
    for (std::int64_t n = 0; n < predicted.batch; ++n) {
        auto counts = confusion(predicted.item(n), actual.item(n), num_labels);
        auto report = dice_jaccard(counts);
        s.macro_dice += report.mean_dice;
        s.macro_jaccard += report.mean_jaccard;
        pooled += counts;
    }
    if (s.images > 0) {
        s.macro_dice /= static_cast<double>(s.images);
        s.macro_jaccard /= static_cast<double>(s.images);
    }
    s.pooled = dice_jaccard(pooled);
    return s;
}

}  // namespace upseg
