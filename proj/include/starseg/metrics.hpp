#pragma once

// Panoptic-quality evaluation: per-class matching at IoU > 0.5, DQ/SQ/PQ,
// multi-class mPQ, and the dataset-pooled "+" variants.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "starseg/encode.hpp"
#include "starseg/parallel.hpp"

namespace starseg {

struct ClassStats {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double sum_iou = 0.0;

    bool empty() const { return tp + fp + fn == 0; }
    ClassStats& operator+=(const ClassStats& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        sum_iou += o.sum_iou;
        return *this;
    }
    friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

struct Quality {
    double dq = 0.0;
    double sq = 0.0;
    double pq = 0.0;
};

/// dq = tp / (tp + fp/2 + fn/2), sq = sum_iou / tp, pq = dq * sq; zero when
/// the denominators vanish.
Quality dq_sq_pq(const ClassStats& s);

/// Matches instances of two maps at IoU > 0.5 (one-to-one by construction).
/// Throws Errc::DimensionMismatch.
ClassStats match_instances(const InstanceMap& gt, const InstanceMap& pred);

/// Copy of the map keeping only instances of class `cls`.
InstanceMap restrict_to_class(const LabelImage& label, int cls);

struct ImageStats {
    std::vector<ClassStats> per_class;  // index t - 1
    ClassStats overall;                 // class-agnostic
};

struct PQReport {
    int n_classes = 0;

    // Pooled over the dataset.
    std::vector<ClassStats> per_class;
    ClassStats overall;
    std::vector<Quality> per_class_plus;
    double mpq_plus = 0.0;
    Quality overall_plus;  // overall_plus.pq is PQ+

    // Computed per image and averaged over the images where the class occurs
    // in ground truth or prediction; nullopt when it occurs nowhere.
    std::vector<std::optional<Quality>> per_class_mean;
    double mpq = 0.0;
    Quality overall_mean;  // overall_mean.pq is PQ

    // Alternative aggregation: mPQ per image first, then averaged over images.
    double mpq_image_first = 0.0;

    std::vector<ImageStats> per_image;

    // Instance counts per class (task-2 style cellular composition).
    std::vector<std::size_t> gt_counts;
    std::vector<std::size_t> pred_counts;
};

ImageStats image_stats(const LabelImage& gt, const LabelImage& pred, int n_classes);

/// Throws Errc::LengthMismatch, Errc::DimensionMismatch.
PQReport evaluate(const std::vector<LabelImage>& gt, const std::vector<LabelImage>& pred, int n_classes,
                  Exec exec = Exec::Parallel);

/// Rounds to 4 decimals, the precision reports are published with.
double round4(double x);

/// JSON report; `names` labels the per-image entries and may be empty.
std::string report_json(const PQReport& r, const std::vector<std::string>& names, bool counts);

/// Console table: mPQ+, PQ, PQ+ and per-class PQ+.
std::string report_table(const PQReport& r, bool counts);

/// Short column names; CoNIC order when there are six classes.
std::vector<std::string> class_names(int n_classes);

}  // namespace starseg
