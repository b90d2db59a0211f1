#include "starseg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "starseg/error.hpp"

namespace starseg {

namespace {

void check_same_dims(const InstanceMap& a, const InstanceMap& b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw Error(Errc::DimensionMismatch, std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                                                 std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
}

// Mean of the defined per-image qualities.
std::optional<Quality> average(const std::vector<Quality>& qs) {
    if (qs.empty()) return std::nullopt;
    Quality m;
    for (const auto& q : qs) {
        m.dq += q.dq;
        m.sq += q.sq;
        m.pq += q.pq;
    }
    const auto n = static_cast<double>(qs.size());
    return Quality{m.dq / n, m.sq / n, m.pq / n};
}

}  // namespace

Quality dq_sq_pq(const ClassStats& s) {
    Quality q;
    const double denom = static_cast<double>(s.tp) + 0.5 * static_cast<double>(s.fp) + 0.5 * static_cast<double>(s.fn);
    if (denom > 0.0) q.dq = static_cast<double>(s.tp) / denom;
    if (s.tp > 0) q.sq = s.sum_iou / static_cast<double>(s.tp);
    q.pq = q.dq * q.sq;
    return q;
}

ClassStats match_instances(const InstanceMap& gt, const InstanceMap& pred) {
    check_same_dims(gt, pred);
    std::map<std::int32_t, std::size_t> gt_area, pred_area;
    std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> overlap;
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const auto g = gt.data[i], p = pred.data[i];
        if (g > 0) ++gt_area[g];
        if (p > 0) ++pred_area[p];
        if (g > 0 && p > 0) ++overlap[{g, p}];
    }

    ClassStats s;
    std::set<std::int32_t> gt_matched, pred_matched;
    for (const auto& [key, inter] : overlap) {
        const auto uni = gt_area[key.first] + pred_area[key.second] - inter;
        const double iou = static_cast<double>(inter) / static_cast<double>(uni);
        if (iou > 0.5) {
            // IoU > 0.5 makes matching unique; a violation is a bug, not bad data.
            if (!gt_matched.insert(key.first).second || !pred_matched.insert(key.second).second) {
                throw std::logic_error("IoU > 0.5 matching produced a non-unique pair");
            }
            ++s.tp;
            s.sum_iou += iou;
        }
    }
    s.fn = gt_area.size() - s.tp;
    s.fp = pred_area.size() - s.tp;
    return s;
}

InstanceMap restrict_to_class(const LabelImage& label, int cls) {
    InstanceMap out = label.instance_map;
    for (auto& id : out.data) {
        if (id == 0) continue;
        const auto it = label.classes.find(id);
        if (it == label.classes.end() || it->second != cls) id = 0;
    }
    return out;
}

ImageStats image_stats(const LabelImage& gt, const LabelImage& pred, int n_classes) {
    check_same_dims(gt.instance_map, pred.instance_map);
    ImageStats s;
    s.per_class.resize(static_cast<std::size_t>(n_classes));
    for (int t = 1; t <= n_classes; ++t) {
        s.per_class[t - 1] = match_instances(restrict_to_class(gt, t), restrict_to_class(pred, t));
    }
    s.overall = match_instances(gt.instance_map, pred.instance_map);
    return s;
}

PQReport evaluate(const std::vector<LabelImage>& gt, const std::vector<LabelImage>& pred, int n_classes, Exec exec) {
    if (gt.size() != pred.size()) {
        throw Error(Errc::LengthMismatch, std::to_string(gt.size()) + " ground-truth images vs " +
                                              std::to_string(pred.size()) + " predictions");
    }
    if (n_classes < 1) throw Error(Errc::InvalidArgument, "need at least one class");
    for (std::size_t i = 0; i < gt.size(); ++i) check_same_dims(gt[i].instance_map, pred[i].instance_map);

    const auto T = static_cast<std::size_t>(n_classes);
    PQReport r;
    r.n_classes = n_classes;
    r.per_image.resize(gt.size());
    for_each_index(exec, gt.size(), [&](std::size_t i) { r.per_image[i] = image_stats(gt[i], pred[i], n_classes); });

    r.per_class.assign(T, {});
    r.gt_counts.assign(T, 0);
    r.pred_counts.assign(T, 0);
    std::vector<std::vector<Quality>> class_q(T);
    std::vector<Quality> overall_q;
    double image_first_sum = 0.0;
    std::size_t image_first_n = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const auto& img = r.per_image[i];
        double mpq_sum = 0.0;
        std::size_t defined = 0;
        for (std::size_t t = 0; t < T; ++t) {
            const auto& s = img.per_class[t];
            r.per_class[t] += s;
            if (s.empty()) continue;
            const auto q = dq_sq_pq(s);
            class_q[t].push_back(q);
            mpq_sum += q.pq;
            ++defined;
        }
        if (defined > 0) {
            image_first_sum += mpq_sum / static_cast<double>(defined);
            ++image_first_n;
        }
        r.overall += img.overall;
        if (!img.overall.empty()) overall_q.push_back(dq_sq_pq(img.overall));

        const auto g = class_counts(gt[i].classes, n_classes);
        const auto p = class_counts(pred[i].classes, n_classes);
        for (std::size_t t = 0; t < T; ++t) {
            r.gt_counts[t] += g[t];
            r.pred_counts[t] += p[t];
        }
    }

    r.per_class_plus.resize(T);
    r.per_class_mean.resize(T);
    double mpq_sum = 0.0;
    std::size_t mpq_n = 0;
    for (std::size_t t = 0; t < T; ++t) {
        r.per_class_plus[t] = dq_sq_pq(r.per_class[t]);
        r.mpq_plus += r.per_class_plus[t].pq;
        r.per_class_mean[t] = average(class_q[t]);
        if (r.per_class_mean[t]) {
            mpq_sum += r.per_class_mean[t]->pq;
            ++mpq_n;
        }
    }
    r.mpq_plus /= static_cast<double>(T);
    r.mpq = mpq_n ? mpq_sum / static_cast<double>(mpq_n) : 0.0;
    r.overall_plus = dq_sq_pq(r.overall);
    r.overall_mean = average(overall_q).value_or(Quality{});
    r.mpq_image_first = image_first_n ? image_first_sum / static_cast<double>(image_first_n) : 0.0;
    return r;
}

double round4(double x) { return std::round(x * 1e4) / 1e4; }

std::vector<std::string> class_names(int n_classes) {
    if (n_classes == 6) return {"neu", "epi", "lym", "pla", "eos", "con"};
    std::vector<std::string> out;
    for (int t = 1; t <= n_classes; ++t) out.push_back("c" + std::to_string(t));
    return out;
}

std::string report_json(const PQReport& r, const std::vector<std::string>& names, bool counts) {
    using nlohmann::ordered_json;
    auto quality = [](const Quality& q) {
        return ordered_json{{"dq", round4(q.dq)}, {"sq", round4(q.sq)}, {"pq", round4(q.pq)}};
    };
    auto stats = [](const ClassStats& s) {
        return ordered_json{{"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}, {"sum_iou", round4(s.sum_iou)}};
    };
    const auto cls = class_names(r.n_classes);

    ordered_json j;
    j["mpq_plus"] = round4(r.mpq_plus);
    j["pq"] = round4(r.overall_mean.pq);
    j["pq_plus"] = round4(r.overall_plus.pq);
    j["mpq"] = round4(r.mpq);
    j["mpq_image_first"] = round4(r.mpq_image_first);
    j["dq"] = round4(r.overall_mean.dq);
    j["sq"] = round4(r.overall_mean.sq);
    j["dq_plus"] = round4(r.overall_plus.dq);
    j["sq_plus"] = round4(r.overall_plus.sq);

    ordered_json per_class = ordered_json::array();
    for (std::size_t t = 0; t < r.per_class.size(); ++t) {
        ordered_json c;
        c["class"] = t + 1;
        c["name"] = cls[t];
        c["stats"] = stats(r.per_class[t]);
        c["plus"] = quality(r.per_class_plus[t]);
        c["mean"] = r.per_class_mean[t] ? quality(*r.per_class_mean[t]) : ordered_json(nullptr);
        if (counts) {
            c["gt_count"] = r.gt_counts[t];
            c["pred_count"] = r.pred_counts[t];
        }
        per_class.push_back(std::move(c));
    }
    j["per_class"] = std::move(per_class);

    ordered_json images = ordered_json::array();
    for (std::size_t i = 0; i < r.per_image.size(); ++i) {
        const auto& img = r.per_image[i];
        ordered_json e;
        e["name"] = i < names.size() ? names[i] : std::to_string(i);
        e["overall"] = stats(img.overall);
        e["pq"] = img.overall.empty() ? ordered_json(nullptr) : ordered_json(round4(dq_sq_pq(img.overall).pq));
        ordered_json pc = ordered_json::array();
        for (const auto& s : img.per_class) {
            auto c = stats(s);
            c["pq"] = s.empty() ? ordered_json(nullptr) : ordered_json(round4(dq_sq_pq(s).pq));
            pc.push_back(std::move(c));
        }
        e["per_class"] = std::move(pc);
        images.push_back(std::move(e));
    }
    j["per_image"] = std::move(images);
    return j.dump(2) + "\n";
}

std::string report_table(const PQReport& r, bool counts) {
    const auto cls = class_names(r.n_classes);
    std::ostringstream os;
    char buf[64];
    os << "    mPQ+       PQ      PQ+";
    for (const auto& c : cls) {
        std::snprintf(buf, sizeof buf, " %8s", ("PQ+_" + c).c_str());
        os << buf;
    }
    os << '\n';
    std::snprintf(buf, sizeof buf, "%8.4f %8.4f %8.4f", r.mpq_plus, r.overall_mean.pq, r.overall_plus.pq);
    os << buf;
    for (const auto& q : r.per_class_plus) {
        std::snprintf(buf, sizeof buf, " %8.4f", q.pq);
        os << buf;
    }
    os << '\n';
    if (counts) {
        os << "counts  ";
        for (const auto& c : cls) {
            std::snprintf(buf, sizeof buf, " %8s", c.c_str());
            os << buf;
        }
        os << "\n  gt    ";
        for (auto n : r.gt_counts) {
            std::snprintf(buf, sizeof buf, " %8zu", n);
            os << buf;
        }
        os << "\n  pred  ";
        for (auto n : r.pred_counts) {
            std::snprintf(buf, sizeof buf, " %8zu", n);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace starseg
