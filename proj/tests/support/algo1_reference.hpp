#pragma once

// Literal loop-by-loop reimplementation of the annotation-generation
// procedure, used as an exact oracle against the production transfer +
// aggregate + plausibility path. Deliberately naive and independent.

#include <vector>

#include "relabel/calibration.hpp"
#include "relabel/matrix.hpp"
#include "relabel/reliability.hpp"
#include "relabel/schema.hpp"

namespace test_support {

struct Algo1Source {
    relabel::AnnotationMatrix p;  // predictions
    relabel::Matrix r;            // reliabilities
    std::vector<bool> retained;   // per attribute
    std::vector<double> thr;      // per attribute, valid when retained
    // acc(r): support points ascending; lookup clamps like the production map
    std::vector<std::vector<relabel::AccMapPoint>> acc_map;
};

inline double algo1_map_back(const Algo1Source& src, std::size_t a, double r) {
    const auto& map = src.acc_map[a];
    for (const auto& point : map)
        if (point.reliability >= r) return point.accuracy;
    return map.back().accuracy;
}

inline relabel::AnnotationMatrix algo1_reference(const std::vector<Algo1Source>& sources,
                                                 const relabel::AttributeSchema& schema,
                                                 bool row_scope_repair = false) {
    const std::size_t num_attrs = schema.size();
    const std::size_t n = sources.front().p.rows;

    // transfer per attribute and source
    std::vector<relabel::AnnotationMatrix> l_source;
    for (const Algo1Source& src : sources) {
        relabel::AnnotationMatrix l(n, num_attrs);
        for (std::size_t a = 0; a < num_attrs; ++a)
            for (std::size_t i = 0; i < n; ++i) {
                if (!src.retained[a]) {
                    l.set(i, a, 0);
                } else if (src.r.at(i, a) < src.thr[a]) {
                    l.set(i, a, 0);  // below threshold: undefined
                } else {
                    l.set(i, a, src.p.at(i, a));
                }
            }
        l_source.push_back(std::move(l));
    }

    // highest map-back performance wins each cell
    relabel::AnnotationMatrix l_target(n, num_attrs);
    for (std::size_t a = 0; a < num_attrs; ++a) {
        for (std::size_t i = 0; i < n; ++i) {
            int best_source = -1;
            double best_acc = 0.0;
            for (std::size_t s = 0; s < sources.size(); ++s) {
                if (l_source[s].at(i, a) == 0) continue;
                const double acc = algo1_map_back(sources[s], a, sources[s].r.at(i, a));
                if (best_source < 0 || acc > best_acc) {
                    best_source = static_cast<int>(s);
                    best_acc = acc;
                }
            }
            l_target.set(i, a, best_source < 0 ? 0 : l_source[best_source].at(i, a));
        }
    }

    // plausibility: at most one positive per (sample, class)
    relabel::AnnotationMatrix repaired = l_target;
    for (std::size_t i = 0; i < n; ++i) {
        bool violated = false;
        for (const auto& group : schema.class_groups()) {
            int positives = 0;
            for (std::size_t a : group)
                if (l_target.at(i, a) == 1) ++positives;
            if (positives > 1) {
                violated = true;
                if (!row_scope_repair)
                    for (std::size_t a : group) repaired.set(i, a, 0);
            }
        }
        if (row_scope_repair && violated)
            for (std::size_t a = 0; a < num_attrs; ++a) repaired.set(i, a, 0);
    }
    return repaired;
}

}  // namespace test_support
