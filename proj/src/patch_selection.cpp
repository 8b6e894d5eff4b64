#include "fgpan/patch_selection.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace fgpan {

SelectionKind parse_selection_kind(std::string_view name) {
    if (name == "all") return SelectionKind::all;
    if (name == "fps") return SelectionKind::fps_embedding;
    if (name == "topk") return SelectionKind::topk_norm;
    throw std::invalid_argument("unknown selection strategy '" + std::string(name) +
                                "' (valid: all, fps, topk)");
}

std::string_view to_string(SelectionKind kind) {
    switch (kind) {
        case SelectionKind::all: return "all";
        case SelectionKind::fps_embedding: return "fps";
        case SelectionKind::topk_norm: return "topk";
    }
    return "all";
}

namespace {

std::vector<std::size_t> farthest_point_order(const SlideRecord& slide, std::size_t count) {
    const std::size_t m = slide.size();
    Vector centroid = Vector::Zero(slide.dim);
    for (const auto& p : slide.patches) {
        centroid += p.vector;
    }
    centroid /= static_cast<double>(m);

    // Strict '>' keeps the lowest index on ties.
    std::size_t seed = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double dist = (slide.patches[i].vector - centroid).squaredNorm();
        if (dist > best) {
            best = dist;
            seed = i;
        }
    }

    std::vector<std::size_t> chosen{seed};
    std::vector<char> taken(m, 0);
    taken[seed] = 1;
    std::vector<double> nearest(m, std::numeric_limits<double>::infinity());
    while (chosen.size() < count) {
        const auto& last = slide.patches[chosen.back()].vector;
        std::size_t next = m;
        double far = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (taken[i]) continue;
            nearest[i] = std::min(nearest[i], (slide.patches[i].vector - last).squaredNorm());
            if (nearest[i] > far) {
                far = nearest[i];
                next = i;
            }
        }
        taken[next] = 1;
        chosen.push_back(next);
    }
    return chosen;
}

std::vector<std::size_t> largest_norm_order(const SlideRecord& slide, std::size_t count) {
    std::vector<std::size_t> idx(slide.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return slide.patches[a].vector.squaredNorm() > slide.patches[b].vector.squaredNorm();
    });
    idx.resize(count);
    return idx;
}

}  // namespace

SlideRecord select_patches(const SlideRecord& slide, const SelectionStrategy& strategy) {
    if (slide.patches.empty()) {
        throw std::invalid_argument("select_patches: slide '" + slide.slide_id + "' is empty");
    }
    if (strategy.m_max < 1) {
        throw std::invalid_argument("select_patches: m_max must be >= 1");
    }
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(strategy.m_max), slide.size());
    if (count == slide.size()) {
        return slide;
    }

    std::vector<std::size_t> keep;
    switch (strategy.kind) {
        case SelectionKind::all:
            keep.resize(count);
            std::iota(keep.begin(), keep.end(), 0);
            break;
        case SelectionKind::fps_embedding:
            keep = farthest_point_order(slide, count);
            break;
        case SelectionKind::topk_norm:
            keep = largest_norm_order(slide, count);
            break;
    }
    std::sort(keep.begin(), keep.end());

    SlideRecord out = slide;
    out.patches.clear();
    for (std::size_t i : keep) {
        out.patches.push_back(slide.patches[i]);
    }
    return out;
}

}  // namespace fgpan
