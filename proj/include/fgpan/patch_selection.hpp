#pragma once

#include "fgpan/data_model.hpp"

#include <string_view>

namespace fgpan {

enum class SelectionKind { all, fps_embedding, topk_norm };

struct SelectionStrategy {
    SelectionKind kind = SelectionKind::all;
    int m_max = 300;
};

/// Accepts the CLI spellings "all", "fps" and "topk".
SelectionKind parse_selection_kind(std::string_view name);
std::string_view to_string(SelectionKind kind);

/// Keeps min(m_max, M) patches in their original order. Ties go to the lowest
/// original index.
SlideRecord select_patches(const SlideRecord& slide, const SelectionStrategy& strategy);

}  // namespace fgpan
