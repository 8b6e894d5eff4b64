#pragma once

#include "fgpan/data_model.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace fgpan {

struct DescriptionTriple {
    std::string class_name;
    std::string molecular_feature;
    std::string histological_pattern;
};

/// Fills the description-generation prompt: the first [class] slot takes the
/// subtype, the second takes its family. The quoted answer format is left as is.
std::string render_prompt(std::string_view class_name, std::string_view family_name);

/// "<class> with <molecular feature> and <histological pattern>"
std::string render_description(const DescriptionTriple& triple);

/// Scales every embedding to unit L2 norm. Throws on a zero vector.
PrototypeSet normalize_prototypes(const PrototypeSet& set);

/// True when every embedding has unit norm within `tolerance`.
bool is_normalized(const PrototypeSet& set, double tolerance = 1e-9);

/// Single class embedding from several description embeddings: the normalized mean.
Vector class_embedding(const std::vector<Vector>& description_embeddings);

/// Mean Euclidean distance over all unordered class pairs of a normalized set.
double interclass_distance(const PrototypeSet& set);

}  // namespace fgpan
