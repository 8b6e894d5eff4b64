#include "fgpan/prototypes.hpp"

#include <cmath>

namespace fgpan {

namespace {

constexpr std::string_view kPromptHead =
    "As a neuropathology expert, what distinctive multiscale features on whole slide images differentiate ";
constexpr std::string_view kPromptMiddle = " from other ";
constexpr std::string_view kPromptTail =
    " per WHO CNS5 criteria? Generate discriminative attribute pairs combining molecular profiles and "
    "histopathological signatures using the format: '[class] with [molecular feature] and [histological pattern]'.";

}  // namespace

std::string render_prompt(std::string_view class_name, std::string_view family_name) {
    if (class_name.empty() || family_name.empty()) {
        throw std::invalid_argument("render_prompt: class and family names must be non-empty");
    }
    std::string out;
    out.reserve(kPromptHead.size() + class_name.size() + kPromptMiddle.size() + family_name.size() +
                kPromptTail.size());
    out.append(kPromptHead).append(class_name).append(kPromptMiddle).append(family_name).append(kPromptTail);
    return out;
}

std::string render_description(const DescriptionTriple& triple) {
    if (triple.class_name.empty() || triple.molecular_feature.empty() || triple.histological_pattern.empty()) {
        throw std::invalid_argument("render_description: all three fields must be non-empty");
    }
    return triple.class_name + " with " + triple.molecular_feature + " and " + triple.histological_pattern;
}

PrototypeSet normalize_prototypes(const PrototypeSet& set) {
    validate(set);
    PrototypeSet out = set;
    for (auto& p : out.prototypes) {
        const double n = p.embedding.norm();
        if (n == 0.0) {
            throw std::invalid_argument("prototype '" + p.name + "' has a zero embedding");
        }
        p.embedding /= n;
    }
    return out;
}

bool is_normalized(const PrototypeSet& set, double tolerance) {
    for (const auto& p : set.prototypes) {
        if (std::abs(p.embedding.norm() - 1.0) > tolerance) {
            return false;
        }
    }
    return true;
}

Vector class_embedding(const std::vector<Vector>& description_embeddings) {
    if (description_embeddings.empty()) {
        throw std::invalid_argument("class_embedding: no description embeddings");
    }
    Vector mean = Vector::Zero(description_embeddings.front().size());
    for (const auto& e : description_embeddings) {
        if (e.size() != mean.size()) {
            throw DimensionError("class_embedding: ragged description embeddings");
        }
        mean += e.normalized();
    }
    const double n = mean.norm();
    if (n == 0.0) {
        throw std::invalid_argument("class_embedding: description embeddings cancel out");
    }
    return mean / n;
}

double interclass_distance(const PrototypeSet& set) {
    validate(set);
    const int c = set.num_classes();
    if (c < 2) {
        throw std::invalid_argument("interclass_distance needs at least two classes");
    }
    if (!is_normalized(set)) {
        throw std::invalid_argument("interclass_distance expects normalized prototypes");
    }
    double total = 0.0;
    long pairs = 0;
    for (int a = 0; a < c; ++a) {
        for (int b = a + 1; b < c; ++b) {
            total += (set.prototypes[static_cast<std::size_t>(a)].embedding -
                      set.prototypes[static_cast<std::size_t>(b)].embedding)
                         .norm();
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

}  // namespace fgpan
