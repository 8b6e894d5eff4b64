#pragma once

#include "fgpan/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fgpan {

/// Patch position in grid units (patch indices, not pixels).
struct GridCoord {
    int row = 0;
    int col = 0;

    friend bool operator==(const GridCoord&, const GridCoord&) = default;
    friend auto operator<=>(const GridCoord&, const GridCoord&) = default;
};

struct PatchEmbedding {
    GridCoord coord;
    Vector vector;

    friend bool operator==(const PatchEmbedding& a, const PatchEmbedding& b) {
        return a.coord == b.coord && a.vector.size() == b.vector.size() && a.vector == b.vector;
    }
};

/// One slide: its selected patches in file order plus an optional class label.
struct SlideRecord {
    std::string slide_id;
    std::optional<int> label;
    int dim = 0;
    int grid_rows = 0;
    int grid_cols = 0;
    std::vector<PatchEmbedding> patches;

    std::size_t size() const noexcept { return patches.size(); }

    /// Patch embeddings stacked as an M x d matrix.
    Matrix feature_matrix() const;

    friend bool operator==(const SlideRecord&, const SlideRecord&) = default;
};

/// Throws std::invalid_argument if the record breaks any SlideRecord invariant.
void validate(const SlideRecord& slide);

struct ClassPrototype {
    int class_id = 0;
    std::string name;
    std::string description;
    Vector embedding;

    friend bool operator==(const ClassPrototype& a, const ClassPrototype& b) {
        return a.class_id == b.class_id && a.name == b.name && a.description == b.description &&
               a.embedding.size() == b.embedding.size() && a.embedding == b.embedding;
    }
};

struct PrototypeSet {
    int dim = 0;
    std::vector<ClassPrototype> prototypes;

    int num_classes() const noexcept { return static_cast<int>(prototypes.size()); }

    /// Prototype embeddings stacked as a C x d matrix.
    Matrix embedding_matrix() const;

    friend bool operator==(const PrototypeSet&, const PrototypeSet&) = default;
};

void validate(const PrototypeSet& set);

SlideRecord load_slide(const std::filesystem::path& path);
void save_slide(const SlideRecord& record, const std::filesystem::path& path);

/// Canonical text form of a slide; save_slide writes exactly these bytes.
std::string serialize_slide(const SlideRecord& record);
SlideRecord parse_slide(std::string_view text);

PrototypeSet load_prototypes(const std::filesystem::path& path);
void save_prototypes(const PrototypeSet& set, const std::filesystem::path& path);
std::string serialize_prototypes(const PrototypeSet& set);
PrototypeSet parse_prototypes(std::string_view text);

struct SyntheticConfig {
    int classes = 4;
    int slides_per_class = 10;
    int patches_per_slide = 64;
    int dim = 16;
    double signal_fraction = 0.6;
    double noise_sigma = 0.05;
    int grid_rows = 16;
    int grid_cols = 16;
    bool orthogonal_prototypes = true;
    std::uint64_t seed = 0;
    std::string id_prefix = "slide";
};

void validate(const SyntheticConfig& cfg);

struct SyntheticCorpus {
    std::vector<SlideRecord> slides;
    PrototypeSet prototypes;
    Vector background;
};

/// Planted-signal corpus: each class-c slide carries ceil(rho*M) patches near
/// T_c in one contiguous grid block, the rest near a shared background vector.
SyntheticCorpus gen_synthetic(const SyntheticConfig& cfg);

/// Name-only counterpart of a fine-grained prototype set: each class direction
/// is pushed by a unit offset of size `blur`, half shared by all classes and
/// half class-specific, so the set is both misaligned and less separated.
/// Descriptions collapse to the bare class name.
PrototypeSet make_name_only_prototypes(const PrototypeSet& fine, double blur, std::uint64_t seed);

}  // namespace fgpan
