#pragma once

#include "fgpan/model.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace fgpan {

inline constexpr int kCheckpointVersion = 1;

/// Text checkpoint: a JSON header line with format version and model dims,
/// then one line per parameter leaf: `<name> <count> <v1> ... <vn>`.
std::string serialize_checkpoint(const ModelParams& params);
ModelParams parse_checkpoint(std::string_view text);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);

/// When `expected_dim` is set, a checkpoint of another width is rejected.
ModelParams load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_dim = std::nullopt);

}  // namespace fgpan
