#pragma once

#include "fgpan/aggregation.hpp"
#include "fgpan/data_model.hpp"
#include "fgpan/patch_selection.hpp"
#include "fgpan/training.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fgpan {

enum class Command { gen, train, infer, eval, gradcheck, proto_dist };

std::string_view to_string(Command command);

/// Everything one CLI invocation needs. Flags override config-file values,
/// which override these defaults.
struct RunConfig {
    Command command = Command::gradcheck;

    std::filesystem::path data_dir;
    std::filesystem::path prototype_file;
    std::filesystem::path checkpoint;
    std::filesystem::path out;
    std::filesystem::path predictions;

    int dim = 16;
    int window_size = 2;
    int heads = 2;

    SelectionStrategy selection{SelectionKind::all, 300};
    PositionalMode pos_mode = PositionalMode::sinusoidal;
    double lambda_slide = 1.0;
    bool lwa_gff = true;
    bool fine_grained_prototypes = true;
    double initial_tau = 0.07;

    std::string profile = "desk";
    TrainConfig train = desk_profile();

    // gen
    SyntheticConfig synthetic;
    double name_only_blur = 1.0;

    // gradcheck
    int gradcheck_classes = 3;
    int gradcheck_patches = 6;
    double gradcheck_step = 1e-4;
    double gradcheck_tolerance = 1e-5;

    std::uint64_t seed = 0;

    /// Resolved configuration as printed for provenance.
    std::string echo;
};

/// Parses argv (argv[0] is the program name). Throws CliError on bad input.
RunConfig parse_config(const std::vector<std::string>& args);

class CliError : public std::runtime_error {
public:
    CliError(const std::string& message, int exit_code) : std::runtime_error(message), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

/// 64-bit FNV-1a of the echoed configuration, as 16 hex digits.
std::string config_digest(const RunConfig& cfg);

/// Runs the command. Returns the process exit status.
int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// parse_config + dispatch with usage errors reported on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Slide files (*.slide) of a directory in file-name order.
std::vector<SlideRecord> load_slide_dir(const std::filesystem::path& dir);

/// One line per slide: {"slide_id":..,"predicted":..,"P":[..]}
std::string format_prediction(const std::string& slide_id, const SlidePrediction& prediction);

struct PredictionLine {
    std::string slide_id;
    int predicted = 0;
    Vector probs;
};

std::vector<PredictionLine> load_predictions(const std::filesystem::path& path);

}  // namespace fgpan
