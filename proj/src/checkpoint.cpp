#include "fgpan/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace fgpan {

std::string serialize_checkpoint(const ModelParams& params) {
    validate(params);
    nlohmann::ordered_json header;
    header["format"] = "fgpan-checkpoint";
    header["version"] = kCheckpointVersion;
    header["d"] = params.dim();
    header["S"] = params.window_size();
    header["L"] = params.heads();
    header["pos_mode"] = std::string(to_string(params.agg.mode));
    header["grid_rows"] = params.agg.grid_rows;
    header["grid_cols"] = params.agg.grid_cols;

    std::string out = header.dump() + "\n";
    for_each_leaf(params, [&](const std::string& name, std::span<const double> values, bool) {
        out += name;
        out += ' ';
        out += std::to_string(values.size());
        for (double v : values) {
            out += ' ';
            out += format_double(v);
        }
        out += '\n';
    });
    return out;
}

ModelParams parse_checkpoint(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("empty checkpoint");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
        if (header.at("format").get<std::string>() != "fgpan-checkpoint") {
            throw FormatError("not an fgpan checkpoint");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint header: ") + e.what());
    }

    ModelShape shape;
    int version = 0;
    try {
        version = header.at("version").get<int>();
        shape.dim = header.at("d").get<int>();
        shape.window_size = header.at("S").get<int>();
        shape.heads = header.at("L").get<int>();
        shape.pos_mode = parse_positional_mode(header.at("pos_mode").get<std::string>());
        shape.grid_rows = header.at("grid_rows").get<int>();
        shape.grid_cols = header.at("grid_cols").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint header: ") + e.what());
    }
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }

    ModelParams params = init_params(shape, 0);
    for_each_leaf(params, [&](const std::string& name, std::span<double> values, bool) {
        std::string row;
        if (!std::getline(in, row)) {
            throw FormatError("checkpoint ends before leaf '" + name + "'");
        }
        std::istringstream tokens(row);
        std::string got_name;
        std::size_t count = 0;
        tokens >> got_name >> count;
        if (got_name != name) {
            throw FormatError("checkpoint leaf '" + got_name + "' where '" + name + "' was expected");
        }
        if (count != values.size()) {
            throw DimensionError("checkpoint leaf '" + name + "' holds " + std::to_string(count) +
                                 " values, expected " + std::to_string(values.size()));
        }
        std::string token;
        for (double& v : values) {
            if (!(tokens >> token)) {
                throw FormatError("checkpoint leaf '" + name + "' is truncated");
            }
            v = parse_double(token);
        }
        if (tokens >> token) {
            throw FormatError("checkpoint leaf '" + name + "' has trailing values");
        }
    });
    if (std::getline(in, line) && !line.empty()) {
        throw FormatError("checkpoint has unexpected trailing content");
    }
    validate(params);
    return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
    }
    out << bytes;
}

ModelParams load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    ModelParams params = parse_checkpoint(buf.str());
    if (expected_dim && params.dim() != *expected_dim) {
        throw DimensionError("checkpoint has d=" + std::to_string(params.dim()) + ", run expects d=" +
                             std::to_string(*expected_dim));
    }
    return params;
}

}  // namespace fgpan
