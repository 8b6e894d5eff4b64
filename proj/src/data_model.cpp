#include "fgpan/data_model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace fgpan {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write failed for '" + path.string() + "'");
    }
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

std::vector<std::string_view> split_tokens(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') {
            ++j;
        }
        if (j > i) {
            tokens.push_back(line.substr(i, j - i));
        }
        i = j;
    }
    return tokens;
}

int parse_int(std::string_view token) {
    const double v = parse_double(token);
    if (v != std::floor(v) || std::abs(v) > 1e9) {
        throw FormatError("not an integer: '" + std::string(token) + "'");
    }
    return static_cast<int>(v);
}

template <typename T>
T required(const ordered_json& obj, const char* key) {
    if (!obj.contains(key)) {
        throw FormatError(std::string("missing header field '") + key + "'");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad header field '") + key + "': " + e.what());
    }
}

Vector standard_normal(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = normal(rng);
    }
    return v;
}

}  // namespace

Matrix SlideRecord::feature_matrix() const {
    Matrix f(static_cast<Eigen::Index>(patches.size()), dim);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        f.row(static_cast<Eigen::Index>(i)) = patches[i].vector.transpose();
    }
    return f;
}

void validate(const SlideRecord& slide) {
    if (slide.dim < 1) {
        throw std::invalid_argument("slide '" + slide.slide_id + "': dimension must be positive");
    }
    if (slide.patches.empty()) {
        throw std::invalid_argument("slide '" + slide.slide_id + "': no patches");
    }
    if (slide.label && *slide.label < 0) {
        throw std::invalid_argument("slide '" + slide.slide_id + "': negative label");
    }
    std::set<GridCoord> seen;
    for (const auto& p : slide.patches) {
        if (p.vector.size() != slide.dim) {
            throw DimensionError("slide '" + slide.slide_id + "': patch vector length " +
                                 std::to_string(p.vector.size()) + " != d=" + std::to_string(slide.dim));
        }
        if (!p.vector.allFinite()) {
            throw std::invalid_argument("slide '" + slide.slide_id + "': non-finite embedding value");
        }
        if (p.coord.row < 0 || p.coord.col < 0) {
            throw std::invalid_argument("slide '" + slide.slide_id + "': negative coordinate");
        }
        if (!seen.insert(p.coord).second) {
            throw std::invalid_argument("slide '" + slide.slide_id + "': duplicate coordinate (" +
                                        std::to_string(p.coord.row) + ", " + std::to_string(p.coord.col) + ")");
        }
    }
}

std::string serialize_slide(const SlideRecord& record) {
    validate(record);
    ordered_json header;
    header["slide_id"] = record.slide_id;
    header["label"] = record.label ? ordered_json(*record.label) : ordered_json(nullptr);
    header["d"] = record.dim;
    header["M"] = record.patches.size();
    header["grid_rows"] = record.grid_rows;
    header["grid_cols"] = record.grid_cols;

    std::string out = header.dump();
    out += '\n';
    for (const auto& p : record.patches) {
        out += std::to_string(p.coord.row);
        out += ' ';
        out += std::to_string(p.coord.col);
        for (Eigen::Index j = 0; j < p.vector.size(); ++j) {
            out += ' ';
            out += format_double(p.vector[j]);
        }
        out += '\n';
    }
    return out;
}

SlideRecord parse_slide(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) {
        throw FormatError("empty slide file");
    }
    ordered_json header;
    try {
        header = ordered_json::parse(lines[0]);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed slide header: ") + e.what());
    }
    if (!header.is_object()) {
        throw FormatError("malformed slide header: not an object");
    }

    SlideRecord record;
    record.slide_id = required<std::string>(header, "slide_id");
    if (!header.contains("label")) {
        throw FormatError("missing header field 'label'");
    }
    if (!header["label"].is_null()) {
        record.label = required<int>(header, "label");
    }
    record.dim = required<int>(header, "d");
    const int m = required<int>(header, "M");
    record.grid_rows = required<int>(header, "grid_rows");
    record.grid_cols = required<int>(header, "grid_cols");
    if (record.dim < 1 || m < 1) {
        throw FormatError("slide header: d and M must be positive");
    }

    std::vector<std::string_view> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (split_tokens(lines[i]).empty()) {
            continue;
        }
        rows.push_back(lines[i]);
    }
    if (static_cast<int>(rows.size()) != m) {
        throw FormatError("slide header declares M=" + std::to_string(m) + " but file has " +
                          std::to_string(rows.size()) + " patch rows");
    }

    record.patches.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto tokens = split_tokens(rows[i]);
        if (static_cast<int>(tokens.size()) != record.dim + 2) {
            throw DimensionError("patch row " + std::to_string(i) + " has " +
                                 std::to_string(static_cast<int>(tokens.size()) - 2) + " values, header declares d=" +
                                 std::to_string(record.dim));
        }
        PatchEmbedding p;
        p.coord = {parse_int(tokens[0]), parse_int(tokens[1])};
        p.vector.resize(record.dim);
        for (int j = 0; j < record.dim; ++j) {
            p.vector[j] = parse_double(tokens[static_cast<std::size_t>(j) + 2]);
        }
        record.patches.push_back(std::move(p));
    }
    validate(record);
    return record;
}

SlideRecord load_slide(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("slide file not found: '" + path.string() + "'");
    }
    try {
        return parse_slide(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_slide(const SlideRecord& record, const std::filesystem::path& path) {
    write_file(path, serialize_slide(record));
}

Matrix PrototypeSet::embedding_matrix() const {
    Matrix t(static_cast<Eigen::Index>(prototypes.size()), dim);
    for (std::size_t c = 0; c < prototypes.size(); ++c) {
        t.row(static_cast<Eigen::Index>(c)) = prototypes[c].embedding.transpose();
    }
    return t;
}

void validate(const PrototypeSet& set) {
    if (set.prototypes.empty()) {
        throw std::invalid_argument("prototype set is empty");
    }
    for (std::size_t c = 0; c < set.prototypes.size(); ++c) {
        const auto& p = set.prototypes[c];
        if (p.class_id != static_cast<int>(c)) {
            throw std::invalid_argument("prototype class ids must be 0..C-1 in order");
        }
        if (p.embedding.size() != set.dim) {
            throw DimensionError("prototype '" + p.name + "' has length " + std::to_string(p.embedding.size()) +
                                 ", set dimension is " + std::to_string(set.dim));
        }
        if (!p.embedding.allFinite()) {
            throw std::invalid_argument("prototype '" + p.name + "' has non-finite values");
        }
    }
}

std::string serialize_prototypes(const PrototypeSet& set) {
    validate(set);
    std::string out;
    for (const auto& p : set.prototypes) {
        // Embedding values go through format_double so both file formats share
        // one canonical number spelling.
        std::string line = "{\"class_id\":" + std::to_string(p.class_id);
        line += ",\"name\":" + ordered_json(p.name).dump();
        line += ",\"description\":" + ordered_json(p.description).dump();
        line += ",\"embedding\":[";
        for (Eigen::Index j = 0; j < p.embedding.size(); ++j) {
            if (j > 0) {
                line += ',';
            }
            line += format_double(p.embedding[j]);
        }
        line += "]}\n";
        out += line;
    }
    return out;
}

PrototypeSet parse_prototypes(std::string_view text) {
    PrototypeSet set;
    std::set<int> ids;
    int line_no = 0;
    for (auto line : split_lines(text)) {
        ++line_no;
        if (split_tokens(line).empty()) {
            continue;
        }
        ordered_json obj;
        try {
            obj = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("prototype line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object()) {
            throw FormatError("prototype line " + std::to_string(line_no) + ": not an object");
        }
        const int class_id = required<int>(obj, "class_id");
        if (!ids.insert(class_id).second) {
            throw FormatError("duplicate class_id " + std::to_string(class_id));
        }
        const auto values = required<std::vector<double>>(obj, "embedding");
        if (set.prototypes.empty()) {
            set.dim = static_cast<int>(values.size());
        } else if (static_cast<int>(values.size()) != set.dim) {
            throw DimensionError("ragged prototype embeddings: line " + std::to_string(line_no) + " has " +
                                 std::to_string(values.size()) + " values, expected " + std::to_string(set.dim));
        }
        ClassPrototype p;
        p.class_id = static_cast<int>(set.prototypes.size());
        p.name = required<std::string>(obj, "name");
        p.description = required<std::string>(obj, "description");
        p.embedding = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
        set.prototypes.push_back(std::move(p));
    }
    if (set.prototypes.empty()) {
        throw FormatError("prototype file holds no classes");
    }
    if (set.dim < 1) {
        throw FormatError("prototype embeddings are empty");
    }
    validate(set);
    return set;
}

PrototypeSet load_prototypes(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("prototype file not found: '" + path.string() + "'");
    }
    try {
        return parse_prototypes(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_prototypes(const PrototypeSet& set, const std::filesystem::path& path) {
    write_file(path, serialize_prototypes(set));
}

void validate(const SyntheticConfig& cfg) {
    if (cfg.classes < 1 || cfg.slides_per_class < 1 || cfg.patches_per_slide < 1 || cfg.dim < 1) {
        throw std::invalid_argument("synthetic config: counts and dimension must be positive");
    }
    if (!(cfg.signal_fraction > 0.0 && cfg.signal_fraction <= 1.0)) {
        throw std::invalid_argument("synthetic config: signal_fraction must lie in (0, 1]");
    }
    if (!(cfg.noise_sigma >= 0.0) || !std::isfinite(cfg.noise_sigma)) {
        throw std::invalid_argument("synthetic config: noise_sigma must be >= 0");
    }
    if (cfg.grid_rows < 1 || cfg.grid_cols < 1) {
        throw std::invalid_argument("synthetic config: grid must be non-empty");
    }
    if (static_cast<long>(cfg.patches_per_slide) > static_cast<long>(cfg.grid_rows) * cfg.grid_cols) {
        throw std::invalid_argument("synthetic config: M exceeds grid_rows * grid_cols");
    }
    if (cfg.orthogonal_prototypes && cfg.dim < cfg.classes) {
        throw std::invalid_argument("synthetic config: orthogonal prototypes need d >= C");
    }
}

SyntheticCorpus gen_synthetic(const SyntheticConfig& cfg) {
    validate(cfg);
    std::mt19937_64 rng(cfg.seed);
    const int d = cfg.dim;

    // Class directions, then the background direction. Gram-Schmidt against
    // everything drawn before whenever the space still has room.
    std::vector<Vector> basis;
    auto draw_direction = [&](bool orthogonalize) {
        Vector v = standard_normal(d, rng);
        if (orthogonalize) {
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& b : basis) {
                    v -= v.dot(b) * b;
                }
            }
        }
        v.normalize();
        basis.push_back(v);
        return v;
    };

    SyntheticCorpus corpus;
    corpus.prototypes.dim = d;
    for (int c = 0; c < cfg.classes; ++c) {
        ClassPrototype p;
        p.class_id = c;
        p.name = "class_" + std::to_string(c);
        p.description = p.name + " with marker_" + std::to_string(c) + " and pattern_" + std::to_string(c);
        p.embedding = draw_direction(cfg.orthogonal_prototypes);
        corpus.prototypes.prototypes.push_back(std::move(p));
    }
    corpus.background = draw_direction(cfg.orthogonal_prototypes && d > cfg.classes);

    const int m = cfg.patches_per_slide;
    const int n_signal = static_cast<int>(std::ceil(cfg.signal_fraction * m - 1e-12));
    const int block_cols = std::min(cfg.grid_cols, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_signal)))));
    const int block_rows = (n_signal + block_cols - 1) / block_cols;
    if (block_rows > cfg.grid_rows) {
        throw std::invalid_argument("synthetic config: signal block does not fit in the grid");
    }

    auto noisy_unit = [&](const Vector& center) {
        if (cfg.noise_sigma == 0.0) {
            return center;
        }
        Vector v = center + cfg.noise_sigma * standard_normal(d, rng);
        const double n = v.norm();
        return n > 0.0 ? Vector(v / n) : center;
    };

    int index = 0;
    for (int c = 0; c < cfg.classes; ++c) {
        for (int s = 0; s < cfg.slides_per_class; ++s, ++index) {
            SlideRecord slide;
            std::ostringstream id;
            id << cfg.id_prefix << '_' << std::setw(4) << std::setfill('0') << index;
            slide.slide_id = id.str();
            slide.label = c;
            slide.dim = d;
            slide.grid_rows = cfg.grid_rows;
            slide.grid_cols = cfg.grid_cols;

            std::uniform_int_distribution<int> top_dist(0, cfg.grid_rows - block_rows);
            std::uniform_int_distribution<int> left_dist(0, cfg.grid_cols - block_cols);
            const int top = top_dist(rng);
            const int left = left_dist(rng);

            std::vector<char> used(static_cast<std::size_t>(cfg.grid_rows) * cfg.grid_cols, 0);
            std::vector<std::pair<GridCoord, bool>> cells;
            for (int k = 0; k < n_signal; ++k) {
                GridCoord g{top + k / block_cols, left + k % block_cols};
                used[static_cast<std::size_t>(g.row) * cfg.grid_cols + g.col] = 1;
                cells.emplace_back(g, true);
            }
            std::vector<int> free_cells;
            for (int i = 0; i < cfg.grid_rows * cfg.grid_cols; ++i) {
                if (!used[static_cast<std::size_t>(i)]) {
                    free_cells.push_back(i);
                }
            }
            // Partial Fisher-Yates driven by the corpus generator.
            for (int k = 0; k < m - n_signal; ++k) {
                std::uniform_int_distribution<int> pick(k, static_cast<int>(free_cells.size()) - 1);
                std::swap(free_cells[static_cast<std::size_t>(k)], free_cells[static_cast<std::size_t>(pick(rng))]);
                const int cell = free_cells[static_cast<std::size_t>(k)];
                cells.emplace_back(GridCoord{cell / cfg.grid_cols, cell % cfg.grid_cols}, false);
            }
            std::sort(cells.begin(), cells.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            const Vector& center = corpus.prototypes.prototypes[static_cast<std::size_t>(c)].embedding;
            for (const auto& [coord, is_signal] : cells) {
                slide.patches.push_back({coord, noisy_unit(is_signal ? center : corpus.background)});
            }
            corpus.slides.push_back(std::move(slide));
        }
    }
    return corpus;
}

PrototypeSet make_name_only_prototypes(const PrototypeSet& fine, double blur, std::uint64_t seed) {
    validate(fine);
    if (!(blur >= 0.0)) {
        throw std::invalid_argument("name-only blur must be >= 0");
    }
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const Vector shared = standard_normal(fine.dim, rng).normalized();
    PrototypeSet coarse;
    coarse.dim = fine.dim;
    for (const auto& p : fine.prototypes) {
        Vector offset = shared + standard_normal(fine.dim, rng).normalized();
        offset.normalize();
        Vector e = p.embedding.normalized() + blur * offset;
        ClassPrototype q;
        q.class_id = p.class_id;
        q.name = p.name;
        q.description = p.name;
        q.embedding = e.normalized();
        coarse.prototypes.push_back(std::move(q));
    }
    return coarse;
}

}  // namespace fgpan
