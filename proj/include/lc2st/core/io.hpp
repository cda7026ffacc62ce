#ifndef LC2ST_CORE_IO_HPP
#define LC2ST_CORE_IO_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "lc2st/core/dataset.hpp"

namespace lc2st {

/// Shortest decimal string that parses back to exactly `value`.
inline std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

/// Strict parse of a full cell; returns false on trailing garbage or
/// non-finite values.
inline bool parse_double(std::string_view text, double& out) {
    if (text.empty()) {
        return false;
    }
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') {
        ++first;
    }
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

} // namespace detail

inline std::string dataset_header(int theta_dim, int x_dim) {
    std::string header;
    for (int i = 0; i < theta_dim; ++i) {
        header += (i ? ",theta_" : "theta_") + std::to_string(i);
    }
    for (int i = 0; i < x_dim; ++i) {
        header += ",x_" + std::to_string(i);
    }
    return header;
}

inline void write_dataset_csv(const JointDataset& data, std::ostream& out) {
    out << dataset_header(data.theta_dim(), data.x_dim()) << '\n';
    for (Eigen::Index r = 0; r < data.size(); ++r) {
        for (int j = 0; j < data.theta_dim(); ++j) {
            out << (j ? "," : "") << format_double(data.thetas()(r, j));
        }
        for (int j = 0; j < data.x_dim(); ++j) {
            out << ',' << format_double(data.xs()(r, j));
        }
        out << '\n';
    }
}

inline JointDataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("dataset: missing header", 1);
    }
    detail::strip_cr(line);
    const auto names = detail::split_fields(line);
    int theta_dim = 0;
    while (theta_dim < static_cast<int>(names.size()) && names[theta_dim] == "theta_" + std::to_string(theta_dim)) {
        ++theta_dim;
    }
    const int x_dim = static_cast<int>(names.size()) - theta_dim;
    for (int j = 0; j < x_dim; ++j) {
        if (names[theta_dim + j] != "x_" + std::to_string(j)) {
            throw ParseError("dataset: malformed header at column " + std::to_string(theta_dim + j + 1) + " ('" +
                                 std::string(names[theta_dim + j]) + "')",
                             1, theta_dim + j + 1);
        }
    }
    if (theta_dim < 1 || x_dim < 1) {
        throw ParseError("dataset: header must name at least one theta_ and one x_ column", 1);
    }
    const int cols = theta_dim + x_dim;
    std::vector<double> values;
    long line_no = 1;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) {
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (static_cast<int>(fields.size()) != cols) {
            throw ParseError("dataset: line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                 " fields, expected " + std::to_string(cols),
                             line_no);
        }
        for (int j = 0; j < cols; ++j) {
            double v = 0.0;
            if (!parse_double(fields[j], v)) {
                throw ParseError("dataset: line " + std::to_string(line_no) + " column " + std::to_string(j + 1) +
                                     ": not a finite number ('" + std::string(fields[j]) + "')",
                                 line_no, j + 1);
            }
            values.push_back(v);
        }
        ++rows;
    }
    Matrix thetas(rows, theta_dim);
    Matrix xs(rows, x_dim);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (int j = 0; j < cols; ++j) {
            const double v = values[static_cast<std::size_t>(r * cols + j)];
            if (j < theta_dim) {
                thetas(r, j) = v;
            } else {
                xs(r, j - theta_dim) = v;
            }
        }
    }
    return JointDataset(std::move(thetas), std::move(xs));
}

inline void save_dataset(const JointDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open " + path.string() + " for writing");
    }
    write_dataset_csv(data, out);
}

inline JointDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    return read_dataset_csv(in);
}

struct DatasetMetadata {
    int m = 0;
    int d = 0;
    std::int64_t n = 0;
    std::uint64_t seed = 0;
    std::string task_name;
};

inline void to_json(nlohmann::json& j, const DatasetMetadata& meta) {
    j = nlohmann::json{{"m", meta.m}, {"d", meta.d}, {"N", meta.n}, {"seed", meta.seed}, {"task_name", meta.task_name}};
}

inline void from_json(const nlohmann::json& j, DatasetMetadata& meta) {
    j.at("m").get_to(meta.m);
    j.at("d").get_to(meta.d);
    j.at("N").get_to(meta.n);
    j.at("seed").get_to(meta.seed);
    j.at("task_name").get_to(meta.task_name);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot open " + path.string() + " for writing");
    }
    out << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

/// Flat row-major array of a matrix, as stored in checkpoints.
inline nlohmann::json matrix_to_json(const Matrix& m) {
    return nlohmann::json{{"rows", m.rows()},
                          {"cols", m.cols()},
                          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw ParseError("matrix: data length does not match shape");
    }
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

inline nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const nlohmann::json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

} // namespace lc2st

#endif
