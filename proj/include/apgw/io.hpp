#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "apgw/digest.hpp"
#include "apgw/errors.hpp"
#include "apgw/model.hpp"

// Dataset ingestion/export (comma-separated, header row, '.' decimal
// separator, no NA), the key-value config grammar with [section] headers,
// atomic file writes, and run manifests.

namespace apgw {
namespace io {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (;;) {
        const auto next = s.find(sep, pos);
        if (next == std::string::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
}

inline std::optional<double> parse_double(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) return std::nullopt;
    double value = 0.0;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end) return std::nullopt;
    return value;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Writes content to path via a temporary file + rename, so readers never
/// observe a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out) throw DataError("failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::uint64_t file_digest(const std::filesystem::path& path) {
    return fnv1a64(read_file(path));
}

/// Column selection for dataset ingestion.  Empty covariates means: every
/// column other than time and status.
struct DatasetSchema {
    std::string time_column = "time";
    std::string status_column = "status";
    std::vector<std::string> covariate_columns;
};

/// Loads a delimited survival dataset.  Non-numeric covariate columns are
/// expanded to 0/1 indicator columns named column=level, with the first
/// level seen as the reference.  Validation is fail-fast with 1-based file
/// line numbers.
inline SurvivalDataset load_dataset(const std::filesystem::path& path,
                                    const DatasetSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "': empty file");
    std::vector<std::string> header;
    for (auto& h : split(trim(line), ',')) header.push_back(trim(h));

    auto column_index = [&](const std::string& name) {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<int>(j);
        throw DataError("'" + path.string() + "': no column named '" + name + "'");
    };
    const int time_idx = column_index(schema.time_column);
    const int status_idx = column_index(schema.status_column);
    std::vector<int> cov_idx;
    if (schema.covariate_columns.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (static_cast<int>(j) != time_idx && static_cast<int>(j) != status_idx)
                cov_idx.push_back(static_cast<int>(j));
    } else {
        for (const auto& name : schema.covariate_columns) cov_idx.push_back(column_index(name));
    }

    std::vector<std::vector<std::string>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split(line, ',');
        if (cells.size() != header.size())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(cells.size()));
        for (auto& c : cells) c = trim(c);
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw DataError("'" + path.string() + "': no data rows");

    // A covariate column is numeric iff every cell parses as a double.
    const int n = static_cast<int>(rows.size());
    std::vector<bool> numeric(cov_idx.size(), true);
    for (std::size_t c = 0; c < cov_idx.size(); ++c)
        for (const auto& row : rows) {
            const std::string& cell = row[static_cast<std::size_t>(cov_idx[c])];
            if (cell.empty() || cell == "NA") continue;  // reported later with its line
            if (!parse_double(cell)) {
                numeric[c] = false;
                break;
            }
        }

    struct ExpandedColumn {
        std::string name;
        int source;                    // index into cov_idx
        std::optional<std::string> level;  // set for indicator columns
    };
    std::vector<ExpandedColumn> columns;
    std::vector<std::vector<std::string>> levels(cov_idx.size());
    for (std::size_t c = 0; c < cov_idx.size(); ++c) {
        const std::string& base = header[static_cast<std::size_t>(cov_idx[c])];
        if (numeric[c]) {
            columns.push_back({base, static_cast<int>(c), std::nullopt});
            continue;
        }
        for (const auto& row : rows) {
            const std::string& cell = row[static_cast<std::size_t>(cov_idx[c])];
            if (std::find(levels[c].begin(), levels[c].end(), cell) == levels[c].end())
                levels[c].push_back(cell);
        }
        // reference = first level seen; indicators for the rest
        for (std::size_t l = 1; l < levels[c].size(); ++l)
            columns.push_back({base + "=" + levels[c][l], static_cast<int>(c), levels[c][l]});
    }

    SurvivalDataset data;
    data.times.resize(n);
    data.status.resize(n);
    data.covariates.resize(n, static_cast<int>(columns.size()));
    for (auto& col : columns) data.names.push_back(col.name);

    for (int i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        const int file_line = i + 2;  // header is line 1
        auto cell_error = [&](const std::string& what) {
            return DataError(path.string() + ":" + std::to_string(file_line) + ": " + what);
        };
        const auto t = parse_double(row[static_cast<std::size_t>(time_idx)]);
        if (!t) throw cell_error("time '" + row[static_cast<std::size_t>(time_idx)] +
                                 "' is not a number");
        if (!(*t > 0.0)) throw cell_error("time must be positive, got " + format_double(*t));
        data.times[i] = *t;
        const auto st = parse_double(row[static_cast<std::size_t>(status_idx)]);
        if (!st || (*st != 0.0 && *st != 1.0))
            throw cell_error("status '" + row[static_cast<std::size_t>(status_idx)] +
                             "' must be 0 or 1");
        data.status[i] = static_cast<int>(*st);
        for (std::size_t k = 0; k < columns.size(); ++k) {
            const auto& col = columns[k];
            const std::string& cell = row[static_cast<std::size_t>(cov_idx[col.source])];
            if (cell.empty() || cell == "NA")
                throw cell_error("missing value in column '" +
                                 header[static_cast<std::size_t>(cov_idx[col.source])] + "'");
            if (col.level) {
                data.covariates(i, static_cast<int>(k)) = cell == *col.level ? 1.0 : 0.0;
            } else {
                data.covariates(i, static_cast<int>(k)) = *parse_double(cell);
            }
        }
    }
    return data;
}

/// Exports a dataset in the same shape load_dataset ingests (full precision,
/// so a write/load roundtrip is exact).
inline void write_dataset(const std::filesystem::path& path, const SurvivalDataset& data) {
    data.validate();
    std::ostringstream out;
    out << "time,status";
    for (std::size_t j = 0; j < data.names.size(); ++j) out << "," << data.names[j];
    for (int j = static_cast<int>(data.names.size()); j < data.p(); ++j) out << ",x" << (j + 1);
    out << "\n";
    for (int i = 0; i < data.n(); ++i) {
        out << format_double(data.times[i]) << "," << data.status[i];
        for (int j = 0; j < data.p(); ++j) out << "," << format_double(data.covariates(i, j));
        out << "\n";
    }
    atomic_write(path, out.str());
}

/// Parsed key-value config: [section] headers, key = value lines, '#'
/// comment lines.  Consumers must call take()/finish() so unknown keys are
/// hard errors.
class Config {
  public:
    Config() = default;

    static Config parse_text(const std::string& text, const std::string& origin = "<config>") {
        Config cfg;
        cfg.origin_ = origin;
        std::istringstream in(text);
        std::string line, section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(line_no) +
                                      ": malformed section header '" + t + "'");
                section = trim(t.substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": expected key = value, got '" + t + "'");
            const std::string key = trim(t.substr(0, eq));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
            cfg.values_[section + "." + key] = trim(t.substr(eq + 1));
        }
        return cfg;
    }

    static Config parse_file(const std::filesystem::path& path) {
        return parse_text(read_file(path), path.string());
    }

    /// Sets (or overrides) a value, e.g. from a command-line flag.
    void set(const std::string& section, const std::string& key, const std::string& value) {
        values_[section + "." + key] = value;
    }

    std::optional<std::string> take(const std::string& section, const std::string& key) {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return std::nullopt;
        consumed_.insert(it->first);
        return it->second;
    }

    std::string take_or(const std::string& section, const std::string& key,
                        const std::string& fallback) {
        auto v = take(section, key);
        return v ? *v : fallback;
    }

    double take_number(const std::string& section, const std::string& key, double fallback) {
        auto v = take(section, key);
        if (!v) return fallback;
        const auto parsed = parse_double(*v);
        if (!parsed)
            throw ConfigError(origin_ + ": key '" + section + "." + key +
                              "' must be a number, got '" + *v + "'");
        return *parsed;
    }

    /// Fails on any key that no consumer claimed (typo protection).
    void finish() const {
        for (const auto& [key, value] : values_)
            if (!consumed_.count(key))
                throw ConfigError(origin_ + ": unknown config key '" + key + "'");
    }

    const std::string& origin() const { return origin_; }

  private:
    std::string origin_ = "<config>";
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

/// Provenance record written next to every result-producing CLI run.
struct RunManifest {
    std::string command;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> input_digests;  // path, digest
    std::string tool_version;
    double wall_clock_seconds = 0.0;
    std::vector<std::string> outputs;
};

}  // namespace io
}  // namespace apgw
