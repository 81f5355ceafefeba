#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace dasep {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shortest decimal that re-parses to the identical bit pattern.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a64(const void* data, size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::uint64_t hash_string(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t hash_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
    return h;
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

// Column-ordered CSV assembly with 17-significant-digit floats.
class CsvBuilder {
  public:
    explicit CsvBuilder(const std::vector<std::string>& columns) {
        for (size_t i = 0; i < columns.size(); ++i) {
            if (i) os_ << ",";
            os_ << columns[i];
        }
        os_ << "\n";
        width_ = columns.size();
    }

    void comment(const std::string& line) {
        // comments go above the header; collected separately
        header_comments_ += "# " + line + "\n";
    }

    template <typename... Ts>
    void row(Ts... fields) {
        size_t count = 0;
        ((append_field(fields, count++)), ...);
        if (count != width_) throw IoError("csv row width mismatch");
        os_ << "\n";
    }

    std::string str() const { return header_comments_ + os_.str(); }

  private:
    void append_field(double v, size_t i) {
        if (i) os_ << ",";
        os_ << format_double(v);
    }
    void append_field(int64_t v, size_t i) {
        if (i) os_ << ",";
        os_ << v;
    }
    void append_field(int v, size_t i) {
        if (i) os_ << ",";
        os_ << v;
    }
    void append_field(size_t v, size_t i) {
        if (i) os_ << ",";
        os_ << v;
    }
    void append_field(const std::string& v, size_t i) {
        if (i) os_ << ",";
        os_ << v;
    }
    std::ostringstream os_;
    std::string header_comments_;
    size_t width_ = 0;
};

// Writes named artifacts into `dir` and returns per-file content hashes.
inline std::map<std::string, std::string> write_outputs(
    const std::map<std::string, std::string>& artifacts, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::map<std::string, std::string> hashes;
    for (const auto& [name, content] : artifacts) {
        write_text_atomic(dir / name, content);
        hashes[name] = hex64(hash_string(content));
    }
    return hashes;
}

inline std::string json_pretty(const nlohmann::json& j) { return j.dump(2) + "\n"; }

} // namespace dasep
