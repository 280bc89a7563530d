#pragma once

#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "clh/error.hpp"

namespace clh {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

/// Streams a JSONL source record by record. Blank lines are skipped. A final
/// line without a trailing newline is treated as a truncated write and
/// rejected, so readers never consume a partially flushed record.
class JsonlReader {
public:
    explicit JsonlReader(std::istream& in, std::string source_name = "<stream>")
        : in_(in), source_(std::move(source_name)) {}

    /// Invokes fn(line_number, record) per record. Throws ParseError with the
    /// offending line number on malformed JSON or a truncated tail.
    void for_each(const std::function<void(std::size_t, const json&)>& fn) {
        std::string line;
        std::size_t line_no = 0;
        while (true) {
            if (!std::getline(in_, line)) break;
            ++line_no;
            bool newline_missing = in_.eof() && !in_.bad();
            if (newline_missing && !line.empty()) {
                throw Error(ErrorCode::ParseError,
                            source_ + ":" + std::to_string(line_no) +
                                ": truncated tail (missing trailing newline)");
            }
            if (line.empty()) continue;
            json record;
            try {
                record = json::parse(line);
            } catch (const json::exception& ex) {
                throw Error(ErrorCode::ParseError,
                            source_ + ":" + std::to_string(line_no) + ": " + ex.what());
            }
            fn(line_no, record);
        }
    }

private:
    std::istream& in_;
    std::string source_;
};

/// Writes one record per line. Each line is serialized fully before a single
/// stream insertion, so a record is either absent or complete on disk.
class JsonlWriter {
public:
    explicit JsonlWriter(std::ostream& out) : out_(out) {}

    void write(const ojson& record) {
        std::string line = record.dump();
        line.push_back('\n');
        out_ << line;
        out_.flush();
    }

private:
    std::ostream& out_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
    out << content;
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

} // namespace clh
