#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace modesim::io {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shortest decimal that round-trips to the same double; the basis of the
// byte-identical golden-file guarantee.
inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw IoError("format_double: conversion failed");
    return std::string(buf, ptr);
}

inline std::string format_int(std::int64_t v) {
    char buf[24];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw IoError("format_int: conversion failed");
    return std::string(buf, ptr);
}

inline std::string format_uint(std::uint64_t v) {
    char buf[24];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw IoError("format_uint: conversion failed");
    return std::string(buf, ptr);
}

// A CSV cell: empty for "no value" (e.g. MC columns in an analytic run).
class Cell {
public:
    Cell() = default;
    Cell(double v) : text_(format_double(v)) {}
    Cell(int v) : text_(format_int(v)) {}
    Cell(std::int64_t v) : text_(format_int(v)) {}
    Cell(std::uint64_t v) : text_(format_uint(v)) {}
    Cell(bool v) : text_(v ? "1" : "0") {}
    Cell(std::string v) : text_(std::move(v)) {}
    Cell(const char* v) : text_(v) {}

    const std::string& text() const { return text_; }

private:
    std::string text_;
};

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header)
        : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
        write_header(std::vector<std::string>(header.begin(), header.end()));
    }

    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
        : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
        write_header(header);
    }

    void row(std::initializer_list<Cell> cells) {
        bool first = true;
        for (const auto& c : cells) {
            if (!first) out_ << ',';
            out_ << c.text();
            first = false;
        }
        out_ << '\n';
    }

    // Wide rows (e.g. field snapshots) where the cell count is dynamic.
    void row(const std::vector<Cell>& cells) {
        bool first = true;
        for (const auto& c : cells) {
            if (!first) out_ << ',';
            out_ << c.text();
            first = false;
        }
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (out_.fail()) throw IoError("error while writing " + path_.string());
    }

private:
    void write_header(const std::vector<std::string>& header) {
        bool first = true;
        for (const auto& h : header) {
            if (!first) out_ << ',';
            out_ << h;
            first = false;
        }
        out_ << '\n';
    }

    std::filesystem::path path_;
    std::ofstream out_;
};

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << content;
    out.close();
    if (out.fail()) throw IoError("error while writing " + path.string());
}

}  // namespace modesim::io
