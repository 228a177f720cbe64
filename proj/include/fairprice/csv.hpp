// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fairprice/common.hpp"

namespace fairprice {

// Shortest round-trip decimal form; keeps rerun outputs byte-identical.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace csv {

// RFC-4180 field quoting: quote when the field contains a comma, quote or
// newline; embedded quotes are doubled.
inline std::string escape(const std::string& field) {
    bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string join_row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += escape(fields[i]);
    }
    return line;
}

// Streaming RFC-4180 reader; handles quoted fields with embedded commas,
// quotes and newlines. CRLF and LF both accepted.
class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open file: " + path);
    }

    // Returns false at end of input. `row` receives the parsed fields.
    bool next(std::vector<std::string>& row) {
        row.clear();
        if (eof_) return false;
        std::string field;
        bool in_quotes = false;
        bool any = false;
        int c;
        while ((c = in_.get()) != EOF) {
            any = true;
            if (in_quotes) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        field += '"';
                        in_.get();
                    } else {
                        in_quotes = false;
                    }
                } else {
                    field += static_cast<char>(c);
                }
            } else if (c == '"') {
                in_quotes = true;
            } else if (c == ',') {
                row.push_back(std::move(field));
                field.clear();
            } else if (c == '\r') {
                if (in_.peek() == '\n') in_.get();
                row.push_back(std::move(field));
                return true;
            } else if (c == '\n') {
                row.push_back(std::move(field));
                return true;
            } else {
                field += static_cast<char>(c);
            }
        }
        eof_ = true;
        if (!any) return false;
        row.push_back(std::move(field));
        return true;
    }

private:
    std::ifstream in_;
    bool eof_ = false;
};

inline bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

}  // namespace csv
}  // namespace fairprice
