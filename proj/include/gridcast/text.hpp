#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace gridcast {

// All gridcast text formats (feeder, run config, partition export, model
// files, manifests) share one dialect: UTF-8, `#` comments, `[section]`
// headers, whitespace-separated tokens, `.` decimal floats.

struct TextToken {
    std::string value;
    int line = 0;
    int column = 0;  // 1-based position of the first character
};

struct TextLine {
    std::vector<TextToken> tokens;
    int line = 0;
};

struct TextSection {
    std::string name;
    int line = 0;
    std::vector<TextLine> lines;
};

/// Splits a document into sections. Tokens before the first header go into an
/// unnamed section "". Throws ParseError on malformed headers.
std::vector<TextSection> parse_sections(const std::string& text);

/// Strict double parse; the whole token must be consumed.
std::optional<double> parse_double(const std::string& token);

/// Complex literal in `re+imj` form, e.g. `0.01-0.02j`. A bare real (no `j`)
/// is accepted as re+0j.
std::optional<std::complex<double>> parse_complex(const std::string& token);

/// Shortest representation that round-trips a double exactly (%.17g).
std::string fmt_full(double v);

/// Reporting precision for CSV artifacts (9 significant digits).
std::string fmt_sig9(double v);

std::string fmt_complex(const std::complex<double>& z);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace gridcast
