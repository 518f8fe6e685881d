#include "gridcast/text.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gridcast/errors.hpp"

namespace gridcast {

std::vector<TextSection> parse_sections(const std::string& text) {
    std::vector<TextSection> sections;
    sections.push_back(TextSection{"", 0, {}});

    int line_no = 0;
    std::istringstream stream(text);
    std::string raw;
    while (std::getline(stream, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        // trim
        std::size_t begin = raw.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        std::size_t end = raw.find_last_not_of(" \t\r");
        std::string content = raw.substr(begin, end - begin + 1);

        if (content.front() == '[') {
            if (content.back() != ']' || content.size() < 3)
                throw ParseError("malformed section header '" + content + "'", line_no,
                                 static_cast<int>(begin) + 1);
            sections.push_back(TextSection{content.substr(1, content.size() - 2), line_no, {}});
            continue;
        }

        TextLine parsed;
        parsed.line = line_no;
        std::size_t i = begin;
        while (i <= end) {
            if (std::isspace(static_cast<unsigned char>(raw[i]))) {
                ++i;
                continue;
            }
            std::size_t start = i;
            while (i <= end && !std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
            parsed.tokens.push_back(
                TextToken{raw.substr(start, i - start), line_no, static_cast<int>(start) + 1});
        }
        sections.back().lines.push_back(std::move(parsed));
    }
    return sections;
}

std::optional<double> parse_double(const std::string& token) {
    if (token.empty()) return std::nullopt;
    const char* begin = token.c_str();
    char* consumed = nullptr;
    double v = std::strtod(begin, &consumed);
    if (consumed != begin + token.size()) return std::nullopt;
    return v;
}

std::optional<std::complex<double>> parse_complex(const std::string& token) {
    if (token.empty()) return std::nullopt;
    if (token.back() != 'j' && token.back() != 'J') {
        auto re = parse_double(token);
        if (!re) return std::nullopt;
        return std::complex<double>(*re, 0.0);
    }
    std::string body = token.substr(0, token.size() - 1);
    if (body.empty()) return std::nullopt;
    // split at the sign of the imaginary part: the last '+'/'-' that is not
    // an exponent sign and not the leading sign of the real part
    std::size_t split = std::string::npos;
    for (std::size_t i = body.size(); i-- > 1;) {
        char c = body[i];
        if ((c == '+' || c == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
            split = i;
            break;
        }
    }
    if (split == std::string::npos) {
        // token like `1.5j`: purely imaginary
        auto im = parse_double(body);
        if (!im) return std::nullopt;
        return std::complex<double>(0.0, *im);
    }
    auto re = parse_double(body.substr(0, split));
    auto im = parse_double(body.substr(split));
    if (!re || !im) return std::nullopt;
    return std::complex<double>(*re, *im);
}

std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_sig9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fmt_complex(const std::complex<double>& z) {
    std::string out = fmt_full(z.real());
    std::string im = fmt_full(z.imag());
    if (!im.empty() && im.front() != '-') out += '+';
    out += im;
    out += 'j';
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

}  // namespace gridcast
