#include "splitpipe/units.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "splitpipe/errors.hpp"

namespace splitpipe::units {

namespace {

struct NumberSuffix {
    double value;
    std::string suffix;  // lowercased, trimmed
};

NumberSuffix split_number(std::string_view text, const char* what) {
    size_t begin = text.find_first_not_of(" \t");
    size_t end = text.find_last_not_of(" \t");
    if (begin == std::string_view::npos)
        throw ParseError(std::string("empty ") + what);
    text = text.substr(begin, end - begin + 1);

    size_t pos = 0;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) pos++;
    bool saw_digit = false;
    while (pos < text.size() && (std::isdigit((unsigned char)text[pos]) || text[pos] == '.')) {
        saw_digit = saw_digit || std::isdigit((unsigned char)text[pos]);
        pos++;
    }
    if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
        size_t exp = pos + 1;
        if (exp < text.size() && (text[exp] == '+' || text[exp] == '-')) exp++;
        if (exp < text.size() && std::isdigit((unsigned char)text[exp])) {
            pos = exp;
            while (pos < text.size() && std::isdigit((unsigned char)text[pos])) pos++;
        }
    }
    if (!saw_digit)
        throw ParseError(std::string("bad ") + what + ": '" + std::string(text) + "'");

    double value = 0;
    try {
        value = std::stod(std::string(text.substr(0, pos)));
    } catch (const std::exception&) {
        throw ParseError(std::string("bad ") + what + ": '" + std::string(text) + "'");
    }
    std::string suffix(text.substr(pos));
    while (!suffix.empty() && suffix.front() == ' ') suffix.erase(suffix.begin());
    std::transform(suffix.begin(), suffix.end(), suffix.begin(),
                   [](unsigned char c) { return (char)std::tolower(c); });
    return {value, suffix};
}

}  // namespace

double parse_duration(std::string_view text) {
    auto [value, suffix] = split_number(text, "duration");
    double scale;
    if (suffix.empty() || suffix == "s" || suffix == "sec" || suffix == "secs")
        scale = 1.0;
    else if (suffix == "ms")
        scale = 1e-3;
    else if (suffix == "us")
        scale = 1e-6;
    else if (suffix == "ns")
        scale = 1e-9;
    else if (suffix == "m" || suffix == "min")
        scale = 60.0;
    else
        throw ParseError("unknown duration unit '" + suffix + "'");
    return value * scale;
}

double parse_rate(std::string_view text) {
    auto [value, suffix] = split_number(text, "rate");
    // Strip common trailing spellings: "bit", "bit/s", "bps".
    double scale = 1.0;
    if (suffix.empty()) {
        return value;
    }
    char prefix = suffix[0];
    std::string rest = suffix;
    if (prefix == 'k' || prefix == 'm' || prefix == 'g') {
        rest = suffix.substr(1);
        if (prefix == 'k') scale = 1e3;
        if (prefix == 'm') scale = 1e6;
        if (prefix == 'g') scale = 1e9;
    }
    if (rest == "bit" || rest == "bit/s" || rest == "bits" || rest == "bps" || rest == "b")
        return value * scale;
    throw ParseError("unknown rate unit '" + suffix + "'");
}

std::uint64_t parse_bytes(std::string_view text) {
    auto [value, suffix] = split_number(text, "byte count");
    double scale;
    if (suffix.empty() || suffix == "b")
        scale = 1.0;
    else if (suffix == "kb" || suffix == "kib" || suffix == "k")
        scale = 1024.0;
    else if (suffix == "mb" || suffix == "mib" || suffix == "m")
        scale = 1024.0 * 1024.0;
    else if (suffix == "gb" || suffix == "gib" || suffix == "g")
        scale = 1024.0 * 1024.0 * 1024.0;
    else
        throw ParseError("unknown byte unit '" + suffix + "'");
    double bytes = value * scale;
    if (bytes < 0 || std::floor(bytes) != bytes)
        throw ParseError("byte count must be a non-negative integer: '" + std::string(text) + "'");
    return (std::uint64_t)bytes;
}

std::string format_duration(double seconds) {
    char buf[64];
    double a = std::fabs(seconds);
    if (a >= 1.0 || a == 0.0)
        std::snprintf(buf, sizeof buf, "%.3f s", seconds);
    else if (a >= 1e-3)
        std::snprintf(buf, sizeof buf, "%.3f ms", seconds * 1e3);
    else
        std::snprintf(buf, sizeof buf, "%.1f us", seconds * 1e6);
    return buf;
}

std::string format_rate(double bits_per_second) {
    char buf[64];
    if (bits_per_second >= 1e9)
        std::snprintf(buf, sizeof buf, "%.2f Gbit/s", bits_per_second / 1e9);
    else if (bits_per_second >= 1e6)
        std::snprintf(buf, sizeof buf, "%.2f Mbit/s", bits_per_second / 1e6);
    else if (bits_per_second >= 1e3)
        std::snprintf(buf, sizeof buf, "%.2f kbit/s", bits_per_second / 1e3);
    else
        std::snprintf(buf, sizeof buf, "%.0f bit/s", bits_per_second);
    return buf;
}

}  // namespace splitpipe::units
