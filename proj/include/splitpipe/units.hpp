#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace splitpipe::units {

// "100ms", "1.5s", "250us", "2m", or a bare number (seconds). Returns seconds.
double parse_duration(std::string_view text);

// "5Mbit", "800kbit", "1Gbit", "5mbps", or a bare number (bits/s). SI prefixes
// (k = 1000). Returns bits per second.
double parse_rate(std::string_view text);

// "64KB", "1MB", "512B", or a bare integer (bytes). Binary prefixes
// (KB = 1024). Returns bytes.
std::uint64_t parse_bytes(std::string_view text);

// Render seconds compactly for tables: "1.234 s", "56.7 ms", "890 us".
std::string format_duration(double seconds);

// Render bits/s compactly: "5.00 Mbit/s".
std::string format_rate(double bits_per_second);

}  // namespace splitpipe::units
