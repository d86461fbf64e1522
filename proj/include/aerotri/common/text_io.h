#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aerotri {

// Splits text into lines, accepting LF or CRLF endings and a leading UTF-8
// byte-order mark. A trailing empty line is dropped.
std::vector<std::string_view> SplitLines(std::string_view text);

// Splits one CSV record on commas. No quoting support; none of the project
// formats need it.
std::vector<std::string_view> SplitCsvFields(std::string_view line);

std::string_view Trim(std::string_view s);

std::optional<double> ParseDouble(std::string_view s);
std::optional<int64_t> ParseInt(std::string_view s);

// Shortest representation that round-trips a double exactly.
std::string FormatDouble(double value);

std::string ReadTextFile(const std::filesystem::path& path);
std::vector<uint8_t> ReadBinaryFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, std::string_view text);
void WriteBinaryFile(const std::filesystem::path& path,
                     const std::vector<uint8_t>& bytes);

}  // namespace aerotri
