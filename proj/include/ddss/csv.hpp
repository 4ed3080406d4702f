#pragma once
#include <string>
#include <vector>

namespace ddss {

std::string fmt_g17(double x);  // shortest round-trippable decimal (%.17g)

// comma-separated, LF line ends, UTF-8, header always present
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows);

// returns all rows including the header; IoError when unreadable/empty
std::vector<std::vector<std::string>> read_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace ddss
