#pragma once

#include <string>
#include <vector>

namespace repfactor::csv {

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(const std::string& field);

/// Splits one CSV record, honouring double-quoted fields.
std::vector<std::string> split(const std::string& line);

}  // namespace repfactor::csv
