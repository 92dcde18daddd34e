#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace xids::csv {

/// Reads one record (RFC 4180 quoting, CRLF tolerated). Returns false at
/// end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields);

std::string_view trim(std::string_view s);

/// Quotes a field when it contains a comma, quote, or line break.
std::string escape(std::string_view field);

}  // namespace xids::csv
