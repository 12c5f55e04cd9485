#pragma once

#include <istream>
#include <string>
#include <vector>

namespace recur::csv {

// Minimal RFC-4180 style reader: quoted fields, doubled quotes, CRLF tolerated.
bool read_record(std::istream& in, std::vector<std::string>& fields);

std::string quote(const std::string& s);

// Shortest representation that round-trips.
std::string num(double x);

}  // namespace recur::csv
