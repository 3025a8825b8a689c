#pragma once

#include <string>

#include "json.hpp"
#include "pucci/grid.hpp"

namespace pucci {

// CSV serialization: header "x,value" (1D) or "x,y,value", one row per node in
// compact id order. Doubles are printed with 17 significant digits, so reading
// the text back reproduces every finite value bit for bit.
std::string field_to_csv(const Field& field);
void write_field_csv(const Field& field, const std::string& path);

// Parses a field CSV against an existing grid; row count and positions must
// match the grid's nodes (positions to within 1e-12 absolute).
Field field_from_csv(const Grid& grid, const std::string& csv_text);
Field read_field_csv(const Grid& grid, const std::string& path);

nlohmann::json domain_to_json(const Domain& domain);
Domain domain_from_json(const nlohmann::json& j);

// Grid metadata: domain descriptor, spacing, classification counts.
nlohmann::json grid_metadata(const Grid& grid);

// Field as JSON: grid metadata plus the value array (bit-exact round trip).
nlohmann::json field_to_json(const Field& field);
Field field_from_json(const Grid& grid, const nlohmann::json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Shortest round-trip decimal form of a double (17 significant digits).
std::string format_double(double v);

}  // namespace pucci
