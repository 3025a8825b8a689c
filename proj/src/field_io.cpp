#include "pucci/field_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pucci/errors.hpp"

namespace pucci {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string field_to_csv(const Field& field) {
  const Grid& g = *field.grid;
  std::string out;
  out.reserve(static_cast<size_t>(g.total_nodes()) * 40);
  out += g.domain.dimension == 2 ? "x,y,value\n" : "x,value\n";
  for (int id = 0; id < g.total_nodes(); ++id) {
    out += format_double(g.node_x[static_cast<size_t>(id)]);
    if (g.domain.dimension == 2) {
      out += ',';
      out += format_double(g.node_y[static_cast<size_t>(id)]);
    }
    out += ',';
    out += format_double(field[id]);
    out += '\n';
  }
  return out;
}

void write_field_csv(const Field& field, const std::string& path) {
  write_text_file(path, field_to_csv(field));
}

Field field_from_csv(const Grid& grid, const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw input_error("field CSV: empty input");
  const std::string want_header = grid.domain.dimension == 2 ? "x,y,value" : "x,value";
  if (line != want_header)
    throw input_error("field CSV: expected header '" + want_header + "', got '" + line + "'");

  Field f(grid);
  int id = 0;
  const int cols = grid.domain.dimension == 2 ? 3 : 2;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (id >= grid.total_nodes()) throw input_error("field CSV: more rows than grid nodes");
    double v[3] = {0, 0, 0};
    const char* p = line.c_str();
    for (int c = 0; c < cols; ++c) {
      char* end = nullptr;
      v[c] = std::strtod(p, &end);
      if (end == p) throw input_error("field CSV: bad number in row " + std::to_string(id + 2));
      p = end;
      if (c + 1 < cols) {
        if (*p != ',')
          throw input_error("field CSV: expected comma in row " + std::to_string(id + 2));
        ++p;
      }
    }
    const double px = grid.node_x[static_cast<size_t>(id)];
    const double py = grid.node_y[static_cast<size_t>(id)];
    if (std::abs(v[0] - px) > 1e-12 ||
        (grid.domain.dimension == 2 && std::abs(v[1] - py) > 1e-12))
      throw input_error("field CSV: row " + std::to_string(id + 2) +
                        " position does not match the grid");
    f[id] = v[cols - 1];
    ++id;
  }
  if (id != grid.total_nodes())
    throw input_error("field CSV: expected " + std::to_string(grid.total_nodes()) +
                      " rows, got " + std::to_string(id));
  return f;
}

Field read_field_csv(const Grid& grid, const std::string& path) {
  return field_from_csv(grid, read_text_file(path));
}

nlohmann::json domain_to_json(const Domain& domain) {
  nlohmann::json j;
  j["dimension"] = domain.dimension;
  switch (domain.shape) {
    case Domain::Shape::Interval:
      j["shape"] = "interval";
      j["length"] = domain.length;
      break;
    case Domain::Shape::Rectangle:
      j["shape"] = "rectangle";
      j["extent_x"] = domain.extent_x;
      j["extent_y"] = domain.extent_y;
      break;
    case Domain::Shape::Disk:
      j["shape"] = "disk";
      j["radius"] = domain.radius;
      break;
    case Domain::Shape::Polygon: {
      j["shape"] = "polygon";
      nlohmann::json verts = nlohmann::json::array();
      for (const auto& v : domain.vertices) verts.push_back({v[0], v[1]});
      j["vertices"] = verts;
      break;
    }
  }
  j["convex_certified"] = domain.convex_certified;
  return j;
}

Domain domain_from_json(const nlohmann::json& j) {
  const std::string shape = j.at("shape").get<std::string>();
  if (shape == "interval") return Domain::interval(j.at("length").get<double>());
  if (shape == "rectangle")
    return Domain::rectangle(j.at("extent_x").get<double>(), j.at("extent_y").get<double>());
  if (shape == "disk") return Domain::disk(j.at("radius").get<double>());
  if (shape == "polygon") {
    std::vector<std::array<double, 2>> verts;
    for (const auto& v : j.at("vertices"))
      verts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    return Domain::polygon(std::move(verts));
  }
  throw config_error("unknown domain shape '" + shape + "'");
}

nlohmann::json grid_metadata(const Grid& grid) {
  nlohmann::json j;
  j["domain"] = domain_to_json(grid.domain);
  j["h"] = grid.h;
  j["interior_nodes"] = grid.interior_count;
  j["boundary_nodes"] = grid.boundary_count;
  return j;
}

nlohmann::json field_to_json(const Field& field) {
  nlohmann::json j;
  j["grid"] = grid_metadata(*field.grid);
  j["values"] = field.values;
  return j;
}

Field field_from_json(const Grid& grid, const nlohmann::json& j) {
  const auto& vals = j.at("values");
  if (static_cast<int>(vals.size()) != grid.total_nodes())
    throw input_error("field JSON: value count does not match the grid");
  Field f(grid);
  for (int id = 0; id < grid.total_nodes(); ++id)
    f[id] = vals[static_cast<size_t>(id)].get<double>();
  return f;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw input_error("failed writing '" + path + "'");
}

}  // namespace pucci
