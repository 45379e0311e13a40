#pragma once

// JSON job-file loading and deterministic report rendering for the command
// line front end.  A job file describes a geometry (with an optional second,
// "underlined" geometry for map comparisons), a connection choice, matter
// fields, map-deformation data, and the evaluation plan (points, seed,
// tolerance).  Parsing is strict: unknown keys, wrong types, wrong grid sizes
// and version mismatches all raise SchemaError.  The accepted format is
// documented by the published schema file shipped under schema/.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "aniso/connection.hpp"
#include "aniso/fields.hpp"
#include "aniso/geometry.hpp"
#include "aniso/namap.hpp"

namespace aniso {

inline constexpr const char* kToolName = "aniso-cli";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSpecVersion = 1;

struct RunSection {
    std::vector<Point> points;  // explicit evaluation points; empty -> seeded
    int count = 8;              // seeded-point count
    double lo = -0.85, hi = 0.95;
    std::uint64_t seed = 20240801;
    double tolerance = 1e-6;
};

struct ConnSection {
    ConnKind kind = ConnKind::Canonical;
    CustomConnGrids grids;  // populated for ConnKind::Custom only
};

struct NamapSection {
    bool present = false;
    int cls = 0;
    NaMapData data;  // expression grids; absent fields stay empty
};

struct SpecFile {
    int version = kSpecVersion;
    GeometrySpec geometry;
    bool hasUnderlined = false;
    GeometrySpec underlined;
    ConnSection connection;
    std::vector<MatterField> fields;
    std::vector<bool> fieldChecked;  // per field: residuals gate the exit code
    NamapSection namap;
    RunSection run;
};

// Parse a JSON job description; SchemaError on any format violation
// (including expression syntax errors, reported with their entry path).
SpecFile parseSpec(const std::string& jsonText);

// Read and parse a job file; SchemaError when the file cannot be read.
SpecFile loadSpec(const std::string& path);

std::string kindName(ConnKind kind);
ConnKind kindFromName(const std::string& name);  // SchemaError on unknown name

// 17-significant-digit decimal rendering used for every floating-point number
// in reports; non-finite values render as "nan"/"inf"/"-inf".
std::string fmt17(double v);

// Deterministic report rendering: key order is insertion order, floats go
// through fmt17 (as JSON strings when non-finite, so output stays parseable).
std::string renderJsonReport(const nlohmann::ordered_json& report);
std::string renderTextReport(const nlohmann::ordered_json& report);

// Number of non-finite floating-point values anywhere in the tree.
std::size_t countNonFinite(const nlohmann::ordered_json& node);

} // namespace aniso
