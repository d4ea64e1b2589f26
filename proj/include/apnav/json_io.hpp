#pragma once

// Shared JSON helpers for the file formats: 9-digit float rounding,
// provenance stamps, checked field access and file helpers.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "apnav/detector_field.hpp"
#include "apnav/errors.hpp"

namespace apnav {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Rounds to 9 significant digits. nlohmann emits the shortest round-trip
/// representation, so a rounded value serializes with at most 9 digits.
inline double round9(double v)
{
    return std::strtod(format_g9(v).c_str(), nullptr);
}

/// Identifies the run that produced a file.
struct Provenance {
    std::string config_hash;
    std::uint64_t master_seed = 0;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

inline void stamp(json& j, const Provenance& prov)
{
    j["schema_version"] = kSchemaVersion;
    j["config_hash"] = prov.config_hash;
    j["master_seed"] = prov.master_seed;
}

inline Provenance read_provenance(const json& j)
{
    Provenance p;
    if (j.contains("config_hash") && j["config_hash"].is_string())
        p.config_hash = j["config_hash"].get<std::string>();
    if (j.contains("master_seed") && j["master_seed"].is_number_unsigned())
        p.master_seed = j["master_seed"].get<std::uint64_t>();
    return p;
}

/// Checked member access: throws SchemaError naming the key and line.
inline const json& require(const json& j, const char* key, std::size_t line = 0)
{
    if (!j.is_object() || !j.contains(key))
        throw SchemaError(std::string("missing key '") + key + "'", line);
    return j.at(key);
}

template <typename T>
T require_as(const json& j, const char* key, std::size_t line = 0)
{
    const json& v = require(j, key, line);
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw SchemaError(std::string("key '") + key + "' has the wrong type", line);
    }
}

inline double require_number(const json& j, const char* key, std::size_t line = 0)
{
    const json& v = require(j, key, line);
    if (!v.is_number())
        throw SchemaError(std::string("key '") + key + "' must be a number", line);
    return v.get<double>();
}

inline void check_schema_version(const json& j, std::size_t line = 0)
{
    if (require_as<int>(j, "schema_version", line) != kSchemaVersion)
        throw SchemaError("unsupported schema_version", line);
}

inline json field_to_json(const ConfidenceField& f)
{
    json lobes = json::array();
    for (const auto& l : f.lobes)
        lobes.push_back({{"mu", l.mu}, {"sigma", l.sigma}, {"weight", l.weight}});
    return {{"lobes", lobes}, {"r_half", f.r_half}, {"r_slope", f.r_slope}, {"bias", f.bias}};
}

inline ConfidenceField field_from_json(const json& j, std::size_t line = 0)
{
    ConfidenceField f;
    const json& lobes = require(j, "lobes", line);
    if (!lobes.is_array())
        throw SchemaError("'lobes' must be an array", line);
    for (const auto& l : lobes)
        f.lobes.push_back({require_number(l, "mu", line), require_number(l, "sigma", line),
                           require_number(l, "weight", line)});
    f.r_half = require_number(j, "r_half", line);
    f.r_slope = require_number(j, "r_slope", line);
    f.bias = require_number(j, "bias", line);
    try {
        validate(f);
    } catch (const DimensionError& e) {
        throw SchemaError(e.what(), line);
    }
    return f;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out)
        throw IoError("failed writing '" + path + "'");
}

inline json parse_json(const std::string& text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(what + ": " + e.what());
    }
}

} // namespace apnav
