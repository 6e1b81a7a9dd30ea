#pragma once

#include <string>

#include "json.hpp"
#include "nsbm/autodiff.hpp"
#include "nsbm/optim.hpp"

namespace nsbm {

/// Checkpoint layout: the line `NSBM1`, one line of JSON manifest
/// ({"params": [{"name", "rows", "cols"}...], "adam": {...} | null, "meta": {...}}),
/// then every parameter as little-endian f64 in manifest order, followed by
/// the Adam first and second moments of each parameter when present.
void save_checkpoint(const std::string& path, const ParameterStore& params, const Adam* optimizer,
                     const nlohmann::json& meta);

/// Manifest only, without touching any parameters.
nlohmann::json read_checkpoint_manifest(const std::string& path);

/// Overwrites `params` (which must already hold the same names and shapes)
/// and, when given, the optimizer state. Returns the "meta" object. A layout
/// mismatch throws ShapeError listing every differing parameter.
nlohmann::json load_checkpoint(const std::string& path, ParameterStore& params, Adam* optimizer);

}  // namespace nsbm
