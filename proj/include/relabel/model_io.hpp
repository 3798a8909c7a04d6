#pragma once

#include <string>

#include "relabel/mac.hpp"

namespace relabel {

// Single-file binary model format; see docs/model_format.md for the exact
// layout. Little-endian on disk regardless of host byte order.
void save_model(const std::string& path, const MacModel& model);

// Verifies magic, version and the schema hash against the supplied schema.
MacModel load_model(const std::string& path, const AttributeSchema& schema);

}  // namespace relabel
