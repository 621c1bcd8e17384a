#pragma once

#include <string>

#include "stackgen/stacking.hpp"

namespace stackgen {

// JSON model file, see docs/model_format.md. Reals are stored exactly:
// scalars as hexadecimal floating literals, arrays as base64 of
// little-endian IEEE-754 doubles.
std::string serialize_model(const StackModel& model);
StackModel deserialize_model(const std::string& text);

void save_model(const StackModel& model, const std::string& path);
StackModel load_model(const std::string& path);

}  // namespace stackgen
