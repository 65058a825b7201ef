#pragma once

#include <string>

#include <json.hpp>

#include "chirality/layout.hpp"
#include "chirality/tensor.hpp"

namespace chirality {

using Json = nlohmann::json;

inline constexpr const char* kSchemaTag = "chirality-kit/v1";

// Doubles travel as C hex-float literals so round-trips are bit exact.
std::string double_to_hex(double v);
double hex_to_double(const std::string& s);

Json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const Json& j);

Json layout_to_json(const JointLayout& layout);
JointLayout layout_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace chirality
