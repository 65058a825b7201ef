#include "chirality/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace chirality {

std::string double_to_hex(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double hex_to_double(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ValidationError("serialize: bad float literal '" + s + "'");
  return v;
}

Json tensor_to_json(const Tensor& t) {
  Json j;
  j["shape"] = t.shape;
  Json vals = Json::array();
  for (double v : t.data) vals.push_back(double_to_hex(v));
  j["hex"] = std::move(vals);
  return j;
}

Tensor tensor_from_json(const Json& j) {
  Tensor t(j.at("shape").get<std::vector<long>>());
  const Json& vals = j.at("hex");
  if (vals.size() != t.data.size())
    throw ValidationError("serialize: tensor value count mismatch");
  for (size_t i = 0; i < t.data.size(); ++i)
    t.data[i] = hex_to_double(vals[i].get<std::string>());
  return t;
}

Json layout_to_json(const JointLayout& layout) {
  Json j;
  j["left"] = layout.left;
  j["right"] = layout.right;
  j["center"] = layout.center;
  j["dims"] = layout.dims;
  j["negated_dims"] = std::vector<int>(layout.negated_dims.begin(), layout.negated_dims.end());
  return j;
}

JointLayout layout_from_json(const Json& j) {
  std::vector<int> neg = j.at("negated_dims").get<std::vector<int>>();
  return build_layout(j.at("left").get<std::vector<std::string>>(),
                      j.at("right").get<std::vector<std::string>>(),
                      j.at("center").get<std::vector<std::string>>(),
                      j.at("dims").get<int>(), std::set<int>(neg.begin(), neg.end()));
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  Json j;
  in >> j;
  return j;
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace chirality
