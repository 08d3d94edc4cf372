#pragma once

#include <string>

#include "json.hpp"
#include "rtd/model.hpp"

namespace rtd {

InfluenceDiagram diagram_from_json(const nlohmann::json& j);
nlohmann::json diagram_to_json(const InfluenceDiagram& d);
nlohmann::json load_json(const std::string& path);

}  // namespace rtd
