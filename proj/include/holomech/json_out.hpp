#pragma once

// Output records: nlohmann::ordered_json trees written one per line with
// every float at 17 significant digits. Non-finite numbers become null.

#include <string>

#include <json.hpp>

#include "holomech/operator_core.hpp"

namespace holomech::json {

using Json = nlohmann::ordered_json;

// Rows of [re, im] pairs.
Json matrix(const CMatrix& m);
Json vector(const CVector& v);

std::string dump(const Json& value);

}  // namespace holomech::json
