#pragma once

#include <json.hpp>

#include "smpc/synthesis.hpp"

namespace smpc {

using Json = nlohmann::json;

// Matrices travel as row-major nested arrays.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json design_to_json(const ControllerDesign& d);
ControllerDesign design_from_json(const Json& j);

Json certificate_to_json(const Theorem1Certificate& c);

}  // namespace smpc
