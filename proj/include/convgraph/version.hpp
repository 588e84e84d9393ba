#pragma once

namespace convgraph {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace convgraph
