#pragma once

namespace epiflow {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace epiflow
