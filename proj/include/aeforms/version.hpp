#pragma once

namespace aeforms {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kBundleSchemaVersion = 1;

} // namespace aeforms
