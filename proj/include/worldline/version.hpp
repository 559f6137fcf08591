#pragma once

namespace wl {

inline constexpr const char* kVersion = "worldline 0.1.0";
inline constexpr int kManifestSchemaVersion = 1;

}  // namespace wl
