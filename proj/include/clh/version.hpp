#pragma once

namespace clh {

inline constexpr const char* kEngineVersion = "0.1.0";

} // namespace clh
