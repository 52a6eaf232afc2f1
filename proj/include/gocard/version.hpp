#pragma once

namespace gocard {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace gocard
