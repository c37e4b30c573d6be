#pragma once

namespace crowdnav {
inline constexpr const char* kVersion = "0.1.0";
}
