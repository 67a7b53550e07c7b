#pragma once

namespace qamlab {

inline constexpr const char* version_string = "0.1.0";

}
