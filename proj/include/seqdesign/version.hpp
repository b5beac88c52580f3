#pragma once

namespace seqdesign {

inline constexpr const char* kVersion = "0.1.0";

} // namespace seqdesign
