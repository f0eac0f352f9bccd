#pragma once

namespace dmem {

// Fixed ids of the special symbols, shared by vocabulary and model code.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kBosId = 2;
inline constexpr int kEosId = 3;
inline constexpr int kNumSpecials = 4;

}  // namespace dmem
