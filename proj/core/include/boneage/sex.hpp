#pragma once

#include <string>
#include <string_view>

namespace boneage {

enum class Sex { kMale, kFemale };

inline std::string to_string(Sex sex) { return sex == Sex::kMale ? "male" : "female"; }

/// Accepts "male"/"female" (also "m"/"f").
Sex parse_sex(std::string_view text);

}  // namespace boneage
