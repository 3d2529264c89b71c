#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

namespace kneescout::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { Ok = 0, InputError = 1, NumericalFailure = 2 };

// `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace kneescout::cli
