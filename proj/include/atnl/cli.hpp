#pragma once

#include <string>
#include <vector>

namespace atnl::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 1 runtime failure, 2 configuration/format error.
int run(const std::vector<std::string>& args);

} // namespace atnl::cli
