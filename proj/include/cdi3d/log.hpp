// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace cdi3d {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Level comes from the CDI3D_LOG env var ({error, info, debug}); default info.
LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace cdi3d
