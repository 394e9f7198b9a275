#pragma once

#include <functional>
#include <string>

namespace stochsym {

using WarningSink = std::function<void(const std::string&)>;

/// Replaces the warning sink (stderr by default); returns the previous one.
WarningSink set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace stochsym
