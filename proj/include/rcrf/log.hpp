#pragma once

#include <functional>
#include <string>

namespace rcrf {

using WarningSink = std::function<void(const std::string&)>;

/// Emits a non-fatal diagnostic. Defaults to stderr.
void warn(const std::string& message);

/// Replaces the warning sink; returns the previous one. An empty sink restores
/// the stderr default.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace rcrf
