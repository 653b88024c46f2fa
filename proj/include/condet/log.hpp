#pragma once

#include <iosfwd>
#include <string_view>

namespace condet::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_level(Level level);
Level level();

// Messages go to stderr unless redirected; nullptr restores stderr.
void set_sink(std::ostream* sink);

void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

}  // namespace condet::log
