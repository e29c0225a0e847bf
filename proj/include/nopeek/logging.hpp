#pragma once

namespace nopeek {

/// Sets the global log level from NOPEEK_LOG (trace, debug, info, warn,
/// error, off; default warn). Logs go to stderr.
void init_logging();

}  // namespace nopeek
