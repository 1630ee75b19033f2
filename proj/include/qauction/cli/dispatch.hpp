#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qauction::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Runs one `qauction` invocation; args[0] is the program name.
/// Diagnostics go to `err`, the one-line summary (and data without --out) to `out`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Environment variable naming the data directory of `serve`.
inline constexpr const char* kDataDirEnv = "QAUCTION_DATA_DIR";

}  // namespace qauction::cli
