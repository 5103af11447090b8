#pragma once

namespace adamlab {

// Entry point behind the adamlab binary; separated so tests can drive the
// CLI in-process. Returns the process exit code (2 on invalid configs).
int cli_main(int argc, const char* const* argv);

} // namespace adamlab
