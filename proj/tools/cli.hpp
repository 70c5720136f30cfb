#pragma once

namespace spamm::cli {

/// Command-line driver. Returns 0 on success, 1 on usage or input errors
/// and 2 when an iteration diverges.
int cli_main(int argc, char **argv);

} // namespace spamm::cli
