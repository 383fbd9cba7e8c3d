#ifndef COMPETE_CLI_HPP_
#define COMPETE_CLI_HPP_

namespace compete {

// Full command-line entry point (train/eval/compare/grid/plot/selftest).
// Returns the process exit code: 0 success, 1 runtime failure, 2 usage error.
int cli_main(int argc, const char* const* argv);

}  // namespace compete

#endif  // COMPETE_CLI_HPP_
