#ifndef COMPETE_SELFTEST_HPP_
#define COMPETE_SELFTEST_HPP_

#include <ostream>

namespace compete {

// Runs the built-in invariant suite (GAE oracle, gradient checks,
// observation properties). Prints one line per check; returns false if
// any check fails.
bool run_selftest(std::ostream& out);

}  // namespace compete

#endif  // COMPETE_SELFTEST_HPP_
