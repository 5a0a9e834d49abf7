#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lsail {

/// Exit codes: 0 success, 2 validation error, 3 runtime/numerics error.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

/// Finite-difference checks (central, h = 1e-5) of every production
/// network architecture against its analytic gradients. Prints one line
/// per network; returns true when all pass `tolerance`.
bool run_gradcheck(double tolerance, std::uint64_t seed, std::ostream& out);

}  // namespace lsail
