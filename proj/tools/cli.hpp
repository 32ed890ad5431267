#pragma once

// Command-line front end: gen-data, train, eval, oracle-check.
//
// Exit codes: 0 success, 1 a check failed, 2 invalid config or input,
// 3 numeric failure (NaN abort), 4 I/O error.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace madgan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

struct OracleRow {
  std::string check;
  double expected = 0.0;
  double actual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct OracleOptions {
  std::size_t k = 1;
  std::size_t instances = 100;     // random simplex instances
  unsigned long long seed = 1;
  bool fit_discriminator = false;  // also train a discriminator (slow)
  std::size_t fit_steps = 20000;
};

std::vector<OracleRow> oracle_checks(const OracleOptions& options);

}  // namespace madgan::cli
