#pragma once

#include <span>
#include <stdexcept>
#include <string>

namespace effseg {

/// Thrown when every paired difference is zero.
class NoNonzeroPairs : public std::domain_error {
 public:
  NoNonzeroPairs() : std::domain_error("no nonzero pairs") {}
};

enum class WilcoxonMethod { automatic, exact, normal };

std::string to_string(WilcoxonMethod m);

struct WilcoxonResult {
  int n_effective = 0;
  double w = 0.0;  // sum of ranks of the positive differences
  double p = 1.0;  // two-tailed
  WilcoxonMethod method = WilcoxonMethod::exact;
};

/// Paired two-tailed signed-rank test on d = a - b. Zero differences are
/// dropped and ties share average ranks. `automatic` uses the exact null
/// distribution for n <= 25 and the tie- and continuity-corrected normal
/// approximation above that.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMethod method = WilcoxonMethod::automatic);

inline constexpr int kWilcoxonExactLimit = 25;

}  // namespace effseg
