#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qrfsim {

/// Composite Simpson rule on uniformly spaced samples. An odd number of
/// intervals closes with the three-eighths rule; a single interval falls back
/// to the trapezoid.
inline double simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size() < 2 ? 0 : f.size() - 1;
  if (n == 0) return 0.0;
  if (n == 1) return 0.5 * h * (f[0] + f[1]);
  std::size_t even = n % 2 == 0 ? n : n - 3;
  double sum = 0.0;
  for (std::size_t k = 0; k + 2 <= even; k += 2) sum += f[k] + 4.0 * f[k + 1] + f[k + 2];
  double out = sum * h / 3.0;
  if (even != n) out += 3.0 * h / 8.0 * (f[even] + 3.0 * f[even + 1] + 3.0 * f[even + 2] + f[even + 3]);
  return out;
}

/// Running integral at every sample, exact for cubics. The last entry equals
/// simpson(f, h).
inline std::vector<double> cumulative_simpson(std::span<const double> f, double h) {
  std::vector<double> out(f.size(), 0.0);
  const std::size_t n = f.size() < 2 ? 0 : f.size() - 1;
  for (std::size_t k = 2; k <= n; k += 2) out[k] = out[k - 2] + h / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k]);
  for (std::size_t k = 1; k <= n; k += 2) {
    if (k >= 3) {
      out[k] = out[k - 3] + 3.0 * h / 8.0 * (f[k - 3] + 3.0 * f[k - 2] + 3.0 * f[k - 1] + f[k]);
    } else if (n >= 3) {
      out[k] = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
    } else if (n == 2) {
      out[k] = h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
    } else {
      out[k] = 0.5 * h * (f[0] + f[1]);
    }
  }
  return out;
}

}  // namespace qrfsim
