#pragma once

#include <cstdint>

namespace abfpe {

/// Polynomial decay lr0 * (1 - i/M)^power with an optional warm restart:
/// at iteration R the base rate resets to restart_lr and a fresh decay
/// runs over the remaining M - R iterations. restart_iteration < 0
/// disables the restart.
struct PolySchedule {
  double lr0 = 1e-2;
  double power = 0.9;
  std::int64_t total_iterations = 0;   // M
  std::int64_t restart_iteration = -1; // R, requires 0 < R < M when enabled
  double restart_lr = 6.5e-3;
};

PolySchedule make_poly_schedule(double lr0, double power,
                                std::int64_t total_iterations,
                                double restart_fraction, double restart_lr);

PolySchedule make_poly_schedule_no_restart(double lr0, double power,
                                           std::int64_t total_iterations);

/// Learning rate at iteration i, 0 <= i <= M.
double poly_lr(const PolySchedule& schedule, std::int64_t iteration);

}  // namespace abfpe
