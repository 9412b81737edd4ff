#include "abfpe/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace abfpe {

PolySchedule make_poly_schedule(double lr0, double power,
                                std::int64_t total_iterations,
                                double restart_fraction, double restart_lr) {
  if (!(lr0 > 0.0) || !(restart_lr > 0.0))
    throw std::invalid_argument("learning rates must be positive");
  if (total_iterations < 2)
    throw std::invalid_argument("schedule needs at least two iterations");
  if (!(restart_fraction > 0.0 && restart_fraction < 1.0))
    throw std::invalid_argument("restart_fraction must lie in (0,1)");

  PolySchedule s;
  s.lr0 = lr0;
  s.power = power;
  s.total_iterations = total_iterations;
  s.restart_iteration = std::clamp<std::int64_t>(
      std::llround(restart_fraction * static_cast<double>(total_iterations)),
      1, total_iterations - 1);
  s.restart_lr = restart_lr;
  return s;
}

PolySchedule make_poly_schedule_no_restart(double lr0, double power,
                                           std::int64_t total_iterations) {
  if (!(lr0 > 0.0))
    throw std::invalid_argument("learning rate must be positive");
  if (total_iterations < 1)
    throw std::invalid_argument("schedule needs at least one iteration");

  PolySchedule s;
  s.lr0 = lr0;
  s.power = power;
  s.total_iterations = total_iterations;
  s.restart_iteration = -1;
  return s;
}

double poly_lr(const PolySchedule& s, std::int64_t i) {
  const std::int64_t m = s.total_iterations;
  if (i < 0 || i > m)
    throw std::invalid_argument("iteration outside [0, M]");

  const std::int64_t r = s.restart_iteration;
  if (r >= 0 && i >= r) {
    const double frac =
        static_cast<double>(i - r) / static_cast<double>(m - r);
    return s.restart_lr * std::pow(1.0 - frac, s.power);
  }
  const double frac = static_cast<double>(i) / static_cast<double>(m);
  return s.lr0 * std::pow(1.0 - frac, s.power);
}

}  // namespace abfpe
