#include "tsmc/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace tsmc {

namespace {
constexpr double kMaxTerminalResidual = 1e-3;
constexpr int kMonotonicityGridPoints = 1000;
}  // namespace

NoiseSchedule::NoiseSchedule(Fn sigma, Fn sigma_prime)
    : sigma_(std::move(sigma)), sigma_prime_(std::move(sigma_prime)) {
    if (!sigma_ || !sigma_prime_) throw std::invalid_argument("NoiseSchedule: null function");
    if (std::abs(sigma_(0.0)) > 1e-12)
        throw std::invalid_argument("NoiseSchedule: sigma(0) must be 0");
    double prev = 0.0;
    for (int i = 1; i <= kMonotonicityGridPoints; ++i) {
        const double t = static_cast<double>(i) / kMonotonicityGridPoints;
        const double s = sigma_(t);
        if (!(s >= prev - 1e-12))
            throw std::invalid_argument("NoiseSchedule: sigma must be non-decreasing");
        prev = s;
    }
    terminal_residual_ = std::exp(-sigma_(1.0));
    if (terminal_residual_ > kMaxTerminalResidual * (1.0 + 1e-9))
        throw std::invalid_argument("NoiseSchedule: terminal residual exceeds 1e-3");
}

NoiseSchedule NoiseSchedule::log_linear(double terminal_residual) {
    if (!(terminal_residual > 0.0) || terminal_residual > kMaxTerminalResidual)
        throw std::invalid_argument("NoiseSchedule::log_linear: residual must be in (0, 1e-3]");
    const double slope = 1.0 - terminal_residual;
    return NoiseSchedule([slope](double t) { return -std::log1p(-slope * t); },
                         [slope](double t) { return slope / (1.0 - slope * t); });
}

double NoiseSchedule::survival(double t) const { return std::exp(-sigma_(t)); }

}  // namespace tsmc
