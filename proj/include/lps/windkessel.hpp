#ifndef LPS_WINDKESSEL_HPP
#define LPS_WINDKESSEL_HPP

// Two-element Windkessel forward model: C dP/dt + P/R = I(t), with a
// half-sinusoid inflow during systole and no inflow during diastole.
//
// Units: R in mmHg·s/L, C in L/mmHg (so RC is in seconds), Ts and Td in
// seconds, CO in L/min, pressures in mmHg, heart rate in beats per minute.

#include <array>
#include <numbers>
#include <sstream>
#include <vector>

#include "lps/diff.hpp"
#include "lps/scalar_math.hpp"

namespace lps {

// The five latent clinical concepts.
template <typename T>
struct Concepts {
  T resistance;      // R
  T compliance;      // C
  T systole_time;    // Ts
  T diastole_time;   // Td
  T cardiac_output;  // CO

  static constexpr std::size_t size = 5;

  T& operator[](std::size_t m) { return *member(this, m); }
  const T& operator[](std::size_t m) const { return *member(this, m); }

 private:
  template <typename Self>
  static auto member(Self* self, std::size_t m) -> decltype(&self->resistance) {
    switch (m) {
      case 0: return &self->resistance;
      case 1: return &self->compliance;
      case 2: return &self->systole_time;
      case 3: return &self->diastole_time;
      case 4: return &self->cardiac_output;
    }
    throw UsageError("Concepts: index out of range");
  }
};

using ConceptVector = Concepts<double>;

inline constexpr std::array<const char*, 5> kConceptNames = {"R", "C", "Ts", "Td", "CO"};

template <typename T>
struct Vitals {
  T bp_sys;   // end-systolic pressure
  T bp_dias;  // end-diastolic pressure
  T hr;       // heart rate
};

using VitalsEstimate = Vitals<double>;

struct WindkesselConfig {
  int settle_cycles = 4;
  int average_cycles = 6;
  double initial_pressure = 80.0;  // mmHg
};

// Throws DomainError unless every concept is positive and the beat length
// Ts + Td lies in (0.2, 3.0) s.
template <typename T>
void validate_concepts(const Concepts<T>& z) {
  for (std::size_t m = 0; m < z.size; ++m) {
    if (!(min_value(z[m]) > 0.0)) {
      std::ostringstream os;
      os << "concept " << kConceptNames[m] << " must be positive, got " << min_value(z[m]);
      throw DomainError(os.str());
    }
  }
  const auto beat = z.systole_time + z.diastole_time;
  if (!(min_value(beat) > 0.2) || !(max_value(beat) < 3.0)) {
    std::ostringstream os;
    os << "beat length Ts + Td outside (0.2, 3.0) s: [" << min_value(beat) << ", " << max_value(beat) << "]";
    throw DomainError(os.str());
  }
}

// Peak systolic inflow I0 [L/s] such that the systolic volume equals the
// stroke volume CO (Ts + Td) / 60.
template <typename T>
auto inflow_amplitude(const Concepts<T>& z) {
  return std::numbers::pi * z.cardiac_output * (z.systole_time + z.diastole_time) / (120.0 * z.systole_time);
}

// I(t) for t within one cycle.
double inflow(double t, const ConceptVector& z);

template <typename T>
auto heart_rate(const Concepts<T>& z) {
  return 60.0 / (z.systole_time + z.diastole_time);
}

// Closed-form systolic pressure t seconds into systole, starting from p_start.
template <typename Time, typename P, typename T>
auto systole_pressure(const Time& t, const P& p_start, const Concepts<T>& z) {
  const auto k = 1.0 / (z.resistance * z.compliance);
  const auto omega = std::numbers::pi / z.systole_time;
  const auto amp = inflow_amplitude(z) / z.compliance;
  const auto denom = square(k) + square(omega);
  const auto particular = amp * (k * sin(omega * t) - omega * cos(omega * t)) / denom;
  const auto particular0 = -amp * omega / denom;
  return particular + (p_start - particular0) * exp(-k * t);
}

// Closed-form diastolic decay t seconds into diastole.
template <typename Time, typename P, typename T>
auto diastole_pressure(const Time& t, const P& p_start, const Concepts<T>& z) {
  return p_start * exp(-t / (z.resistance * z.compliance));
}

// Chains the closed forms from the initial pressure for `settle_cycles`
// cycles, then averages the end-systolic and end-diastolic pressures over the
// next `average_cycles` cycles.
template <typename T>
Vitals<T> simulate_vitals(const Concepts<T>& z, const WindkesselConfig& cfg = {}) {
  validate_concepts(z);
  if (cfg.settle_cycles < 1 || cfg.average_cycles < 1) throw UsageError("simulate_vitals: cycle counts must be >= 1");

  // Cycle-invariant pieces of the systole solution evaluated at t = Ts, where
  // sin(pi) = 0 and cos(pi) = -1.
  const T tau = z.resistance * z.compliance;
  const T k = 1.0 / tau;
  const T omega = std::numbers::pi / z.systole_time;
  const T steady = (inflow_amplitude(z) / z.compliance) * omega / (square(k) + square(omega));
  const T systole_decay = exp(-z.systole_time / tau);
  const T diastole_decay = exp(-z.diastole_time / tau);

  // P(Ts) = steady + (p - (-steady)) e^{-k Ts}
  auto end_systole = [&](const auto& p) { return steady + (p + steady) * systole_decay; };

  auto p = end_systole(cfg.initial_pressure) * diastole_decay;
  for (int c = 1; c < cfg.settle_cycles; ++c) p = end_systole(p) * diastole_decay;

  T sys_sum = end_systole(p);
  T dias_sum = sys_sum * diastole_decay;
  T current = dias_sum;
  for (int c = 1; c < cfg.average_cycles; ++c) {
    const T s = end_systole(current);
    current = s * diastole_decay;
    sys_sum = sys_sum + s;
    dias_sum = dias_sum + current;
  }
  const double n = static_cast<double>(cfg.average_cycles);
  return {sys_sum / n, dias_sum / n, heart_rate(z)};
}

// Waveform from classic RK4 integration, integrating each phase with an
// integer number of equal steps no longer than dt so phase switches fall on
// step boundaries.
struct Waveform {
  std::vector<double> t;
  std::vector<double> pressure;
  std::vector<double> end_systolic;   // one per cycle
  std::vector<double> end_diastolic;  // one per cycle
};

Waveform rk4_reference(const ConceptVector& z, double dt, int n_cycles, double initial_pressure);

// Averages over cycles [settle, settle + average) of an RK4 run, the
// numerical counterpart of simulate_vitals.
VitalsEstimate rk4_vitals(const ConceptVector& z, double dt, const WindkesselConfig& cfg = {});

// τ = Td / log(bp_sys / bp_dias), inverting the diastolic decay.
double estimate_tau(double bp_sys, double bp_dias, double diastole_time);

}  // namespace lps

#endif
