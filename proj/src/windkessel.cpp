#include "lps/windkessel.hpp"

#include <cmath>

namespace lps {

double inflow(double t, const ConceptVector& z) {
  const double beat = z.systole_time + z.diastole_time;
  if (t < 0.0 || t >= beat) {
    std::ostringstream os;
    os << "inflow: t = " << t << " outside the cycle [0, " << beat << ")";
    throw UsageError(os.str());
  }
  if (t >= z.systole_time) return 0.0;
  return inflow_amplitude(z) * std::sin(std::numbers::pi * t / z.systole_time);
}

namespace {

// dP/dt during one phase, `systole` selecting the driven phase.
double pressure_rate(double t, double p, const ConceptVector& z, bool systole) {
  const double flow = systole ? inflow_amplitude(z) * std::sin(std::numbers::pi * t / z.systole_time) : 0.0;
  return (flow - p / z.resistance) / z.compliance;
}

double integrate_phase(double p, double duration, double dt, const ConceptVector& z, bool systole, double t0,
                       Waveform& out) {
  const auto steps = static_cast<long>(std::ceil(duration / dt - 1e-9));
  const double h = duration / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) {
    const double t = h * static_cast<double>(i);
    const double k1 = pressure_rate(t, p, z, systole);
    const double k2 = pressure_rate(t + 0.5 * h, p + 0.5 * h * k1, z, systole);
    const double k3 = pressure_rate(t + 0.5 * h, p + 0.5 * h * k2, z, systole);
    const double k4 = pressure_rate(t + h, p + h * k3, z, systole);
    p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.t.push_back(t0 + t + h);
    out.pressure.push_back(p);
  }
  return p;
}

}  // namespace

Waveform rk4_reference(const ConceptVector& z, double dt, int n_cycles, double initial_pressure) {
  validate_concepts(z);
  if (!(dt > 0.0) || dt > 1e-3) throw UsageError("rk4_reference: dt must lie in (0, 1e-3] s");
  Waveform out;
  out.t.push_back(0.0);
  out.pressure.push_back(initial_pressure);
  const double beat = z.systole_time + z.diastole_time;
  double p = initial_pressure;
  for (int c = 0; c < n_cycles; ++c) {
    const double start = beat * c;
    p = integrate_phase(p, z.systole_time, dt, z, true, start, out);
    out.end_systolic.push_back(p);
    p = integrate_phase(p, z.diastole_time, dt, z, false, start + z.systole_time, out);
    out.end_diastolic.push_back(p);
  }
  return out;
}

VitalsEstimate rk4_vitals(const ConceptVector& z, double dt, const WindkesselConfig& cfg) {
  const Waveform w = rk4_reference(z, dt, cfg.settle_cycles + cfg.average_cycles, cfg.initial_pressure);
  double sys = 0.0;
  double dias = 0.0;
  for (int c = cfg.settle_cycles; c < cfg.settle_cycles + cfg.average_cycles; ++c) {
    sys += w.end_systolic[c];
    dias += w.end_diastolic[c];
  }
  return {sys / cfg.average_cycles, dias / cfg.average_cycles, heart_rate(z)};
}

double estimate_tau(double bp_sys, double bp_dias, double diastole_time) {
  if (!(bp_dias > 0.0) || !(bp_sys > bp_dias)) {
    std::ostringstream os;
    os << "estimate_tau: needs bp_sys > bp_dias > 0, got " << bp_sys << " and " << bp_dias;
    throw DomainError(os.str());
  }
  if (!(diastole_time > 0.0)) throw DomainError("estimate_tau: diastole time must be positive");
  return diastole_time / std::log(bp_sys / bp_dias);
}

}  // namespace lps
