#pragma once

// Built-in initial-data library. Every scenario fixes a default box and
// horizon; the mesh resolution comes from the run configuration.

#include <cmath>
#include <string>
#include <vector>

#include "vmsd/coupling.hpp"
#include "vmsd/errors.hpp"
#include "vmsd/mesh.hpp"
#include "vmsd/moments.hpp"

namespace vmsd {

/// Compactly supported (1 - r^2)^4 bump of radius `radius`, C^3 at the edge.
inline double bump(double x, double center, double radius) {
  const double s = (x - center) / radius;
  if (std::abs(s) >= 1.0) return 0.0;
  const double u = 1.0 - s * s;
  return u * u * u * u;
}

inline double bump_dx(double x, double center, double radius) {
  const double s = (x - center) / radius;
  if (std::abs(s) >= 1.0) return 0.0;
  const double u = 1.0 - s * s;
  return -8.0 * s * u * u * u / radius;
}

/// Radial bump in velocity.
inline double bump2(double v1, double v2, double radius) {
  const double r2 = (v1 * v1 + v2 * v2) / (radius * radius);
  if (r2 >= 1.0) return 0.0;
  const double u = 1.0 - r2;
  return u * u * u * u;
}

struct Scenario {
  Problem problem;
  double T = 1.0;
  DomainBox box;
  bool has_exact_f = false, has_exact_W = false;
  PhaseSpace::SpatialTarget f_exact_T;  // f(T, .) when has_exact_f
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"zero", "free-streaming", "wave-subsystem", "e1-static", "coupled-gaussian"};
  return names;
}

/// Parameters of the coupled-gaussian case.
struct GaussianParameters {
  double amplitude = 0.1;
  double sigma_x = 0.18, sigma_v = 0.15;
  double v1_center = 0.2, v2_center = 0.0;
};

inline Scenario make_scenario(const std::string& name, const GaussianParameters& gp = {}) {
  Scenario s;
  s.problem.name = name;
  if (name == "zero") {
    s.T = 0.5;
    s.box = {{-1, 1}, {-1, 1}, {-1, 1}};
    s.problem.rho_b = zero_field();
    s.has_exact_f = s.has_exact_W = true;
    s.problem.f_exact = [](double, double, double, double) { return 0.0; };
    s.problem.W_exact = [](double, double) { return std::array<double, 3>{0, 0, 0}; };
    s.f_exact_T = [](double, double, double) { return 0.0; };
  } else if (name == "free-streaming") {
    s.T = 0.5;
    s.box = {{-1, 1}, {-1, 1}, {-1, 1}};
    auto f0 = [](double x, double v1, double v2) { return bump(x, 0.0, 0.6) * bump2(v1, v2, 0.7); };
    auto exact = [f0](double t, double x, double v1, double v2) { return f0(x - hat_velocity(v1, v2)[0] * t, v1, v2); };
    s.problem.f0 = f0;
    s.problem.fields_off = true;
    s.problem.f_exact = exact;
    s.has_exact_f = true;
    s.f_exact_T = [exact, T = s.T](double x, double v1, double v2) { return exact(T, x, v1, v2); };
  } else if (name == "wave-subsystem") {
    s.T = 1.0;
    s.box = {{-2, 2}, {-1, 1}, {-1, 1}};
    auto e2 = [](double x) { return bump(x, 0.0, 0.8); };
    auto b = [](double x) { return 0.5 * bump(x, 0.2, 0.6); };
    s.problem.E2_0 = e2;
    s.problem.B_0 = b;
    s.problem.rho_b = zero_field();
    // u = E2 + B travels right, w = E2 - B travels left.
    s.problem.W_exact = [e2, b](double t, double x) {
      const double u = e2(x - t) + b(x - t), w = e2(x + t) - b(x + t);
      return std::array<double, 3>{0.0, 0.5 * (u + w), 0.5 * (u - w)};
    };
    s.problem.f_exact = [](double, double, double, double) { return 0.0; };
    s.has_exact_W = true;
  } else if (name == "e1-static") {
    s.T = 0.5;
    s.box = {{-1, 1}, {-1, 1}, {-1, 1}};
    s.problem.rho_b = [](double x) { return -bump_dx(x, 0.0, 0.6); };
    s.problem.W_exact = [](double, double x) { return std::array<double, 3>{bump(x, 0.0, 0.6), 0.0, 0.0}; };
    s.problem.f_exact = [](double, double, double, double) { return 0.0; };
    s.has_exact_W = true;
  } else if (name == "coupled-gaussian") {
    s.T = 0.5;
    s.box = {{-1, 1}, {-1, 1}, {-1, 1}};
    s.problem.f0 = [gp](double x, double v1, double v2) {
      const double dv1 = v1 - gp.v1_center, dv2 = v2 - gp.v2_center;
      return gp.amplitude * std::exp(-x * x / (2 * gp.sigma_x * gp.sigma_x)) *
             std::exp(-(dv1 * dv1 + dv2 * dv2) / (2 * gp.sigma_v * gp.sigma_v));
    };
  } else {
    std::string known;
    for (const auto& n : scenario_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown scenario '" + name + "' (known: " + known + ")");
  }
  return s;
}

}  // namespace vmsd
