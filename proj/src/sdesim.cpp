#include "filtkit/sdesim.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace filtkit::sdesim {

namespace {

std::vector<double> make_grid(double dt, std::size_t n_steps) {
  std::vector<double> times(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) times[k] = static_cast<double>(k) * dt;
  return times;
}

// Diffusion of the bilinear model: column phi is G_{. phi} + x B_phi.
Matrix bilinear_diffusion(const BilinearStateModel& model, const Vector& x, double t) {
  Matrix S = model.G(t);
  const Vector b = model.B(t);
  for (Index phi = 0; phi < S.cols(); ++phi) S.col(phi) += x * b(phi);
  return S;
}

}  // namespace

std::size_t step_count(double dt, double T) {
  if (!(dt > 0.0)) throw InvalidStep("dt must be positive");
  if (!(T >= 0.0)) throw InvalidStep("horizon must be non-negative");
  const double q = T / dt;
  const double rounded = std::round(q);
  if (std::abs(q - rounded) > 0.5 - 1e-9)
    throw InvalidStep("horizon is not an integer number of steps (T/dt = " + std::to_string(q) +
                      ")");
  return static_cast<std::size_t>(rounded);
}

std::size_t grid_index(const SamplePath& path, double t) {
  if (path.dt <= 0.0 || path.times.empty()) throw ScheduleOffGrid("path has no grid");
  const double q = (t - path.times.front()) / path.dt;
  const auto idx = static_cast<long long>(std::llround(q));
  if (idx < 0 || idx >= static_cast<long long>(path.times.size()))
    throw ScheduleOffGrid("instant " + std::to_string(t) + " outside the path horizon");
  if (std::abs(path.times[static_cast<std::size_t>(idx)] - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw ScheduleOffGrid("instant " + std::to_string(t) + " not on the path grid");
  return static_cast<std::size_t>(idx);
}

SamplePath simulate_ito(const LinearStateModel& model, const Vector& x0, double dt, double T,
                        std::uint64_t seed) {
  const std::size_t N = step_count(dt, T);
  NoiseStream noise(seed, kStateStream);
  SamplePath path{make_grid(dt, N), Matrix(model.n, static_cast<Index>(N) + 1), dt};
  const double sdt = std::sqrt(dt);
  Vector x = x0;
  path.states.col(0) = x;
  for (std::size_t k = 0; k < N; ++k) {
    const double t = path.times[k];
    const Vector dW = sdt * noise.normal_vector(model.d);
    x += model.A(t) * x * dt + model.G(t) * dW;
    path.states.col(static_cast<Index>(k) + 1) = x;
  }
  return path;
}

SamplePath simulate_ito(const BilinearStateModel& model, const Vector& x0, double dt, double T,
                        std::uint64_t seed) {
  const std::size_t N = step_count(dt, T);
  NoiseStream noise(seed, kStateStream);
  SamplePath path{make_grid(dt, N), Matrix(model.n, static_cast<Index>(N) + 1), dt};
  const double sdt = std::sqrt(dt);
  Vector x = x0;
  path.states.col(0) = x;
  for (std::size_t k = 0; k < N; ++k) {
    const double t = path.times[k];
    const Vector dW = sdt * noise.normal_vector(model.d);
    x += (model.A0(t) + model.A(t) * x) * dt + bilinear_diffusion(model, x, t) * dW;
    path.states.col(static_cast<Index>(k) + 1) = x;
  }
  return path;
}

SamplePath simulate_stratonovich(const BilinearStateModel& model, const Vector& x0, double dt,
                                 double T, std::uint64_t seed) {
  const std::size_t N = step_count(dt, T);
  NoiseStream noise(seed, kStateStream);
  SamplePath path{make_grid(dt, N), Matrix(model.n, static_cast<Index>(N) + 1), dt};
  const double sdt = std::sqrt(dt);
  Vector x = x0;
  path.states.col(0) = x;
  for (std::size_t k = 0; k < N; ++k) {
    const double t = path.times[k];
    const Vector dW = sdt * noise.normal_vector(model.d);
    const Vector drift = (model.A0(t) + model.A(t) * x) * dt;
    const Matrix S0 = bilinear_diffusion(model, x, t);
    const Vector x_pred = x + drift + S0 * dW;
    x += drift + 0.5 * (S0 + bilinear_diffusion(model, x_pred, t + dt)) * dW;
    path.states.col(static_cast<Index>(k) + 1) = x;
  }
  return path;
}

MeasurementRecord gen_discrete_measurements(const SamplePath& path,
                                            const DiscreteMeasurementModel& model,
                                            std::uint64_t seed) {
  NoiseStream noise(seed, kDiscreteMeasStream);
  MeasurementRecord rec{MeasurementRecord::Kind::Discrete, model.schedule,
                        Matrix(model.m, static_cast<Index>(model.schedule.size())), path.dt};
  for (std::size_t k = 0; k < model.schedule.size(); ++k) {
    const double t = model.schedule[k];
    const Vector x = path.states.col(static_cast<Index>(grid_index(path, t)));
    const Matrix L = numkit::cholesky_spd(model.R(t));
    rec.values.col(static_cast<Index>(k)) = model.C(t) * x + L * noise.normal_vector(model.m);
  }
  return rec;
}

MeasurementRecord gen_continuous_measurements(const SamplePath& path,
                                              const ContinuousMeasurementModel& model,
                                              std::uint64_t seed) {
  NoiseStream noise(seed, kContinuousMeasStream);
  const std::size_t N = path.times.size() - 1;
  MeasurementRecord rec{MeasurementRecord::Kind::Continuous,
                        std::vector<double>(path.times.begin(), path.times.end() - 1),
                        Matrix(model.m, static_cast<Index>(N)), path.dt};
  const Matrix L = numkit::cholesky_spd(model.phi_eta);
  const double sdt = std::sqrt(path.dt);
  for (std::size_t k = 0; k < N; ++k) {
    const double t = path.times[k];
    const Vector x = path.states.col(static_cast<Index>(k));
    rec.values.col(static_cast<Index>(k)) =
        model.C(t) * x * path.dt + sdt * (L * noise.normal_vector(model.m));
  }
  return rec;
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

namespace {

void write_comments(std::ostream& os, const std::vector<std::string>& comments) {
  for (const auto& c : comments) os << "# " << c << "\n";
}

}  // namespace

void write_csv(std::ostream& os, const SamplePath& path, const std::vector<std::string>& comments) {
  write_comments(os, comments);
  os << "t";
  for (Index i = 0; i < path.states.rows(); ++i) os << ",x" << (i + 1);
  os << "\n";
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    os << format_double(path.times[k]);
    for (Index i = 0; i < path.states.rows(); ++i)
      os << "," << format_double(path.states(i, static_cast<Index>(k)));
    os << "\n";
  }
}

void write_csv(std::ostream& os, const MeasurementRecord& record,
               const std::vector<std::string>& comments) {
  write_comments(os, comments);
  const char* stem = record.kind == MeasurementRecord::Kind::Discrete ? "y" : "dz";
  os << "t";
  for (Index i = 0; i < record.values.rows(); ++i) os << "," << stem << (i + 1);
  os << "\n";
  for (std::size_t k = 0; k < record.times.size(); ++k) {
    os << format_double(record.times[k]);
    for (Index i = 0; i < record.values.rows(); ++i)
      os << "," << format_double(record.values(i, static_cast<Index>(k)));
    os << "\n";
  }
}

}  // namespace filtkit::sdesim
