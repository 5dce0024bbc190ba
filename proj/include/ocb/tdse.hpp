#pragma once

// Split-operator (Fourier) solver for the 3D Schroedinger equation in the
// frame comoving with the trap minimum, imaginary-time ground states, and
// fidelity evaluation.

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ocb/error.hpp"
#include "ocb/potential.hpp"
#include "ocb/scales.hpp"
#include "ocb/trajectory.hpp"

namespace ocb {

using cplx = std::complex<double>;

template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept {
    return true;
  }
};

using AlignedField = std::vector<cplx, FftwAllocator<cplx>>;

// ---------------------------------------------------------------------------
// Grid

struct GridSpec {
  int nx = 32, ny = 32, nz = 256;
  double span_x = 8.0;  // half-width in l_x
  double span_y = 8.0;  // half-width in l_y
  double span_z = 0.0;  // half-width in l_z; 0 selects two lattice periods
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

class Grid3 {
 public:
  Grid3(const GridSpec& spec, const DerivedScales& s) : spec_(spec) {
    if (!is_power_of_two(spec.nx) || !is_power_of_two(spec.ny) || !is_power_of_two(spec.nz))
      throw ConfigError("grid point counts must be powers of two");
    if (spec.nz < 2) throw ConfigError("longitudinal axis needs at least 2 points");
    const double period = std::numbers::pi / kWavenumber;
    const double hz = spec.span_z > 0.0 ? spec.span_z * s.l_z : 2.0 * period;
    if (2.0 * hz < std::max(4.0 * period, 12.0 * s.l_z) * (1.0 - 1e-12))
      throw ConfigError("longitudinal window must cover 4 lattice periods and 12 l_z");
    if (!(spec.span_x > 0.0) || !(spec.span_y > 0.0)) throw ConfigError("transverse spans must be positive");
    axes_[0] = make_axis(spec.nx, spec.span_x * s.l_x);
    axes_[1] = make_axis(spec.ny, spec.span_y * s.l_y);
    axes_[2] = make_axis(spec.nz, hz);
  }

  struct Axis1 {
    int n = 1;
    double half_width = 0.0;
    double spacing = 1.0;
    std::vector<double> x;
    std::vector<double> k;
  };

  const GridSpec& spec() const { return spec_; }
  const Axis1& axis(int i) const { return axes_[i]; }
  int nx() const { return axes_[0].n; }
  int ny() const { return axes_[1].n; }
  int nz() const { return axes_[2].n; }
  std::size_t size() const { return static_cast<std::size_t>(nx()) * ny() * nz(); }
  double cell_volume() const { return axes_[0].spacing * axes_[1].spacing * axes_[2].spacing; }
  std::size_t index(int i, int j, int l) const {
    return (static_cast<std::size_t>(i) * ny() + j) * nz() + l;
  }

  bool same_shape(const Grid3& o) const {
    for (int a = 0; a < 3; ++a)
      if (axes_[a].n != o.axes_[a].n || axes_[a].spacing != o.axes_[a].spacing) return false;
    return true;
  }

 private:
  // A one-point axis is a degenerate direction at coordinate 0 (debug
  // reductions only).
  static Axis1 make_axis(int n, double half_width) {
    Axis1 a;
    a.n = n;
    a.half_width = n == 1 ? 0.0 : half_width;
    a.spacing = n == 1 ? 1.0 : 2.0 * half_width / n;
    a.x.resize(n);
    a.k.resize(n);
    for (int i = 0; i < n; ++i) {
      a.x[i] = n == 1 ? 0.0 : -half_width + i * a.spacing;
      const int m = i < n / 2 ? i : i - n;
      a.k[i] = n == 1 ? 0.0 : 2.0 * std::numbers::pi * m / (n * a.spacing);
    }
    return a;
  }

  GridSpec spec_;
  std::array<Axis1, 3> axes_;
};

// ---------------------------------------------------------------------------
// FFT plans (the planner is not thread safe; execution is)

class FftPlans {
 public:
  static FftPlans& instance() {
    static FftPlans plans;
    return plans;
  }

  fftw_plan get(int nx, int ny, int nz, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_tuple(nx, ny, nz, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
    auto* buf = static_cast<fftw_complex*>(fftw_malloc(n * sizeof(fftw_complex)));
    fftw_plan p = fftw_plan_dft_3d(nx, ny, nz, buf, buf, sign, FFTW_MEASURE);
    fftw_free(buf);
    if (!p) throw SolverError("FFTW planning failed");
    plans_.emplace(key, p);
    return p;
  }

  ~FftPlans() {
    for (auto& [key, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  FftPlans() = default;
  std::mutex mutex_;
  std::map<std::tuple<int, int, int, int>, fftw_plan> plans_;
};

// ---------------------------------------------------------------------------
// Wavefunction

class WaveField {
 public:
  explicit WaveField(std::shared_ptr<const Grid3> grid) : grid_(std::move(grid)), psi_(grid_->size()) {}

  const Grid3& grid() const { return *grid_; }
  std::shared_ptr<const Grid3> grid_ptr() const { return grid_; }
  AlignedField& data() { return psi_; }
  const AlignedField& data() const { return psi_; }
  cplx& operator[](std::size_t i) { return psi_[i]; }
  const cplx& operator[](std::size_t i) const { return psi_[i]; }

  double norm() const {
    double s = 0.0;
    for (const auto& v : psi_) s += std::norm(v);
    return s * grid_->cell_volume();
  }

  void normalize() {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw SolverError("cannot normalize: norm is zero or not finite");
    const double f = 1.0 / std::sqrt(n);
    for (auto& v : psi_) v *= f;
  }

  void forward() { fftw_execute_dft(plan(FFTW_FORWARD), raw(), raw()); }
  /// Unnormalized inverse transform.
  void backward() { fftw_execute_dft(plan(FFTW_BACKWARD), raw(), raw()); }

  template <class F>
  void fill(const F& f) {
    const auto& g = *grid_;
    for (int i = 0; i < g.nx(); ++i)
      for (int j = 0; j < g.ny(); ++j)
        for (int l = 0; l < g.nz(); ++l) psi_[g.index(i, j, l)] = f(g.axis(0).x[i], g.axis(1).x[j], g.axis(2).x[l]);
  }

 private:
  fftw_complex* raw() { return reinterpret_cast<fftw_complex*>(psi_.data()); }
  fftw_plan plan(int sign) const { return FftPlans::instance().get(grid_->nx(), grid_->ny(), grid_->nz(), sign); }

  std::shared_ptr<const Grid3> grid_;
  AlignedField psi_;
};

inline cplx inner_product(const WaveField& a, const WaveField& b) {
  if (!a.grid().same_shape(b.grid())) throw ConfigError("inner product of fields on different grids");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += std::conj(a[i]) * b[i];
  return s * a.grid().cell_volume();
}

/// |<target|psi>|^2.
inline double fidelity(const WaveField& psi, const WaveField& target) { return std::norm(inner_product(target, psi)); }

// ---------------------------------------------------------------------------
// Potentials on the grid

enum class PotentialModel { Full, Harmonic, Free };

using PotentialArray = std::vector<double>;

template <class F>
PotentialArray sample_potential(const Grid3& g, const F& f) {
  PotentialArray v(g.size());
  for (int i = 0; i < g.nx(); ++i)
    for (int j = 0; j < g.ny(); ++j)
      for (int l = 0; l < g.nz(); ++l) v[g.index(i, j, l)] = f(g.axis(0).x[i], g.axis(1).x[j], g.axis(2).x[l]);
  return v;
}

/// Lattice potential in the comoving frame (trap minimum at the origin).
inline PotentialArray sample_potential(const Grid3& g, const DerivedScales& s, PotentialModel model) {
  const Potential pot(s);
  switch (model) {
    case PotentialModel::Full:
      return sample_potential(g, [&](double x, double y, double z) { return pot.full(x, y, z); });
    case PotentialModel::Harmonic:
      return sample_potential(g, [&](double x, double y, double z) { return pot.harmonic(x, y, z); });
    case PotentialModel::Free:
      return PotentialArray(g.size(), 0.0);
  }
  return {};
}

/// The lattice restricted to the central well: beyond the neighbouring
/// intensity nodes the potential is held at its barrier value (zero). Imaginary
/// time then converges to the state localized in that well instead of the
/// Bloch-like state spread over every well in the window.
inline PotentialArray single_well_potential(const Grid3& g, const DerivedScales& s) {
  const Potential pot(s);
  const double node = std::numbers::pi / (2.0 * kWavenumber);
  return sample_potential(g, [&](double x, double y, double z) { return std::abs(z) < node ? pot.full(x, y, z) : 0.0; });
}

/// Kinetic energy hbar^2 |k|^2 / 2m on the FFT grid.
inline std::vector<double> kinetic_spectrum(const Grid3& g) {
  std::vector<double> t(g.size());
  const double c = kHbar * kHbar / (2.0 * kMass);
  for (int i = 0; i < g.nx(); ++i)
    for (int j = 0; j < g.ny(); ++j)
      for (int l = 0; l < g.nz(); ++l) {
        const double kx = g.axis(0).k[i], ky = g.axis(1).k[j], kz = g.axis(2).k[l];
        t[g.index(i, j, l)] = c * (kx * kx + ky * ky + kz * kz);
      }
  return t;
}

struct EnergyParts {
  double kinetic = 0.0;
  double potential = 0.0;
  double total() const { return kinetic + potential; }
};

inline EnergyParts energy_parts(const WaveField& psi, const PotentialArray& v) {
  const auto& g = psi.grid();
  EnergyParts e;
  const double n = psi.norm();
  for (std::size_t i = 0; i < v.size(); ++i) e.potential += v[i] * std::norm(psi[i]);
  e.potential *= g.cell_volume() / n;
  WaveField phi = psi;
  phi.forward();
  const auto t = kinetic_spectrum(g);
  double kin = 0.0, total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    kin += t[i] * std::norm(phi[i]);
    total += std::norm(phi[i]);
  }
  e.kinetic = kin / total;
  return e;
}

inline double energy_expectation(const WaveField& psi, const PotentialArray& v) { return energy_parts(psi, v).total(); }

/// Probability in the cells within `cells` of any boundary of a non-trivial
/// axis.
inline double boundary_probability(const WaveField& psi, int cells = 3) {
  const auto& g = psi.grid();
  auto near = [cells](int i, int n) { return n > 1 && (i < cells || i >= n - cells); };
  double p = 0.0;
  for (int i = 0; i < g.nx(); ++i)
    for (int j = 0; j < g.ny(); ++j)
      for (int l = 0; l < g.nz(); ++l)
        if (near(i, g.nx()) || near(j, g.ny()) || near(l, g.nz())) p += std::norm(psi[g.index(i, j, l)]);
  return p * g.cell_volume() / psi.norm();
}

// ---------------------------------------------------------------------------
// Imaginary time

/// Harmonic-oscillator ground state of the trap expansion, centred at z0.
inline WaveField harmonic_trial(std::shared_ptr<const Grid3> grid, const DerivedScales& s, double z0 = 0.0) {
  WaveField psi(std::move(grid));
  const double ax = kMass * s.omega_x / (2.0 * kHbar);
  const double ay = kMass * s.omega_y / (2.0 * kHbar);
  const double az = kMass * s.omega_z / (2.0 * kHbar);
  psi.fill([&](double x, double y, double z) {
    return cplx(std::exp(-ax * x * x - ay * y * y - az * (z - z0) * (z - z0)));
  });
  psi.normalize();
  return psi;
}

struct GroundStateOptions {
  // Successive step sizes dtau = tau_z / divisor.
  std::vector<double> divisors{50.0, 200.0, 800.0};
  double tolerance = 1e-11;  // energy change per step, E_R
  int check_every = 10;
  int max_steps_per_stage = 200000;
  double boundary_limit = 1e-8;
};

struct GroundStateResult {
  WaveField psi;
  double energy = 0.0;
  int steps = 0;
  double boundary_probability = 0.0;
};

inline GroundStateResult ground_state(const PotentialArray& v, WaveField trial, const DerivedScales& s,
                                      const GroundStateOptions& opt = {}) {
  const auto& g = trial.grid();
  if (v.size() != g.size()) throw ConfigError("potential and grid sizes differ");
  const auto t = kinetic_spectrum(g);
  const double vmin = *std::min_element(v.begin(), v.end());
  const double inv_n = 1.0 / static_cast<double>(g.size());
  trial.normalize();
  int total_steps = 0;
  std::vector<double> half(v.size()), kin(t.size());
  for (double divisor : opt.divisors) {
    const double dtau = s.tau_z / divisor;
    for (std::size_t i = 0; i < v.size(); ++i) half[i] = std::exp(-(v[i] - vmin) * dtau / (2.0 * kHbar));
    for (std::size_t i = 0; i < t.size(); ++i) kin[i] = std::exp(-t[i] * dtau / kHbar) * inv_n;
    double e_prev = energy_expectation(trial, v);
    bool converged = false;
    for (int step = 1; step <= opt.max_steps_per_stage; ++step) {
      auto& d = trial.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= half[i];
      trial.forward();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= kin[i];
      trial.backward();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= half[i];
      trial.normalize();
      ++total_steps;
      if (step % opt.check_every == 0) {
        const double e = energy_expectation(trial, v);
        if (!std::isfinite(e)) throw SolverError("imaginary-time iteration produced a non-finite energy");
        if (std::abs(e - e_prev) / opt.check_every < opt.tolerance) {
          converged = true;
          break;
        }
        e_prev = e;
      }
    }
    if (!converged) throw NumericsError("imaginary-time iteration did not converge");
  }
  GroundStateResult r{std::move(trial), 0.0, total_steps, 0.0};
  r.energy = energy_expectation(r.psi, v);
  r.boundary_probability = boundary_probability(r.psi);
  if (r.boundary_probability > opt.boundary_limit)
    throw SolverError("grid too small: boundary probability " + std::to_string(r.boundary_probability));
  return r;
}

// ---------------------------------------------------------------------------
// Real time, comoving frame

/// Velocity profile of the frame: q0'(t).
using VelocityProfile = std::function<double(double)>;

class ComovingPropagator {
 public:
  ComovingPropagator(const PotentialArray& v, std::shared_ptr<const Grid3> grid, double dt)
      : grid_(std::move(grid)), dt_(dt) {
    const auto& g = *grid_;
    if (v.size() != g.size()) throw ConfigError("potential and grid sizes differ");
    // A negative step runs the static-trap evolution backwards.
    if (!(dt != 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be finite and nonzero");
    const auto t = kinetic_spectrum(g);
    half_.resize(v.size());
    kin_.resize(t.size());
    const double inv_n = 1.0 / static_cast<double>(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) half_[i] = std::exp(cplx(0.0, -v[i] * dt / (2.0 * kHbar)));
    for (std::size_t i = 0; i < t.size(); ++i) kin_[i] = std::exp(cplx(0.0, -t[i] * dt / kHbar)) * inv_n;
    zphase_.resize(g.nz());
    kphase_.resize(g.nz());
  }

  double dt() const { return dt_; }

  /// One step from t to t + dt. The inertial force of the accelerating frame
  /// enters through the velocity increment dv = q0'(t + dt) - q0'(t) as a
  /// position kick plus the matching momentum-space correction.
  void step(WaveField& psi, double dv) {
    const auto& g = *grid_;
    const auto& z = g.axis(2).x;
    const auto& kz = g.axis(2).k;
    for (int l = 0; l < g.nz(); ++l) {
      zphase_[l] = std::exp(cplx(0.0, -kMass * z[l] * dv / kHbar));
      kphase_[l] = std::exp(cplx(0.0, -kz[l] * dv * dt_ / 2.0));
    }
    auto& d = psi.data();
    const std::size_t nz = g.nz();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= half_[i] * zphase_[i % nz];
    psi.forward();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= kin_[i] * kphase_[i % nz];
    psi.backward();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= half_[i];
  }

 private:
  std::shared_ptr<const Grid3> grid_;
  double dt_;
  AlignedField half_, kin_;
  std::vector<cplx> zphase_, kphase_;
};

inline void fsom_step(WaveField& psi, ComovingPropagator& prop, const VelocityProfile& velocity, double t) {
  prop.step(psi, velocity(t + prop.dt()) - velocity(t));
}

struct Observation {
  double t = 0.0;
  double norm = 0.0;
  double mean_z = 0.0;
  double energy = 0.0;
};

struct PropagationOptions {
  int observe_every = 0;  // 0: no trace
  bool observe_energy = false;
  int nan_check_every = 50;
  double boundary_limit = 1e-8;
};

struct PropagationResult {
  std::vector<Observation> trace;
  double max_boundary_probability = 0.0;
  bool boundary_exceeded = false;
  double final_norm = 0.0;
  int steps = 0;
};

inline double mean_z(const WaveField& psi) {
  const auto& g = psi.grid();
  const auto& z = g.axis(2).x;
  double s = 0.0, n = 0.0;
  for (std::size_t i = 0; i < psi.data().size(); ++i) {
    const double p = std::norm(psi[i]);
    s += p * z[i % g.nz()];
    n += p;
  }
  return s / n;
}

/// Runs nt steps starting at t0. Probability reaching the window edge is only
/// recorded: during a collapse the atom leaves the well and wraps around.
inline PropagationResult propagate(WaveField& psi, ComovingPropagator& prop, const VelocityProfile& velocity,
                                   double t0, int nt, const PotentialArray* v = nullptr,
                                   const PropagationOptions& opt = {}) {
  PropagationResult r;
  auto observe = [&](double t) {
    Observation o{t, psi.norm(), mean_z(psi), 0.0};
    if (opt.observe_energy && v) o.energy = energy_expectation(psi, *v);
    r.trace.push_back(o);
    const double b = boundary_probability(psi);
    r.max_boundary_probability = std::max(r.max_boundary_probability, b);
  };
  if (opt.observe_every > 0) observe(t0);
  for (int n = 0; n < nt; ++n) {
    const double t = t0 + n * prop.dt();
    fsom_step(psi, prop, velocity, t);
    ++r.steps;
    if (opt.nan_check_every > 0 && (n + 1) % opt.nan_check_every == 0) {
      if (!std::isfinite(std::real(psi[0])) || !std::isfinite(psi.norm()))
        throw SolverError("wavefunction became non-finite at t = " + std::to_string(t));
    }
    if (opt.observe_every > 0 && (n + 1) % opt.observe_every == 0) observe(t + prop.dt());
  }
  r.final_norm = psi.norm();
  if (!std::isfinite(r.final_norm)) throw SolverError("wavefunction became non-finite");
  r.max_boundary_probability = std::max(r.max_boundary_probability, boundary_probability(psi));
  r.boundary_exceeded = r.max_boundary_probability > opt.boundary_limit;
  return r;
}

inline std::string trace_csv(const std::vector<Observation>& trace, double time_unit = 1.0,
                             double length_unit = 1.0) {
  std::ostringstream os;
  os.precision(12);
  os << "t,norm,mean_z,E\n";
  for (const auto& o : trace)
    os << o.t / time_unit << ',' << o.norm << ',' << o.mean_z / length_unit << ',' << o.energy << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned text header, then little-endian (re, im) doubles.

inline constexpr int kCheckpointVersion = 1;

inline void write_checkpoint(const WaveField& psi, const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  const auto& g = psi.grid();
  out.precision(17);
  out << "OCBWAVE " << kCheckpointVersion << '\n';
  out << "shape " << g.nx() << ' ' << g.ny() << ' ' << g.nz() << '\n';
  out << "half_width " << g.axis(0).half_width << ' ' << g.axis(1).half_width << ' ' << g.axis(2).half_width
      << '\n';
  out << "spacing " << g.axis(0).spacing << ' ' << g.axis(1).spacing << ' ' << g.axis(2).spacing << '\n';
  out << "end\n";
  out.write(reinterpret_cast<const char*>(psi.data().data()),
            static_cast<std::streamsize>(psi.data().size() * sizeof(cplx)));
  if (!out) throw SolverError("checkpoint write failed: " + path);
}

struct CheckpointHeader {
  int version = 0;
  int nx = 0, ny = 0, nz = 0;
  std::array<double, 3> half_width{}, spacing{};
};

/// Reads the amplitudes into psi, whose grid must match the stored one.
inline CheckpointHeader read_checkpoint(WaveField& psi, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  CheckpointHeader h;
  std::string line, key;
  std::getline(in, line);
  {
    std::istringstream is(line);
    is >> key >> h.version;
    if (key != "OCBWAVE" || h.version != kCheckpointVersion) throw ConfigError("not a version-1 checkpoint: " + path);
  }
  while (std::getline(in, line) && line != "end") {
    std::istringstream is(line);
    is >> key;
    if (key == "shape") is >> h.nx >> h.ny >> h.nz;
    if (key == "half_width") is >> h.half_width[0] >> h.half_width[1] >> h.half_width[2];
    if (key == "spacing") is >> h.spacing[0] >> h.spacing[1] >> h.spacing[2];
  }
  const auto& g = psi.grid();
  if (h.nx != g.nx() || h.ny != g.ny() || h.nz != g.nz()) throw ConfigError("checkpoint grid does not match");
  in.read(reinterpret_cast<char*>(psi.data().data()), static_cast<std::streamsize>(psi.data().size() * sizeof(cplx)));
  if (!in) throw ConfigError("checkpoint truncated: " + path);
  return h;
}

}  // namespace ocb
