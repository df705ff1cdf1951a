#include "tweezersim/gates.hpp"

#include <cmath>
#include <stdexcept>

#include "tweezersim/errors.hpp"

namespace tweezersim {

Register::Register(const std::vector<HybridAtomState>& atoms) {
  if (atoms.empty()) throw ConfigError("register", "needs at least one atom");
  dims_.reserve(atoms.size());
  for (const auto& a : atoms) {
    dims_.push_back(a.dim());
    lost_.push_back(a.lost());
  }
  strides_.assign(dims_.size(), 1);
  for (std::size_t i = dims_.size() - 1; i-- > 0;) strides_[i] = strides_[i + 1] * dims_[i + 1];
  const std::size_t total = strides_[0] * dims_[0];
  amp_.assign(total, Complex{1.0});
  for (std::size_t j = 0; j < total; ++j) {
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      amp_[j] *= atoms[i].amplitudes()[(j / strides_[i]) % dims_[i]];
    }
  }
}

double Register::norm_squared() const {
  double s = 0.0;
  for (const auto& x : amp_) s += std::norm(x);
  return s;
}

template <class F>
void Register::for_each_fiber(std::size_t atom, F&& f) {
  const std::size_t stride = strides_.at(atom);
  const std::size_t block = stride * dims_[atom];
  for (std::size_t outer = 0; outer < amp_.size(); outer += block)
    for (std::size_t inner = 0; inner < stride; ++inner) f(&amp_[outer + inner], stride);
}

template <class F>
void Register::for_each_fiber(std::size_t atom, F&& f) const {
  const std::size_t stride = strides_.at(atom);
  const std::size_t block = stride * dims_[atom];
  for (std::size_t outer = 0; outer < amp_.size(); outer += block)
    for (std::size_t inner = 0; inner < stride; ++inner) f(&amp_[outer + inner], stride);
}

void Register::apply(std::size_t atom, const LocalOp& op) {
  if (op.dim() != dims_.at(atom)) throw std::logic_error("Register::apply: operator dimension mismatch");
  if (lost_[atom]) return;
  for_each_fiber(atom, [&](Complex* v, std::size_t stride) { op.apply_strided(v, stride); });
}

void Register::apply_pair_phase(std::size_t a, std::size_t b, const Complex (&phases)[2][2]) {
  const std::size_t half_a = dims_.at(a) / 2;
  const std::size_t half_b = dims_.at(b) / 2;
  for (std::size_t j = 0; j < amp_.size(); ++j) {
    const std::size_t la = ((j / strides_[a]) % dims_[a]) / half_a;
    const std::size_t lb = ((j / strides_[b]) % dims_[b]) / half_b;
    amp_[j] *= phases[la][lb];
  }
}

void Register::apply_raising(std::size_t atom) {
  if (lost_.at(atom)) return;
  const int nm = n_max(atom);
  const auto levels = static_cast<std::size_t>(nm + 1);
  double edge = 0.0;
  for_each_fiber(atom, [&](Complex* v, std::size_t stride) {
    for (std::size_t lvl = 0; lvl < 2; ++lvl) edge += std::norm(v[(lvl * levels + levels - 1) * stride]);
  });
  const auto pops = local_populations(atom);
  double mean_weight = 0.0;
  for (std::size_t lvl = 0; lvl < 2; ++lvl)
    for (int n = 0; n < nm; ++n) mean_weight += (n + 1) * pops[lvl * levels + static_cast<std::size_t>(n)];
  if (edge > kTruncationThreshold * norm_squared())
    throw TruncationError("heating kick would push population above n_max = " + std::to_string(nm));
  if (mean_weight <= 0.0) throw NumericError("gates-channels", "heating kick on an empty state");
  const double scale = 1.0 / std::sqrt(mean_weight / norm_squared());
  for_each_fiber(atom, [&](Complex* v, std::size_t stride) {
    for (std::size_t lvl = 0; lvl < 2; ++lvl) {
      for (int n = nm; n >= 1; --n) {
        const std::size_t to = (lvl * levels + static_cast<std::size_t>(n)) * stride;
        const std::size_t from = (lvl * levels + static_cast<std::size_t>(n - 1)) * stride;
        v[to] = v[from] * std::sqrt(static_cast<double>(n)) * scale;
      }
      v[lvl * levels * stride] = 0.0;
    }
  });
}

std::vector<double> Register::local_populations(std::size_t atom) const {
  std::vector<double> pops(dims_.at(atom), 0.0);
  for_each_fiber(atom, [&](const Complex* v, std::size_t stride) {
    for (std::size_t k = 0; k < pops.size(); ++k) pops[k] += std::norm(v[k * stride]);
  });
  return pops;
}

double Register::electronic_population(std::size_t atom, ElectronicLevel level) const {
  if (level == ElectronicLevel::Rydberg) return 0.0;
  const auto pops = local_populations(atom);
  const std::size_t half = pops.size() / 2;
  const std::size_t start = level == ElectronicLevel::Up ? half : 0;
  double s = 0.0;
  for (std::size_t k = start; k < start + half; ++k) s += pops[k];
  return s;
}

std::vector<double> Register::motional_distribution(std::size_t atom) const {
  const auto pops = local_populations(atom);
  const std::size_t half = pops.size() / 2;
  std::vector<double> out(half);
  for (std::size_t n = 0; n < half; ++n) out[n] = pops[n] + pops[half + n];
  return out;
}

void Register::project_local(std::size_t atom, const std::vector<bool>& keep) {
  double kept = 0.0;
  for_each_fiber(atom, [&](Complex* v, std::size_t stride) {
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if (keep[k])
        kept += std::norm(v[k * stride]);
      else
        v[k * stride] = 0.0;
    }
  });
  if (kept <= 0.0) throw NumericError("gates-channels", "projection onto a zero-probability outcome");
  const double scale = 1.0 / std::sqrt(kept);
  for (auto& x : amp_) x *= scale;
}

ElectronicLevel Register::measure_electronic(std::size_t atom, Rng& rng) {
  const double p_down = electronic_population(atom, ElectronicLevel::Down) / norm_squared();
  const bool down = uniform01(rng) < p_down;
  const std::size_t half = dims_[atom] / 2;
  std::vector<bool> keep(dims_[atom]);
  for (std::size_t k = 0; k < keep.size(); ++k) keep[k] = (k < half) == down;
  project_local(atom, keep);
  return down ? ElectronicLevel::Down : ElectronicLevel::Up;
}

int Register::measure_motional(std::size_t atom, Rng& rng) {
  auto dist = motional_distribution(atom);
  const double total = norm_squared();
  for (auto& p : dist) p /= total;
  const int n = sample_index(dist, rng);
  const std::size_t half = dims_[atom] / 2;
  std::vector<bool> keep(dims_[atom]);
  for (std::size_t k = 0; k < keep.size(); ++k) keep[k] = static_cast<int>(k % half) == n;
  project_local(atom, keep);
  return n;
}

void Register::mark_lost(std::size_t atom, Rng& rng) {
  auto pops = local_populations(atom);
  const double total = norm_squared();
  for (auto& p : pops) p /= total;
  const auto k = static_cast<std::size_t>(sample_index(pops, rng));
  std::vector<bool> keep(dims_[atom], false);
  keep[k] = true;
  project_local(atom, keep);
  lost_[atom] = true;
}

void Register::replace(std::size_t atom, const HybridAtomState& state, Rng& rng) {
  if (state.dim() != dims_.at(atom)) throw ConfigError("register", "replacement atom has a different n_max");
  auto pops = local_populations(atom);
  const double total = norm_squared();
  for (auto& p : pops) p /= total;
  const auto k = static_cast<std::size_t>(sample_index(pops, rng));
  std::vector<bool> keep(dims_[atom], false);
  keep[k] = true;
  project_local(atom, keep);
  const auto a = state.amplitudes();
  for_each_fiber(atom, [&](Complex* v, std::size_t stride) {
    const Complex c = v[k * stride];
    for (std::size_t j = 0; j < a.size(); ++j) v[j * stride] = c * a[j];
  });
  lost_[atom] = state.lost();
}

Eigen::MatrixXcd Register::reduced_density(std::size_t atom) const {
  const auto d = static_cast<Eigen::Index>(dims_.at(atom));
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
  for_each_fiber(atom, [&](const Complex* v, std::size_t stride) {
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        rho(i, j) += v[static_cast<std::size_t>(i) * stride] * std::conj(v[static_cast<std::size_t>(j) * stride]);
  });
  return rho / norm_squared();
}

HybridAtomState Register::atom_state(std::size_t atom) const {
  const Eigen::MatrixXcd rho = reduced_density(atom);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
  const Eigen::Index top = rho.rows() - 1;
  if (es.eigenvalues()(top) < 1.0 - 1e-9)
    throw NumericError("gates-channels", "atom is entangled with the rest of the register");
  Eigen::VectorXcd v = es.eigenvectors().col(top);
  // Fix the global phase so the largest component is real and positive.
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  v *= std::conj(v(imax)) / std::abs(v(imax));
  HybridAtomState out(n_max(atom));
  for (Eigen::Index i = 0; i < v.size(); ++i) out.amplitudes()[static_cast<std::size_t>(i)] = v(i);
  out.set_lost(lost_[atom]);
  return out;
}

void validate(const GateErrorSpec& s) {
  auto prob = [](double p, const char* key) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(key, "probability must lie in [0, 1]");
  };
  prob(s.cz_phase_error_prob, "cz_phase_error_prob");
  prob(s.cz_loss_prob, "cz_loss_prob");
  if (s.cz_phase_error_prob + s.cz_loss_prob > 1.0)
    throw ConfigError("cz_phase_error_prob", "CZ error probabilities sum above one");
  if (!std::isfinite(s.cz_single_atom_phase)) throw ConfigError("cz_single_atom_phase", "must be finite");
  if (!(s.sq_over_rotation_sigma >= 0.0)) throw ConfigError("sq_over_rotation_sigma", "must be non-negative");
}

GateContext::GateContext(const GateErrorSpec& spec, Rng& rng) : spec_(spec), rng_(rng) {
  validate(spec_);
  if (spec_.sq_over_rotation_sigma > 0.0 && !spec_.sq_jitter_per_gate)
    shot_over_rotation_ = normal(rng_, 0.0, spec_.sq_over_rotation_sigma);
}

double GateContext::next_over_rotation() {
  if (spec_.sq_over_rotation_sigma <= 0.0) return 0.0;
  const double eps = spec_.sq_jitter_per_gate ? normal(rng_, 0.0, spec_.sq_over_rotation_sigma) : shot_over_rotation_;
  return eps / (constants::pi / 2.0);
}

LocalOp rotation_op(double axis_phase, double angle, int n_max) {
  const auto levels = static_cast<std::size_t>(n_max + 1);
  LocalOp op(2 * levels);
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  const Complex i{0.0, 1.0};
  const std::array<Complex, 4> m{Complex{c}, -i * std::polar(s, -axis_phase), -i * std::polar(s, axis_phase),
                                 Complex{c}};
  for (std::size_t n = 0; n < levels; ++n) op.set_pair(n, levels + n, m);
  return op;
}

LocalOp local_z_op(double phi, int n_max) {
  const auto levels = static_cast<std::size_t>(n_max + 1);
  LocalOp op(2 * levels);
  for (std::size_t n = 0; n < levels; ++n) op.set_single(levels + n, std::polar(1.0, phi));
  return op;
}

void apply_rotation(Register& reg, std::size_t atom, double axis_phase, double angle, GateContext& ctx) {
  if (reg.lost(atom)) return;
  const double actual = angle * (1.0 + ctx.next_over_rotation());
  reg.apply(atom, rotation_op(axis_phase, actual, reg.n_max(atom)));
}

void apply_local_z(Register& reg, std::size_t atom, double phi) {
  reg.apply(atom, local_z_op(phi, reg.n_max(atom)));
}

namespace {

void ideal_cz(Register& reg, std::size_t a, std::size_t b, double theta) {
  const bool pa = !reg.lost(a);
  const bool pb = !reg.lost(b);
  const Complex e = std::polar(1.0, theta);
  // Only present atoms pick up the single-atom phase; the -1 needs both.
  const Complex fa = pa ? e : Complex{1.0};
  const Complex fb = pb ? e : Complex{1.0};
  const Complex both = (pa && pb) ? -fa * fb : fa * fb;
  const Complex phases[2][2] = {{1.0, fb}, {fa, both}};
  reg.apply_pair_phase(a, b, phases);
}

}  // namespace

CzOutcome apply_cz(Register& reg, std::size_t a, std::size_t b, GateContext& ctx) {
  if (reg.lost(a) || reg.lost(b)) {
    ideal_cz(reg, a, b, ctx.spec().cz_single_atom_phase);
    ctx.record("cz_vacuous");
    return CzOutcome::Vacuous;
  }
  const double u = uniform01(ctx.rng());
  const auto& spec = ctx.spec();
  if (u < spec.cz_loss_prob) {
    const std::size_t victim = uniform01(ctx.rng()) < 0.5 ? a : b;
    reg.mark_lost(victim, ctx.rng());
    ctx.record(victim == a ? "cz_loss_first" : "cz_loss_second");
    return CzOutcome::Loss;
  }
  ideal_cz(reg, a, b, spec.cz_single_atom_phase);
  if (u < spec.cz_loss_prob + spec.cz_phase_error_prob) {
    const std::size_t victim = uniform01(ctx.rng()) < 0.5 ? a : b;
    apply_local_z(reg, victim, constants::pi);
    ctx.record(victim == a ? "cz_phase_error_first" : "cz_phase_error_second");
    return CzOutcome::PhaseError;
  }
  return CzOutcome::Ideal;
}

void validate(const ImagingSpec& s) {
  if (!(s.bright_std > 0.0) || !(s.dark_std > 0.0)) throw ConfigError("imaging", "standard deviations must be positive");
  if (!std::isfinite(s.bright_mean) || !std::isfinite(s.dark_mean)) throw ConfigError("imaging", "means must be finite");
  if (!(s.bright_loss_prob >= 0.0 && s.bright_loss_prob <= 1.0))
    throw ConfigError("bright_loss_prob", "probability must lie in [0, 1]");
  if (!(s.unshelved_loss_prob >= 0.0 && s.unshelved_loss_prob <= 1.0))
    throw ConfigError("unshelved_loss_prob", "probability must lie in [0, 1]");
}

ImageResult image(Register& reg, std::size_t atom, const ImagingSpec& spec, Rng& rng) {
  ImageResult r;
  if (!reg.lost(atom) && reg.measure_electronic(atom, rng) == ElectronicLevel::Down) {
    r.bright = true;
    r.signal = normal(rng, spec.bright_mean, spec.bright_std);
    if (uniform01(rng) < spec.bright_loss_prob) reg.mark_lost(atom, rng);
    return r;
  }
  r.signal = normal(rng, spec.dark_mean, spec.dark_std);
  return r;
}

bool expose(Register& reg, std::size_t atom, const ImagingSpec& spec, Rng& rng) {
  if (reg.lost(atom)) return false;
  if (reg.measure_electronic(atom, rng) == ElectronicLevel::Down && uniform01(rng) < spec.unshelved_loss_prob) {
    reg.mark_lost(atom, rng);
    return true;
  }
  return false;
}

bool pushout(Register& reg, std::size_t atom, Rng& rng) {
  if (reg.lost(atom)) return false;
  if (reg.measure_electronic(atom, rng) == ElectronicLevel::Down) {
    reg.mark_lost(atom, rng);
    return true;
  }
  return false;
}

}  // namespace tweezersim
