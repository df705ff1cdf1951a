#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tweezersim/core_state.hpp"
#include "tweezersim/local_op.hpp"
#include "tweezersim/rng.hpp"

namespace tweezersim {

/// Joint pure state of a few atoms (data + ancilla). Atom 0 is the most
/// significant factor of the joint index. A lost atom keeps a collapsed basis
/// state as its factor and is skipped by every operation.
class Register {
 public:
  explicit Register(const std::vector<HybridAtomState>& atoms);

  std::size_t size() const noexcept { return dims_.size(); }
  std::size_t local_dim(std::size_t atom) const { return dims_.at(atom); }
  int n_max(std::size_t atom) const { return static_cast<int>(dims_.at(atom) / 2) - 1; }
  bool lost(std::size_t atom) const { return lost_.at(atom); }
  std::span<const Complex> amplitudes() const noexcept { return amp_; }

  double norm_squared() const;

  /// Applies a single-atom operator. No-op on a lost atom.
  void apply(std::size_t atom, const LocalOp& op);
  /// Multiplies each joint amplitude by phases[level_a][level_b] (levels Down = 0, Up = 1).
  void apply_pair_phase(std::size_t a, std::size_t b, const Complex (&phases)[2][2]);
  /// Normalized a^dagger jump on one atom's motion.
  void apply_raising(std::size_t atom);

  /// Marginal populations over the local (level, n) basis of one atom.
  std::vector<double> local_populations(std::size_t atom) const;
  double electronic_population(std::size_t atom, ElectronicLevel level) const;
  std::vector<double> motional_distribution(std::size_t atom) const;

  /// Born-rule projective measurement of the electronic level.
  ElectronicLevel measure_electronic(std::size_t atom, Rng& rng);
  /// Born-rule projective measurement of the motional number.
  int measure_motional(std::size_t atom, Rng& rng);

  /// Collapses the atom onto a sampled local basis state and flags it lost.
  void mark_lost(std::size_t atom, Rng& rng);
  /// Discards the atom (collapse) and puts `state` in its place.
  void replace(std::size_t atom, const HybridAtomState& state, Rng& rng);

  Eigen::MatrixXcd reduced_density(std::size_t atom) const;
  /// The atom's pure state; throws if it is entangled with the others.
  HybridAtomState atom_state(std::size_t atom) const;

 private:
  template <class F>
  void for_each_fiber(std::size_t atom, F&& f);
  template <class F>
  void for_each_fiber(std::size_t atom, F&& f) const;
  void project_local(std::size_t atom, const std::vector<bool>& keep);

  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::vector<bool> lost_;
  std::vector<Complex> amp_;
};

struct GateErrorSpec {
  double cz_phase_error_prob = 0.006;
  double cz_loss_prob = 0.002;
  /// Single-atom phase imprinted by the Rydberg pulse on each |up> atom.
  double cz_single_atom_phase = 0.0;
  /// Over-rotation jitter (rad, one standard deviation on a pi/2 pulse).
  double sq_over_rotation_sigma = 0.0;
  /// Redraw the over-rotation for every gate instead of once per shot.
  bool sq_jitter_per_gate = false;

  static GateErrorSpec ideal() { return GateErrorSpec{0.0, 0.0, 0.0, 0.0, false}; }
};

void validate(const GateErrorSpec& spec);

/// Shot-local gate environment: error parameters, the shot RNG, the
/// shot-constant over-rotation, and the event log.
class GateContext {
 public:
  GateContext(const GateErrorSpec& spec, Rng& rng);

  const GateErrorSpec& spec() const noexcept { return spec_; }
  Rng& rng() noexcept { return rng_; }
  /// Relative over-rotation to apply to the next rotation.
  double next_over_rotation();
  void record(std::string event) { events_.push_back(std::move(event)); }
  const std::vector<std::string>& events() const noexcept { return events_; }

 private:
  GateErrorSpec spec_;
  Rng& rng_;
  double shot_over_rotation_ = 0.0;
  std::vector<std::string> events_;
};

/// exp(-i theta (cos phi sigma_x + sin phi sigma_y) / 2) on the electronic
/// levels of every Fock manifold, basis order (down, up).
LocalOp rotation_op(double axis_phase, double angle, int n_max);
/// |up> amplitude multiplied by e^{i phi}.
LocalOp local_z_op(double phi, int n_max);

void apply_rotation(Register& reg, std::size_t atom, double axis_phase, double angle, GateContext& ctx);
void apply_local_z(Register& reg, std::size_t atom, double phi);

enum class CzOutcome { Ideal, PhaseError, Loss, Vacuous };

/// Ideal branch: -1 on |up, up> together with the configured single-atom
/// phase. Error branches: Z on a uniformly chosen atom, or loss of one.
CzOutcome apply_cz(Register& reg, std::size_t a, std::size_t b, GateContext& ctx);

struct ImagingSpec {
  double bright_mean = 2.5631031310892007;  // single-round F = 0.90 against the dark default
  double bright_std = 1.0;
  double dark_mean = 0.0;
  double dark_std = 1.0;
  double bright_loss_prob = 0.8;
  double unshelved_loss_prob = 0.8;
};

void validate(const ImagingSpec& spec);

struct ImageResult {
  double signal = 0.0;
  bool bright = false;
};

/// Fast imaging of one atom: |down> scatters (bright draw, then loss with
/// bright_loss_prob); |up>, lost, or absent atoms give a dark draw.
ImageResult image(Register& reg, std::size_t atom, const ImagingSpec& spec, Rng& rng);

/// The imaging beam seen by a data atom: collapses its electronic state and
/// removes residual |down> population with unshelved_loss_prob. Returns true
/// if the atom was lost.
bool expose(Register& reg, std::size_t atom, const ImagingSpec& spec, Rng& rng);

/// Resonant removal of |down> population. Returns true if the atom was lost.
bool pushout(Register& reg, std::size_t atom, Rng& rng);

}  // namespace tweezersim
