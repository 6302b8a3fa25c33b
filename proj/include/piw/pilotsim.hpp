#pragma once

// Synthetic experiment data: closed-loop stick traces under two workload
// levels, 2-back stimulus sequences with scoring, and block-randomized trial
// orders.
//
// The pilot model is deliberately non-physical. Per axis, a tracking error e
// follows  e'' + 2*zeta*w*e' + w^2*e = w^2*(disturbance - stick),  the
// disturbance being an Ornstein-Uhlenbeck process. The pilot sees e and e'
// after a reaction delay, engages when |e| exceeds an intermittency threshold
// and disengages below release_fraction * threshold. While engaged the stick
// follows a PD command plus low-pass filtered Gaussian remnant; while
// disengaged the stick is held. The logged stick is quantized to the sensor
// resolution.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "piw/telemetry.hpp"

namespace piw::sim {

enum class Workload { low, high };
std::string_view workload_name(Workload w);
Workload parse_workload(std::string_view name);

struct PlantParams {
  double natural_frequency_hz = 0.5;
  double damping = 0.7;
};

struct DisturbanceParams {
  double sd = 0.2;
  double time_constant = 2.0;
  double lateral_scale = 2.0;  // roll disturbances are stronger than pitch
  double trial_variability = 0.3;  // log-normal SD of the per-trial intensity multiplier
};

struct PilotParams {
  double proportional_gain = 1.0;
  double derivative_gain = 0.5;
  double reaction_delay = 0.2;
  double remnant_sd = 0.03;
  double remnant_time_constant = 0.3;
  double intermittency_threshold = 0.05;
  double release_fraction = 0.5;
  /// Log-normal SD of the per-trial multipliers on remnant and threshold.
  double trial_variability = 0.25;
  /// Correlation in [0, 1] between a higher remnant and a lower threshold.
  double effort_coupling = 0.8;
};

/// Multipliers applied when workload == high.
struct HighWorkloadEffect {
  double lon_remnant = 1.5;
  double lon_threshold = 1.3;
  double lat_remnant = 1.0;  // roll control unaffected unless set
};

struct SimScenario {
  double duration = 210.0;
  double rate_hz = 100.0;
  double delta_max = 1.0;
  double stick_resolution = 0.01;  // 0 disables quantization
  PlantParams plant;
  DisturbanceParams disturbance;
  PilotParams pilot;
  HighWorkloadEffect high_workload;
  Workload workload = Workload::low;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic in the scenario (including seed). Throws UnstableLoop when
/// |stick| exceeds 10 * delta_max.
telemetry::StickTrace simulate_trial(const SimScenario& s);

/// splitmix64 mix of (base, stream, index); used to derive replicate seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

struct BatchTrial {
  Workload workload = Workload::low;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  telemetry::StickTrace trace;
};

/// `replicates` low and `replicates` high trials from `base` (seed and
/// workload overridden), low trials first, each group ordered by replicate.
/// Replicates run on up to `threads` workers; the output order is fixed.
std::vector<BatchTrial> simulate_batch(const SimScenario& base, std::size_t replicates, std::uint64_t seed,
                                       unsigned threads = 0);

// --- N-back -------------------------------------------------------------

struct NBackConfig {
  std::size_t n_back = 2;
  double interval = 3.0;
  double repetition_probability = 0.25;
  std::string alphabet = "BCDFGHJKLMNPQRSTVWXZ";
  std::uint64_t seed = 0;

  void validate() const;
};

struct Stimulus {
  double time = 0.0;
  char letter = 'A';
  bool is_target = false;
};

std::vector<Stimulus> generate_nback_sequence(const NBackConfig& cfg, std::size_t n_stimuli);

struct Response {
  double time = 0.0;
  bool pressed = false;
};

/// Each stimulus at or after position n_back owns the response window
/// [time, time + interval). Accuracy = (hits + correct rejections) / scorable.
double score_nback(std::span<const Response> responses, std::span<const Stimulus> sequence,
                   std::size_t n_back = 2, double interval = 3.0);

// --- Trial order --------------------------------------------------------

enum class Condition { NBack, NoNBack };
std::string_view condition_name(Condition c);

struct TrialPlan {
  std::vector<Condition> order;
  std::size_t block_size = 4;
};

TrialPlan randomize_trials(std::size_t n_trials = 12, std::size_t block_size = 4, std::uint64_t seed = 0);

}  // namespace piw::sim
