#include "piw/pilotsim.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <deque>
#include <future>
#include <numbers>
#include <random>
#include <thread>

#include "piw/error.hpp"

namespace piw::sim {

std::string_view workload_name(Workload w) { return w == Workload::low ? "low" : "high"; }

Workload parse_workload(std::string_view name) {
  if (name == "low") return Workload::low;
  if (name == "high") return Workload::high;
  fail(Errc::InvalidArgument, "unknown workload '" + std::string(name) + "'");
}

std::string_view condition_name(Condition c) { return c == Condition::NBack ? "NBack" : "NoNBack"; }

void SimScenario::validate() const {
  auto finite_positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!finite_positive(duration)) fail(Errc::InvalidArgument, "duration must be > 0");
  if (!(rate_hz >= 1.0 && rate_hz <= 1000.0)) fail(Errc::InvalidArgument, "rate_hz must lie in [1, 1000]");
  if (!finite_positive(delta_max)) fail(Errc::InvalidArgument, "delta_max must be > 0");
  if (!(stick_resolution >= 0.0) || !std::isfinite(stick_resolution)) {
    fail(Errc::InvalidArgument, "stick_resolution must be >= 0");
  }
  if (!finite_positive(plant.natural_frequency_hz) || !(plant.damping >= 0.0)) {
    fail(Errc::InvalidArgument, "plant parameters must be positive");
  }
  if (!(disturbance.sd >= 0.0) || !finite_positive(disturbance.time_constant) || !(disturbance.lateral_scale >= 0.0) ||
      !(disturbance.trial_variability >= 0.0)) {
    fail(Errc::InvalidArgument, "disturbance parameters out of range");
  }
  for (double g : {pilot.proportional_gain, pilot.derivative_gain}) {
    if (!std::isfinite(g)) fail(Errc::InvalidArgument, "pilot gains must be finite");
  }
  if (!(pilot.reaction_delay >= 0.0) || !(pilot.remnant_sd >= 0.0) || !finite_positive(pilot.remnant_time_constant) ||
      !(pilot.intermittency_threshold >= 0.0) || !(pilot.release_fraction >= 0.0 && pilot.release_fraction <= 1.0) ||
      !(pilot.trial_variability >= 0.0) || !(pilot.effort_coupling >= 0.0 && pilot.effort_coupling <= 1.0)) {
    fail(Errc::InvalidArgument, "pilot parameters out of range");
  }
  for (double m : {high_workload.lon_remnant, high_workload.lon_threshold, high_workload.lat_remnant}) {
    if (!(m >= 0.0) || !std::isfinite(m)) fail(Errc::InvalidArgument, "workload multipliers must be >= 0");
  }
}

namespace {

struct AxisLoop {
  double remnant_sd = 0.0;
  double threshold = 0.0;
  double disturbance_sd = 0.0;

  double error = 0.0;
  double error_rate = 0.0;
  double disturbance = 0.0;
  double remnant = 0.0;
  double stick = 0.0;
  bool engaged = false;
  std::deque<std::pair<double, double>> delayed;  // (e, e') awaiting perception
};

}  // namespace

telemetry::StickTrace simulate_trial(const SimScenario& s) {
  s.validate();
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double dt = 1.0 / s.rate_hz;
  const auto n = static_cast<std::size_t>(std::floor(s.duration * s.rate_hz + 1e-9)) + 1;
  const double omega = 2.0 * std::numbers::pi * s.plant.natural_frequency_hz;
  const double zeta = s.plant.damping;
  const double ou_decay = std::exp(-dt / s.disturbance.time_constant);
  const double ou_gain = std::sqrt(1.0 - ou_decay * ou_decay);
  const double rem_decay = std::exp(-dt / s.pilot.remnant_time_constant);
  const double rem_gain = std::sqrt(1.0 - rem_decay * rem_decay);
  const auto delay_steps = static_cast<std::size_t>(std::llround(s.pilot.reaction_delay * s.rate_hz));
  const bool high = s.workload == Workload::high;

  // Per-trial pilot state: two draws per axis, made before any dynamics so
  // they are stable under changes to the loop. The shared effort draw raises
  // remnant and lowers the engagement threshold together.
  std::array<AxisLoop, 2> axes;
  for (std::size_t a = 0; a < 2; ++a) {
    auto& ax = axes[a];
    const double effort = gauss(rng);
    const double own = gauss(rng);
    const double rho = s.pilot.effort_coupling;
    const double rem_jitter = std::exp(s.pilot.trial_variability * effort);
    const double thr_jitter =
        std::exp(-s.pilot.trial_variability * (rho * effort + std::sqrt(1.0 - rho * rho) * own));
    ax.remnant_sd = s.pilot.remnant_sd * rem_jitter;
    ax.threshold = s.pilot.intermittency_threshold * thr_jitter;
    const double turbulence = std::exp(s.disturbance.trial_variability * gauss(rng));
    ax.disturbance_sd = s.disturbance.sd * turbulence * (a == 0 ? 1.0 : s.disturbance.lateral_scale);
    if (high) {
      if (a == 0) {
        ax.remnant_sd *= s.high_workload.lon_remnant;
        ax.threshold *= s.high_workload.lon_threshold;
      } else {
        ax.remnant_sd *= s.high_workload.lat_remnant;
      }
    }
    ax.delayed.assign(delay_steps + 1, {0.0, 0.0});
  }

  telemetry::StickTrace trace;
  trace.t0 = 0.0;
  trace.dt = dt;
  trace.lon.resize(n);
  trace.lat.resize(n);
  const double bound = 10.0 * s.delta_max;

  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t a = 0; a < 2; ++a) {
      auto& ax = axes[a];
      ax.disturbance = ou_decay * ax.disturbance + ax.disturbance_sd * ou_gain * gauss(rng);
      ax.remnant = rem_decay * ax.remnant + rem_gain * gauss(rng);

      const auto [seen_e, seen_rate] = ax.delayed.front();
      if (ax.engaged) {
        if (std::fabs(seen_e) < s.pilot.release_fraction * ax.threshold) ax.engaged = false;
      } else if (std::fabs(seen_e) > ax.threshold) {
        ax.engaged = true;
      }
      if (ax.engaged) {
        ax.stick = s.pilot.proportional_gain * seen_e + s.pilot.derivative_gain * seen_rate +
                   ax.remnant_sd * ax.remnant;
      }
      double logged = ax.stick;
      if (s.stick_resolution > 0.0) logged = std::round(logged / s.stick_resolution) * s.stick_resolution;
      if (!(std::fabs(logged) <= bound)) {
        fail(Errc::UnstableLoop, "stick deflection exceeded 10 * delta_max at sample " + std::to_string(k));
      }
      (a == 0 ? trace.lon : trace.lat)[k] = logged;

      const double accel = -2.0 * zeta * omega * ax.error_rate - omega * omega * ax.error +
                           omega * omega * (ax.disturbance - ax.stick);
      ax.error_rate += accel * dt;
      ax.error += ax.error_rate * dt;
      ax.delayed.pop_front();
      ax.delayed.emplace_back(ax.error, ax.error_rate);
    }
  }
  return trace;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ index);
}

std::vector<BatchTrial> simulate_batch(const SimScenario& base, std::size_t replicates, std::uint64_t seed,
                                       unsigned threads) {
  base.validate();
  std::vector<BatchTrial> out(2 * replicates);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].workload = i < replicates ? Workload::low : Workload::high;
    out[i].replicate = i % replicates;
    out[i].seed = derive_seed(seed, out[i].workload == Workload::low ? 1 : 2, out[i].replicate);
  }
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < out.size(); i = next++) {
      SimScenario s = base;
      s.workload = out[i].workload;
      s.seed = out[i].seed;
      out[i].trace = simulate_trial(s);
    }
  };
  std::vector<std::future<void>> jobs;
  for (unsigned t = 1; t < threads; ++t) jobs.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& j : jobs) j.get();
  return out;
}

// ---------------------------------------------------------------------------

void NBackConfig::validate() const {
  if (n_back < 1) fail(Errc::InvalidArgument, "n_back must be >= 1");
  if (!(repetition_probability > 0.0 && repetition_probability < 1.0)) {
    fail(Errc::InvalidArgument, "repetition_probability must lie in (0, 1)");
  }
  if (!(interval > 0.0)) fail(Errc::InvalidArgument, "interval must be > 0");
  std::string letters = alphabet;
  std::sort(letters.begin(), letters.end());
  letters.erase(std::unique(letters.begin(), letters.end()), letters.end());
  if (letters.size() < 2) fail(Errc::AlphabetTooSmall, "alphabet needs >= 2 distinct letters");
  if (letters.size() != alphabet.size()) fail(Errc::InvalidArgument, "alphabet letters must be distinct");
}

std::vector<Stimulus> generate_nback_sequence(const NBackConfig& cfg, std::size_t n_stimuli) {
  cfg.validate();
  if (n_stimuli <= cfg.n_back) {
    fail(Errc::InvalidArgument, "need more than n_back = " + std::to_string(cfg.n_back) + " stimuli");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any(0, cfg.alphabet.size() - 1);
  std::uniform_int_distribution<std::size_t> other(0, cfg.alphabet.size() - 2);

  std::vector<Stimulus> seq(n_stimuli);
  for (std::size_t i = 0; i < n_stimuli; ++i) {
    seq[i].time = static_cast<double>(i) * cfg.interval;
    if (i < cfg.n_back) {
      seq[i].letter = cfg.alphabet[any(rng)];
      continue;
    }
    const char reference = seq[i - cfg.n_back].letter;
    if (unit(rng) < cfg.repetition_probability) {
      seq[i].letter = reference;
    } else {
      // Uniform over the alphabet minus the reference letter.
      const auto ref_pos = cfg.alphabet.find(reference);
      auto pick = other(rng);
      if (pick >= ref_pos) ++pick;
      seq[i].letter = cfg.alphabet[pick];
    }
    seq[i].is_target = seq[i].letter == reference;
  }
  return seq;
}

double score_nback(std::span<const Response> responses, std::span<const Stimulus> sequence, std::size_t n_back,
                   double interval) {
  if (sequence.empty()) fail(Errc::InvalidArgument, "empty stimulus sequence");
  if (sequence.size() <= n_back) fail(Errc::InvalidArgument, "no scorable stimuli");
  std::vector<Response> presses;
  for (const auto& r : responses) {
    if (r.pressed) presses.push_back(r);
  }
  std::sort(presses.begin(), presses.end(), [](const Response& a, const Response& b) { return a.time < b.time; });

  std::size_t correct = 0;
  std::size_t scorable = 0;
  for (std::size_t i = n_back; i < sequence.size(); ++i) {
    const double start = sequence[i].time;
    const auto it = std::lower_bound(presses.begin(), presses.end(), start,
                                     [](const Response& r, double t) { return r.time < t; });
    const bool pressed = it != presses.end() && it->time < start + interval;
    ++scorable;
    if (pressed == sequence[i].is_target) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scorable);
}

TrialPlan randomize_trials(std::size_t n_trials, std::size_t block_size, std::uint64_t seed) {
  if (block_size == 0 || block_size % 2 != 0) fail(Errc::IndivisibleBlocks, "block size must be even and > 0");
  if (n_trials == 0 || n_trials % block_size != 0) {
    fail(Errc::IndivisibleBlocks, std::to_string(n_trials) + " trials do not divide into blocks of " +
                                      std::to_string(block_size));
  }
  std::mt19937_64 rng(seed);
  TrialPlan plan;
  plan.block_size = block_size;
  plan.order.reserve(n_trials);
  std::vector<Condition> block(block_size);
  for (std::size_t b = 0; b < n_trials / block_size; ++b) {
    for (std::size_t i = 0; i < block_size; ++i) block[i] = i < block_size / 2 ? Condition::NBack : Condition::NoNBack;
    std::shuffle(block.begin(), block.end(), rng);
    plan.order.insert(plan.order.end(), block.begin(), block.end());
  }
  return plan;
}

}  // namespace piw::sim
