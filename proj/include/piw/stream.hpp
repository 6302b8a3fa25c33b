#pragma once

// Sliding-window workload estimation over a live record feed.

#include <cstddef>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "piw/piwcore.hpp"
#include "piw/telemetry.hpp"
#include "piw/wlmodel.hpp"

namespace piw::stream {

enum class Warmup { suppress, partial };
Warmup parse_warmup(std::string_view name);
std::string_view warmup_name(Warmup w);

struct WindowConfig {
  double window = 30.0;
  double hop = 1.0;
  double rate_hz = 100.0;
  Warmup warmup = Warmup::suppress;
  telemetry::Interpolation interpolation = telemetry::Interpolation::linear;

  void validate() const;
};

struct WindowEstimate {
  double t_end = 0.0;
  core::AxisMetrics lon;
  core::AxisMetrics lat;
  std::optional<double> p_high;
  std::size_t samples_used = 0;
};

/// Immutable configuration shared by all sessions of a stream.
struct StreamContext {
  WindowConfig window;
  core::PIWConfig piw;
  std::shared_ptr<const wlmodel::LogisticModel> model;
  /// Used when no model is loaded. Mode `none` when neither is available.
  std::optional<wlmodel::ModelNormalization> normalization;

  /// Normalization in effect: the model's frozen constants take precedence.
  const wlmodel::ModelNormalization& effective_normalization() const;
  void validate() const;
};

/// Time tolerance for window boundaries, seconds.
inline constexpr double kBoundaryEpsilon = 1e-9;

/// Records of a time-sorted sequence with t_end - window <= t <= t_end.
std::span<const telemetry::Sample> select_window(std::span<const telemetry::Sample> sorted, double t_end,
                                                 double window);

/// Metrics for one window slice: resample to the configured rate, compute both
/// axes with the effective normalization, then p_high if a model is loaded.
/// Returns nullopt when the slice is too short to resample.
std::optional<WindowEstimate> evaluate_window(std::span<const telemetry::Sample> slice, double t_end,
                                              const StreamContext& ctx);

struct SessionCounters {
  std::size_t records = 0;
  std::size_t dropped = 0;
  std::size_t windows_emitted = 0;
  std::size_t windows_skipped = 0;
  std::size_t errors = 0;
};

/// One feed's state machine. Records must arrive with strictly increasing t;
/// others are counted as dropped and rejected with OutOfOrderRecord.
class Session {
 public:
  explicit Session(std::shared_ptr<const StreamContext> ctx);

  std::vector<WindowEstimate> ingest(const telemetry::Sample& record);

  const SessionCounters& counters() const { return counters_; }
  SessionCounters& counters() { return counters_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  double emission_time(std::size_t k) const;

  std::shared_ptr<const StreamContext> ctx_;
  std::deque<telemetry::Sample> buffer_;
  std::vector<telemetry::Sample> scratch_;
  bool started_ = false;
  double t_first_ = 0.0;
  double last_t_ = 0.0;
  std::size_t next_emission_ = 0;
  SessionCounters counters_;
};

std::string estimate_to_json(const WindowEstimate& e);
std::string summary_to_json(const SessionCounters& c);

/// Newline-delimited JSON protocol over a Session: one record per input line,
/// zero or more output lines per input line, and a summary at EOF.
class LineProtocol {
 public:
  explicit LineProtocol(std::shared_ptr<const StreamContext> ctx);

  std::vector<std::string> on_line(std::string_view line);
  std::string on_eof() const;
  const Session& session() const { return session_; }

 private:
  Session session_;
  std::size_t line_no_ = 0;
};

/// stdin/stdout pipeline mode.
void run_stdio(std::istream& in, std::ostream& out, std::shared_ptr<const StreamContext> ctx);

}  // namespace piw::stream
