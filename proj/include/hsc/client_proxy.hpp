#pragma once

// Mobile-host side of the split connection.
//
// Each browser request becomes a session with a persistent local leg and a
// sequence of remote legs to the gateway. The session table, the FIFO task
// queue and the interface view live behind one mutex (the serialized
// domain); transports drive remote legs through SessionRun and report the
// result back via handle_outcome().

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "hsc/policy.hpp"
#include "hsc/protocol.hpp"
#include "hsc/sensing.hpp"

namespace hsc {

struct SessionId {
  std::uint64_t value = 0;
  friend auto operator<=>(const SessionId&, const SessionId&) = default;
};

std::string to_string(SessionId id);

enum class SessionState { queued, active, interrupted, completed, failed };

const char* to_string(SessionState state) noexcept;

/// Connection back to the browser. Calls for one session never overlap.
class LocalLeg {
 public:
  virtual ~LocalLeg() = default;
  /// Called once, before the first body byte, with the full entity length
  /// when known.
  virtual void begin(std::optional<ByteCount> content_length) = 0;
  virtual void write(std::span<const std::byte> bytes) = 0;
  virtual void finish() = 0;
  virtual void abort(std::string_view reason) = 0;
};

/// In-memory local leg used by the simulator and tests.
class BufferLeg final : public LocalLeg {
 public:
  void begin(std::optional<ByteCount> content_length) override;
  void write(std::span<const std::byte> bytes) override;
  void finish() override;
  void abort(std::string_view reason) override;

  const Bytes& content() const noexcept { return content_; }
  bool begun() const noexcept { return begun_; }
  bool finished() const noexcept { return finished_; }
  bool aborted() const noexcept { return aborted_; }
  const std::string& abort_reason() const noexcept { return abort_reason_; }
  std::optional<ByteCount> announced_length() const noexcept { return announced_; }

 private:
  Bytes content_;
  std::optional<ByteCount> announced_;
  bool begun_ = false;
  bool finished_ = false;
  bool aborted_ = false;
  std::string abort_reason_;
};

enum class RecoveryMode {
  packet,   // resume from the delivered byte count
  session,  // restart from byte 0 on every retry (baseline)
};

struct ProxyConfig {
  std::string gateway_base = "http://127.0.0.1:8080/scripts/dis.dll";
  std::size_t workers = 4;
  /// Recoverable failures tolerated per session; unset means unlimited.
  std::optional<unsigned> retry_budget;
  bool preemption_enabled = true;
  RecoveryMode recovery = RecoveryMode::packet;
  HandoffDefaults handoff;
  /// Use the throughput measured on the current remote leg (after at least
  /// this many seconds of data) instead of its nameplate capacity.
  double min_measurement_window = 1.0;
};

/// Outcome codes follow the transport error taxonomy: 0 is a completed
/// run, FailureCause values are transport failures or the preemptive
/// marker, kUpstreamFailure is an unrecoverable gateway error status.
struct RunOutcome {
  static constexpr int kCompleted = 0;
  static constexpr int kUpstreamFailure = -2;

  int code = kCompleted;
  std::string detail;

  static RunOutcome completed() { return {kCompleted, {}}; }
  static RunOutcome preemptive() {
    return {static_cast<int>(FailureCause::preemptive_marker), {}};
  }
  static RunOutcome failure(FailureCause cause, std::string detail = {}) {
    return {static_cast<int>(cause), std::move(detail)};
  }
  static RunOutcome upstream(std::string detail) {
    return {kUpstreamFailure, std::move(detail)};
  }
};

enum class SchedulingAction {
  release,                // completed
  requeue,                // preempted; runs again on the selected interface
  requeue_await_network,  // recoverable failure
  fail,                   // retry budget exhausted or unrecoverable
  none,                   // unknown code, state untouched
};

const char* to_string(SchedulingAction action) noexcept;

struct SessionRecord {
  SessionId session_id;
  std::string origin_url;
  ByteCount bytes_delivered = 0;
  SessionState state = SessionState::queued;
  double created_at = 0.0;
  double last_progress_at = 0.0;
  std::optional<std::string> current_interface;

  std::optional<ByteCount> total_size;
  unsigned failures = 0;
  unsigned runs = 0;
  unsigned preemptions = 0;
  ByteCount duplicate_bytes = 0;
  bool local_closed_early = false;
  std::optional<double> completed_at;
  std::optional<HandoffDecision> last_decision;
};

struct Dispatch {
  SessionId session_id;
  InterfaceDescriptor iface;
  ByteCount offset = 0;
  std::string request;
};

class ClientProxy {
 public:
  using Clock = std::function<double()>;

  explicit ClientProxy(ProxyConfig config, Clock clock = {});

  const ProxyConfig& config() const noexcept { return config_; }

  /// Creates a queued session. Malformed requests are reported on the leg
  /// and rethrown; no record is created for them.
  SessionId accept_request(const OriginRequest& origin, std::shared_ptr<LocalLeg> leg);
  SessionId accept_raw(std::string_view raw_request, std::shared_ptr<LocalLeg> leg);

  /// Replaces the interface view (startup / tests). Interfaces with
  /// available == false are registered but not usable.
  void set_interfaces(const std::vector<InterfaceDescriptor>& interfaces);

  /// Processes one poll snapshot: diffs it against the previous one,
  /// applies the resulting events, re-arms interfaces that a failure had
  /// marked suspect, and evaluates preemption. Returns every event emitted,
  /// including preemptive_candidate.
  std::vector<NetworkEvent> on_poll(const std::vector<InterfaceDescriptor>& snapshot);

  /// Applies one event. connected requires a registered descriptor.
  std::vector<NetworkEvent> on_network_event(const NetworkEvent& event);

  /// Next session to run, FIFO, on the policy-selected interface; nullopt
  /// when the worker limit is reached, nothing is queued or no interface is
  /// usable.
  std::optional<Dispatch> next_dispatch();

  /// Blocking variant for worker threads.
  std::optional<Dispatch> wait_dispatch(std::stop_token stop);

  /// Called by SessionRun. Returns true when a preemptive handoff was
  /// requested for the session.
  bool deliver(SessionId id, ByteCount stream_offset, std::span<const std::byte> body);
  void announce_length(SessionId id, ByteCount total);

  SchedulingAction handle_outcome(SessionId id, const RunOutcome& outcome);

  bool user_perceived_continuity(SessionId id) const;

  SessionRecord record(SessionId id) const;
  std::vector<SessionRecord> records() const;
  std::vector<SessionId> pending() const;
  std::size_t active_count() const;
  bool all_terminal() const;

  /// Replaces the bandwidth hook used by the preemption test.
  void set_bandwidth_estimator(BandwidthEstimator estimator);
  HandoffHistory handoff_history() const;

  /// Wakes blocked wait_dispatch() callers (shutdown).
  void notify_all();

 private:
  struct InterfaceState {
    InterfaceDescriptor desc;
    bool present = false;
    bool suspect = false;
  };

  struct Session {
    SessionRecord rec;
    OriginRequest request;
    std::shared_ptr<LocalLeg> leg;
    Splicer splicer{false};
    bool leg_begun = false;
    bool preempt_requested = false;
    std::optional<std::string> preempt_target;
    // current run
    ByteCount run_body_bytes = 0;
    std::optional<double> run_first_byte_at;
    // pending handoff measurement: (from interface, started at)
    std::optional<std::pair<InterfaceDescriptor, double>> handoff_started;
  };

  double now() const;
  Session& get(SessionId id);
  const Session& get(SessionId id) const;
  std::vector<InterfaceDescriptor> usable_locked() const;
  std::vector<NetworkEvent> apply_event_locked(const NetworkEvent& event);
  std::vector<NetworkEvent> evaluate_preemption_locked();
  std::optional<Dispatch> next_dispatch_locked();
  double estimate_bandwidth_locked(const Session& s, const InterfaceDescriptor& iface) const;

  ProxyConfig config_;
  Clock clock_;
  mutable std::mutex mu_;
  std::condition_variable_any cv_;
  std::map<SessionId, Session> sessions_;
  std::deque<SessionId> pending_;
  std::map<std::string, InterfaceState> interfaces_;
  std::vector<InterfaceDescriptor> last_snapshot_;
  std::size_t active_ = 0;
  std::uint64_t next_id_ = 1;
  HandoffHistory history_;
  BandwidthEstimator estimator_override_;
};

/// One remote leg of a session: parses the gateway response and feeds body
/// bytes to the proxy. Mirrors the read loop of the event-capturing scheme:
/// after every delivered chunk, a pending preemption ends the run.
class SessionRun {
 public:
  SessionRun(ClientProxy& proxy, Dispatch dispatch);

  const Dispatch& dispatch() const noexcept { return dispatch_; }
  const std::string& request() const noexcept { return dispatch_.request; }

  /// Returns an outcome once the run is over (body complete, preemption,
  /// or an error status from the gateway).
  std::optional<RunOutcome> on_bytes(std::span<const std::byte> bytes);
  /// Remote side closed the connection.
  RunOutcome on_eof();

  ByteCount body_bytes() const noexcept { return body_received_; }
  bool header_done() const noexcept { return header_done_; }
  bool finished() const noexcept { return finished_; }

 private:
  std::optional<RunOutcome> parse_header();

  ClientProxy& proxy_;
  Dispatch dispatch_;
  std::string header_buf_;
  bool header_done_ = false;
  bool finished_ = false;
  int status_ = 0;
  std::optional<ByteCount> content_length_;
  ByteCount body_received_ = 0;
};

}  // namespace hsc
