#include "hsc/client_proxy.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <stdexcept>

namespace hsc {

std::string to_string(SessionId id) { return "s" + std::to_string(id.value); }

const char* to_string(SessionState state) noexcept {
  switch (state) {
    case SessionState::queued: return "queued";
    case SessionState::active: return "active";
    case SessionState::interrupted: return "interrupted";
    case SessionState::completed: return "completed";
    case SessionState::failed: return "failed";
  }
  return "unknown";
}

const char* to_string(SchedulingAction action) noexcept {
  switch (action) {
    case SchedulingAction::release: return "release";
    case SchedulingAction::requeue: return "requeue";
    case SchedulingAction::requeue_await_network: return "requeue_await_network";
    case SchedulingAction::fail: return "fail";
    case SchedulingAction::none: return "none";
  }
  return "unknown";
}

void BufferLeg::begin(std::optional<ByteCount> content_length) {
  begun_ = true;
  announced_ = content_length;
  if (content_length) content_.reserve(static_cast<std::size_t>(*content_length));
}

void BufferLeg::write(std::span<const std::byte> bytes) {
  content_.insert(content_.end(), bytes.begin(), bytes.end());
}

void BufferLeg::finish() { finished_ = true; }

void BufferLeg::abort(std::string_view reason) {
  aborted_ = true;
  abort_reason_ = std::string(reason);
}

ClientProxy::ClientProxy(ProxyConfig config, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)), history_(config_.handoff) {
  if (config_.workers == 0) throw std::invalid_argument("worker count must be positive");
  if (!clock_) {
    const auto start = std::chrono::steady_clock::now();
    clock_ = [start] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
  }
}

double ClientProxy::now() const { return clock_(); }

ClientProxy::Session& ClientProxy::get(SessionId id) {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw std::out_of_range("unknown session " + to_string(id));
  return it->second;
}

const ClientProxy::Session& ClientProxy::get(SessionId id) const {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw std::out_of_range("unknown session " + to_string(id));
  return it->second;
}

SessionId ClientProxy::accept_request(const OriginRequest& origin,
                                      std::shared_ptr<LocalLeg> leg) {
  if (origin.method != "GET") {
    if (leg) leg->abort("unsupported method");
    throw ProtocolError(ProtocolErrc::unsupported_method, "only GET is supported");
  }
  if (!is_absolute_url(origin.url)) {
    if (leg) leg->abort("malformed request");
    throw ProtocolError(ProtocolErrc::malformed_request, "origin URL must be absolute");
  }
  SessionId id;
  {
    std::lock_guard lock(mu_);
    id = SessionId{next_id_++};
    Session s;
    s.rec.session_id = id;
    s.rec.origin_url = origin.url;
    s.rec.created_at = now();
    s.rec.last_progress_at = s.rec.created_at;
    s.request = origin;
    s.leg = std::move(leg);
    sessions_.emplace(id, std::move(s));
    pending_.push_back(id);
  }
  cv_.notify_all();
  return id;
}

SessionId ClientProxy::accept_raw(std::string_view raw_request, std::shared_ptr<LocalLeg> leg) {
  OriginRequest origin;
  try {
    origin = parse_origin_request(raw_request);
  } catch (const ProtocolError& e) {
    if (leg) leg->abort(to_string(e.code()));
    throw;
  }
  return accept_request(origin, std::move(leg));
}

void ClientProxy::set_interfaces(const std::vector<InterfaceDescriptor>& interfaces) {
  {
    std::lock_guard lock(mu_);
    interfaces_.clear();
    for (const auto& d : interfaces) {
      validate(d);
      interfaces_[d.id] = InterfaceState{d, d.available, false};
    }
    last_snapshot_ = interfaces;
  }
  cv_.notify_all();
}

std::vector<InterfaceDescriptor> ClientProxy::usable_locked() const {
  std::vector<InterfaceDescriptor> out;
  for (const auto& [id, st] : interfaces_)
    if (st.present && !st.suspect) out.push_back(st.desc);
  return out;
}

std::vector<NetworkEvent> ClientProxy::on_poll(const std::vector<InterfaceDescriptor>& snapshot) {
  std::vector<NetworkEvent> emitted;
  {
    std::lock_guard lock(mu_);
    const double t = now();
    for (const auto& d : snapshot) {
      auto& st = interfaces_[d.id];
      st.desc = d;
    }
    auto events = poll_once(snapshot, last_snapshot_, t);
    last_snapshot_ = snapshot;

    // Interfaces still listed by the OS get another chance after a failure.
    bool rearmed = false;
    for (const auto& d : snapshot) {
      auto& st = interfaces_[d.id];
      if (d.available && st.suspect) {
        st.suspect = false;
        rearmed = true;
      }
    }
    for (const auto& ev : events) {
      auto more = apply_event_locked(ev);
      emitted.insert(emitted.end(), more.begin(), more.end());
    }
    if (rearmed && emitted.empty()) {
      auto more = evaluate_preemption_locked();
      emitted.insert(emitted.end(), more.begin(), more.end());
    }
  }
  cv_.notify_all();
  return emitted;
}

std::vector<NetworkEvent> ClientProxy::on_network_event(const NetworkEvent& event) {
  std::vector<NetworkEvent> emitted;
  {
    std::lock_guard lock(mu_);
    emitted = apply_event_locked(event);
  }
  cv_.notify_all();
  return emitted;
}

std::vector<NetworkEvent> ClientProxy::apply_event_locked(const NetworkEvent& event) {
  std::vector<NetworkEvent> emitted{event};
  switch (event.kind) {
    case NetworkEventKind::connected: {
      const auto it = interfaces_.find(event.interface_id);
      if (it == interfaces_.end())
        throw std::invalid_argument("connected event for unregistered interface " +
                                    event.interface_id);
      it->second.present = true;
      it->second.suspect = false;
      it->second.desc.available = true;
      auto more = evaluate_preemption_locked();
      emitted.insert(emitted.end(), more.begin(), more.end());
      break;
    }
    case NetworkEventKind::disconnected: {
      const auto it = interfaces_.find(event.interface_id);
      if (it != interfaces_.end()) {
        it->second.present = false;
        it->second.desc.available = false;
      }
      break;
    }
    case NetworkEventKind::transport_failure: {
      const auto it = interfaces_.find(event.interface_id);
      if (it != interfaces_.end() &&
          classify_failure(event.cause) == Disposition::recoverable_handoff)
        it->second.suspect = true;
      break;
    }
    case NetworkEventKind::preemptive_candidate:
      break;
  }
  return emitted;
}

double ClientProxy::estimate_bandwidth_locked(const Session& s,
                                              const InterfaceDescriptor& iface) const {
  if (estimator_override_) return estimator_override_(iface);
  if (s.rec.current_interface && *s.rec.current_interface == iface.id &&
      s.run_first_byte_at) {
    const double elapsed = now() - *s.run_first_byte_at;
    if (elapsed >= config_.min_measurement_window && s.run_body_bytes > 0)
      return static_cast<double>(s.run_body_bytes) * 8.0 / elapsed;
  }
  return iface.bandwidth_capacity;
}

std::vector<NetworkEvent> ClientProxy::evaluate_preemption_locked() {
  std::vector<NetworkEvent> emitted;
  if (!config_.preemption_enabled) return emitted;
  const auto usable = usable_locked();
  if (usable.empty()) return emitted;
  const auto& best = select_interface(usable);

  for (auto& [id, s] : sessions_) {
    if (s.rec.state != SessionState::active || !s.rec.current_interface) continue;
    if (*s.rec.current_interface == best.id || s.preempt_requested) continue;
    if (!s.rec.total_size) continue;
    const auto cur_it = interfaces_.find(*s.rec.current_interface);
    if (cur_it == interfaces_.end()) continue;
    const auto& current = cur_it->second.desc;
    // Only a strictly better-ranked network is a candidate.
    if (select_interface(std::vector{current, best}).id != best.id) continue;

    emitted.push_back({NetworkEventKind::preemptive_candidate, FailureCause::none, best.id, now()});
    const ByteCount remaining =
        *s.rec.total_size > s.rec.bytes_delivered ? *s.rec.total_size - s.rec.bytes_delivered : 0;
    const double handoff = history_.estimate(current.kind, best.kind);
    const Session& cs = s;
    auto decision = should_preempt(
        remaining, current, best, handoff,
        [this, &cs](const InterfaceDescriptor& d) { return estimate_bandwidth_locked(cs, d); });
    s.rec.last_decision = decision;
    if (decision.preempt) {
      s.preempt_requested = true;
      s.preempt_target = best.id;
    }
  }
  return emitted;
}

std::optional<Dispatch> ClientProxy::next_dispatch_locked() {
  if (active_ >= config_.workers || pending_.empty()) return std::nullopt;
  const auto usable = usable_locked();
  if (usable.empty()) return std::nullopt;
  const auto& iface = select_interface(usable);

  const SessionId id = pending_.front();
  pending_.pop_front();
  auto& s = get(id);
  s.rec.state = SessionState::active;
  s.rec.current_interface = iface.id;
  ++s.rec.runs;
  s.run_body_bytes = 0;
  s.run_first_byte_at.reset();
  s.preempt_requested = false;
  s.preempt_target.reset();
  ++active_;

  Dispatch d;
  d.session_id = id;
  d.iface = iface;
  d.offset = config_.recovery == RecoveryMode::packet ? s.rec.bytes_delivered : 0;
  d.request = rewrite_request(s.request, config_.gateway_base, d.offset);
  return d;
}

std::optional<Dispatch> ClientProxy::next_dispatch() {
  std::lock_guard lock(mu_);
  return next_dispatch_locked();
}

std::optional<Dispatch> ClientProxy::wait_dispatch(std::stop_token stop) {
  std::unique_lock lock(mu_);
  std::optional<Dispatch> d;
  cv_.wait(lock, stop, [&] {
    d = next_dispatch_locked();
    return d.has_value();
  });
  return d;
}

void ClientProxy::announce_length(SessionId id, ByteCount total) {
  std::lock_guard lock(mu_);
  auto& s = get(id);
  if (!s.rec.total_size) s.rec.total_size = total;
}

bool ClientProxy::deliver(SessionId id, ByteCount stream_offset,
                          std::span<const std::byte> body) {
  std::shared_ptr<LocalLeg> leg;
  std::span<const std::byte> fresh;
  bool begin_leg = false;
  std::optional<ByteCount> length;
  bool preempt = false;
  {
    std::lock_guard lock(mu_);
    auto& s = get(id);
    const double t = now();
    if (!body.empty()) {
      if (!s.run_first_byte_at) {
        s.run_first_byte_at = t;
        if (s.handoff_started) {
          const auto& [from, started] = *s.handoff_started;
          const auto cur = interfaces_.find(*s.rec.current_interface);
          if (cur != interfaces_.end() && cur->second.desc.id != from.id)
            history_.record(from.kind, cur->second.desc.kind, t - started);
          s.handoff_started.reset();
        }
      }
      s.run_body_bytes += body.size();
    }
    const auto before = s.splicer.duplicate_bytes();
    fresh = s.splicer.append(stream_offset, body);
    s.rec.duplicate_bytes += s.splicer.duplicate_bytes() - before;
    if (!fresh.empty()) {
      s.rec.bytes_delivered = s.splicer.size();
      s.rec.last_progress_at = t;
      if (!s.leg_begun) {
        s.leg_begun = true;
        begin_leg = true;
        length = s.rec.total_size;
      }
    }
    leg = s.leg;
    preempt = s.preempt_requested;
  }
  if (leg) {
    if (begin_leg) leg->begin(length);
    if (!fresh.empty()) leg->write(fresh);
  }
  return preempt;
}

SchedulingAction ClientProxy::handle_outcome(SessionId id, const RunOutcome& outcome) {
  std::shared_ptr<LocalLeg> leg;
  SchedulingAction action = SchedulingAction::none;
  bool begin_leg = false;
  std::optional<ByteCount> length;
  std::string abort_reason;
  {
    std::lock_guard lock(mu_);
    auto& s = get(id);
    const double t = now();

    auto release_worker = [&] {
      if (s.rec.state == SessionState::active && active_ > 0) --active_;
    };
    auto requeue = [&] {
      release_worker();
      s.rec.state = SessionState::interrupted;
      s.rec.state = SessionState::queued;
      if (std::find(pending_.begin(), pending_.end(), id) == pending_.end())
        pending_.push_back(id);
    };

    if (outcome.code == RunOutcome::kCompleted) {
      release_worker();
      s.rec.state = SessionState::completed;
      s.rec.completed_at = t;
      if (!s.rec.total_size) s.rec.total_size = s.rec.bytes_delivered;
      if (!s.leg_begun) {
        s.leg_begun = true;
        begin_leg = true;
        length = s.rec.total_size;
      }
      action = SchedulingAction::release;
    } else if (outcome.code == RunOutcome::kUpstreamFailure) {
      release_worker();
      s.rec.state = SessionState::failed;
      s.rec.local_closed_early = true;
      abort_reason = outcome.detail.empty() ? "upstream error" : outcome.detail;
      action = SchedulingAction::fail;
    } else {
      switch (classify_failure(outcome.code)) {
        case Disposition::preemptive: {
          const auto from = interfaces_.find(s.rec.current_interface.value_or(""));
          if (from != interfaces_.end()) s.handoff_started = {from->second.desc, t};
          ++s.rec.preemptions;
          requeue();
          action = SchedulingAction::requeue;
          break;
        }
        case Disposition::recoverable_handoff: {
          ++s.rec.failures;
          if (s.rec.current_interface) {
            const auto it = interfaces_.find(*s.rec.current_interface);
            if (it != interfaces_.end()) {
              it->second.suspect = true;
              if (!s.handoff_started) s.handoff_started = {it->second.desc, t};
            }
          }
          if (config_.retry_budget && s.rec.failures > *config_.retry_budget) {
            release_worker();
            s.rec.state = SessionState::failed;
            s.rec.local_closed_early = true;
            abort_reason = "retry budget exhausted";
            action = SchedulingAction::fail;
          } else {
            requeue();
            action = SchedulingAction::requeue_await_network;
          }
          break;
        }
        case Disposition::ignore:
          action = SchedulingAction::none;
          break;
      }
    }
    if (action == SchedulingAction::release || action == SchedulingAction::fail)
      leg = std::exchange(s.leg, nullptr);
  }
  if (leg) {
    if (action == SchedulingAction::release) {
      if (begin_leg) leg->begin(length);
      leg->finish();
    } else {
      leg->abort(abort_reason);
    }
  }
  cv_.notify_all();
  return action;
}

bool ClientProxy::user_perceived_continuity(SessionId id) const {
  std::lock_guard lock(mu_);
  const auto& s = get(id);
  if (s.rec.state != SessionState::completed || s.rec.local_closed_early) return false;
  return !s.rec.total_size || s.rec.bytes_delivered == *s.rec.total_size;
}

SessionRecord ClientProxy::record(SessionId id) const {
  std::lock_guard lock(mu_);
  return get(id).rec;
}

std::vector<SessionRecord> ClientProxy::records() const {
  std::lock_guard lock(mu_);
  std::vector<SessionRecord> out;
  for (const auto& [id, s] : sessions_) out.push_back(s.rec);
  return out;
}

std::vector<SessionId> ClientProxy::pending() const {
  std::lock_guard lock(mu_);
  return {pending_.begin(), pending_.end()};
}

std::size_t ClientProxy::active_count() const {
  std::lock_guard lock(mu_);
  return active_;
}

bool ClientProxy::all_terminal() const {
  std::lock_guard lock(mu_);
  return std::all_of(sessions_.begin(), sessions_.end(), [](const auto& kv) {
    return kv.second.rec.state == SessionState::completed ||
           kv.second.rec.state == SessionState::failed;
  });
}

void ClientProxy::set_bandwidth_estimator(BandwidthEstimator estimator) {
  std::lock_guard lock(mu_);
  estimator_override_ = std::move(estimator);
}

HandoffHistory ClientProxy::handoff_history() const {
  std::lock_guard lock(mu_);
  return history_;
}

void ClientProxy::notify_all() { cv_.notify_all(); }

SessionRun::SessionRun(ClientProxy& proxy, Dispatch dispatch)
    : proxy_(proxy), dispatch_(std::move(dispatch)) {}

std::optional<RunOutcome> SessionRun::parse_header() {
  const auto end = header_block_end(header_buf_);
  if (end == std::string::npos) {
    if (header_buf_.size() > 64 * 1024) {
      finished_ = true;
      return RunOutcome::upstream("oversized response header");
    }
    return std::nullopt;
  }
  std::string_view head(header_buf_.data(), end);
  const auto eol = head.find("\r\n");
  const auto status_line = head.substr(0, eol);
  const auto sp = status_line.find(' ');
  if (!status_line.starts_with("HTTP") || sp == std::string_view::npos) {
    finished_ = true;
    return RunOutcome::upstream("malformed status line");
  }
  auto code_text = status_line.substr(sp + 1, 3);
  std::from_chars(code_text.data(), code_text.data() + code_text.size(), status_);

  std::string_view rest = head.substr(eol + 2);
  while (!rest.empty()) {
    const auto e = rest.find("\r\n");
    const auto line = rest.substr(0, e);
    const auto colon = line.find(':');
    if (colon != std::string_view::npos && iequals(line.substr(0, colon), "Content-Length")) {
      auto v = line.substr(colon + 1);
      while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
      ByteCount n = 0;
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
      if (ec == std::errc{}) content_length_ = n;
    }
    if (e == std::string_view::npos) break;
    rest.remove_prefix(e + 2);
  }
  header_done_ = true;
  if (status_ < 200 || status_ >= 300) {
    finished_ = true;
    return RunOutcome::upstream("gateway status " + std::to_string(status_));
  }
  if (content_length_) proxy_.announce_length(dispatch_.session_id, dispatch_.offset + *content_length_);

  std::string body = header_buf_.substr(end);
  header_buf_.clear();
  if (!body.empty()) {
    const auto bytes = to_bytes(body);
    return on_bytes(bytes);
  }
  if (content_length_ && *content_length_ == 0) {
    finished_ = true;
    return RunOutcome::completed();
  }
  return std::nullopt;
}

std::optional<RunOutcome> SessionRun::on_bytes(std::span<const std::byte> bytes) {
  if (finished_) return std::nullopt;
  if (!header_done_) {
    header_buf_.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    return parse_header();
  }
  if (content_length_) {
    const ByteCount room = *content_length_ - body_received_;
    if (bytes.size() > room) bytes = bytes.first(static_cast<std::size_t>(room));
  }
  const ByteCount at = dispatch_.offset + body_received_;
  body_received_ += bytes.size();
  const bool preempt = proxy_.deliver(dispatch_.session_id, at, bytes);
  if (content_length_ && body_received_ == *content_length_) {
    finished_ = true;
    return RunOutcome::completed();
  }
  if (preempt) {
    finished_ = true;
    return RunOutcome::preemptive();
  }
  return std::nullopt;
}

RunOutcome SessionRun::on_eof() {
  finished_ = true;
  if (!header_done_)
    return RunOutcome::failure(FailureCause::conn_aborted, "closed before response header");
  if (content_length_ && body_received_ < *content_length_)
    return RunOutcome::failure(FailureCause::conn_aborted, "closed before end of body");
  return RunOutcome::completed();
}

}  // namespace hsc
