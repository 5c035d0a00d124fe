#include "hsc/sim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <queue>

#include "hsc/client_proxy.hpp"
#include "hsc/gateway.hpp"
#include "hsc/sim/origin_stub.hpp"

namespace hsc::sim {

bool RunResult::all_completed() const {
  return std::all_of(transfers.begin(), transfers.end(),
                     [](const auto& t) { return t.metrics.completed; });
}

std::vector<TransferMetrics> RunResult::metrics() const {
  std::vector<TransferMetrics> out;
  for (const auto& t : transfers) out.push_back(t.metrics);
  return out;
}

ByteCount measure_useless_traffic(const RunResult& run) {
  ByteCount total = 0;
  for (const auto& t : run.transfers) total += t.metrics.useless_traffic_bytes;
  return total;
}

namespace {

using Micros = std::int64_t;
constexpr Micros kNever = std::numeric_limits<Micros>::max();
constexpr std::int64_t kMicroBitsPerByte = 8'000'000;

Micros to_us(double seconds) { return std::llround(seconds * 1e6); }
double to_s(Micros us) { return static_cast<double>(us) / 1e6; }

class EventQueue {
 public:
  void push(Micros at, std::function<void()> fn) { q_.push({at, seq_++, std::move(fn)}); }
  bool empty() const { return q_.empty(); }
  Micros next_time() const { return q_.empty() ? kNever : q_.top().at; }
  void run_next() {
    auto fn = std::move(const_cast<Item&>(q_.top()).fn);
    q_.pop();
    fn();
  }

 private:
  struct Item {
    Micros at;
    std::uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Item& o) const { return at != o.at ? at > o.at : seq > o.seq; }
  };
  std::priority_queue<Item, std::vector<Item>, std::greater<>> q_;
  std::uint64_t seq_ = 0;
};

struct Link {
  ScenarioInterface cfg;
  bool up = false;
  Micros attached_at = 0;
  bool os_present = false;
  std::uint64_t generation = 0;
  std::int64_t rate_bps = 0;
  std::int64_t credit = 0;  // micro-bits
  std::uint64_t rotation = 0;
};

enum class Phase { flowing, draining, closed };

struct Stream {
  std::uint64_t id = 0;
  SessionId sid;
  std::size_t transfer = 0;
  std::string iface;
  std::unique_ptr<SessionRun> run;
  std::unique_ptr<RelayStream> relay;
  Micros ready_at = 0;
  Micros drain_until = 0;
  Phase phase = Phase::flowing;
  bool saw_body = false;
};

struct Gap {
  Micros start = 0;
  bool preemptive = false;
  std::optional<Micros> any_link_up;
};

struct Transfer {
  TransferSpec spec;
  std::optional<SessionId> sid;
  std::shared_ptr<BufferLeg> leg;
  TransferMetrics m;
  std::optional<Gap> gap;
  std::vector<ByteCount> offsets;
  std::vector<double> stalls;
  std::optional<Micros> done_at;
};

class Simulation {
 public:
  Simulation(const Scenario& sc, const StackConfig& cfg, const Faults& faults)
      : sc_(sc),
        cfg_(cfg),
        faults_(faults),
        origin_(sc.seed, cfg.origin_range_support),
        gateway_(origin_),
        proxy_(make_proxy_config(cfg), [this] { return to_s(now_); }),
        tick_us_(std::max<Micros>(1, to_us(cfg.tick))) {
    fired_.assign(faults.on_progress.size(), false);
  }

  RunResult run();

 private:
  static ProxyConfig make_proxy_config(const StackConfig& cfg) {
    ProxyConfig pc;
    pc.workers = cfg.workers;
    pc.retry_budget = cfg.retry_budget;
    pc.preemption_enabled = cfg.policy_enabled;
    pc.recovery = cfg.recovery;
    pc.handoff = cfg.handoff;
    return pc;
  }

  void log(const std::string& what) {
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "%10.3f ", to_s(now_));
    trace_.push_back(stamp + what);
  }

  void setup();
  void schedule_poll(Micros at);
  void pump_dispatch();
  void start_run(const Dispatch& d);
  void fail_attempt(SessionId sid, std::size_t transfer);
  void tick();
  ByteCount pump_stream(Stream& s, std::size_t give);
  void finish_stream(Stream& s, const RunOutcome& outcome);
  void on_outcome(std::size_t transfer, const RunOutcome& outcome, SchedulingAction action);
  void check_progress_faults(std::size_t transfer);
  void close_gap(Transfer& t, const std::string& iface);
  void apply(const Action& a);
  void link_up(Link& l, const std::string& id);
  void link_down(Link& l, const std::string& id, FailureCause cause);
  void os_update(const std::string& id, bool present, Micros at);
  bool any_link_up() const;
  bool finished() const;
  std::size_t transfer_of(SessionId sid) const;

  const Scenario& sc_;
  StackConfig cfg_;
  Faults faults_;
  std::vector<bool> fired_;

  Micros now_ = 0;
  Micros last_tick_ = 0;
  EventQueue events_;
  std::map<std::string, Link> links_;
  OriginStub origin_;
  Gateway gateway_;
  ClientProxy proxy_;
  Micros tick_us_;
  std::vector<std::unique_ptr<Stream>> streams_;
  std::vector<Transfer> transfers_;
  std::map<SessionId, std::size_t> by_session_;
  std::size_t accepted_ = 0;
  std::size_t pending_attempts_ = 0;
  std::uint64_t next_stream_ = 1;
  std::uint64_t warnings_ = 0;
  std::vector<std::string> trace_;
  Bytes scratch_;
};

void Simulation::setup() {
  std::vector<InterfaceDescriptor> descs;
  for (const auto& si : sc_.interfaces) {
    Link l;
    l.cfg = si;
    l.up = si.desc.available;
    l.os_present = si.desc.available;
    l.rate_bps = std::llround(si.desc.bandwidth_capacity * si.utilization);
    links_.emplace(si.desc.id, std::move(l));
    descs.push_back(si.desc);
  }
  proxy_.set_interfaces(descs);

  for (const auto& t : sc_.transfers) {
    origin_.add_resource(t.resource_id, t.size);
    Transfer tr;
    tr.spec = t;
    for (const auto& si : sc_.interfaces) tr.m.per_interface_bytes[si.desc.id] = 0;
    transfers_.push_back(std::move(tr));
  }
  for (const auto& f : faults_.origin) origin_.fail_after(f.resource_id, f.after_bytes);

  for (std::size_t i = 0; i < transfers_.size(); ++i) {
    events_.push(to_us(transfers_[i].spec.start), [this, i] {
      auto& t = transfers_[i];
      t.leg = std::make_shared<BufferLeg>();
      OriginRequest req;
      req.url = resource_url(t.spec.resource_id);
      t.sid = proxy_.accept_request(req, t.leg);
      by_session_[*t.sid] = i;
      ++accepted_;
      log("accept " + to_string(*t.sid) + " " + req.url);
    });
  }
  for (const auto& ta : sc_.timeline) {
    const Action a = ta.action;
    events_.push(to_us(ta.time), [this, a] { apply(a); });
  }
  schedule_poll(to_us(cfg_.poll_interval));
}

void Simulation::schedule_poll(Micros at) {
  events_.push(at, [this, at] {
    std::vector<InterfaceDescriptor> snapshot;
    for (const auto& [id, l] : links_) {
      if (!l.os_present) continue;
      auto d = l.cfg.desc;
      d.available = true;
      snapshot.push_back(d);
    }
    for (const auto& ev : proxy_.on_poll(snapshot))
      log(std::string("poll ") + to_string(ev.kind) + " " + ev.interface_id);
    schedule_poll(at + to_us(cfg_.poll_interval));
  });
}

std::size_t Simulation::transfer_of(SessionId sid) const { return by_session_.at(sid); }

void Simulation::pump_dispatch() {
  while (auto d = proxy_.next_dispatch()) start_run(*d);
}

void Simulation::start_run(const Dispatch& d) {
  const auto ti = transfer_of(d.session_id);
  auto& t = transfers_[ti];
  t.offsets.push_back(d.offset);
  auto& link = links_.at(d.iface.id);
  log("dispatch " + to_string(d.session_id) + " via " + d.iface.id + " offset " +
      std::to_string(d.offset));
  const Micros rtt = to_us(link.cfg.desc.latency);
  if (!link.up) {
    ++pending_attempts_;
    events_.push(now_ + std::max(rtt, tick_us_),
                 [this, sid = d.session_id, ti] { fail_attempt(sid, ti); });
    return;
  }
  auto s = std::make_unique<Stream>();
  s->id = next_stream_++;
  s->sid = d.session_id;
  s->transfer = ti;
  s->iface = d.iface.id;
  s->run = std::make_unique<SessionRun>(proxy_, d);
  s->relay = gateway_.dispatch(d.request);
  s->ready_at = now_ + rtt;
  streams_.push_back(std::move(s));
}

void Simulation::fail_attempt(SessionId sid, std::size_t ti) {
  --pending_attempts_;
  const auto outcome = RunOutcome::failure(FailureCause::net_unreachable, "link down");
  const auto action = proxy_.handle_outcome(sid, outcome);
  log("attempt " + to_string(sid) + " failed: " + to_string(action));
  on_outcome(ti, outcome, action);
}

ByteCount Simulation::pump_stream(Stream& s, std::size_t give) {
  scratch_.resize(give);
  std::size_t got = 0;
  bool eof = false;
  while (got < give) {
    std::size_t n = 0;
    try {
      n = s.relay->read(std::span(scratch_).subspan(got));
    } catch (const UpstreamError&) {
      eof = true;
      break;
    }
    if (n == 0) {
      eof = true;
      break;
    }
    got += n;
  }
  auto& t = transfers_[s.transfer];
  t.m.per_interface_bytes[s.iface] += got;

  if (s.phase == Phase::draining) {
    t.m.useless_traffic_bytes += got;
    if (eof) {
      s.phase = Phase::closed;
      s.relay.reset();
    }
    return got;
  }

  std::optional<RunOutcome> outcome;
  if (got > 0) outcome = s.run->on_bytes(std::span<const std::byte>(scratch_).first(got));
  if (!s.saw_body && s.run->body_bytes() > 0) {
    s.saw_body = true;
    close_gap(t, s.iface);
  }
  if (!outcome && eof) outcome = s.run->on_eof();
  if (outcome) finish_stream(s, *outcome);
  check_progress_faults(s.transfer);
  return got;
}

void Simulation::finish_stream(Stream& s, const RunOutcome& outcome) {
  const auto action = proxy_.handle_outcome(s.sid, outcome);
  log("run " + to_string(s.sid) + " on " + s.iface + " ended code " +
      std::to_string(outcome.code) + ": " + to_string(action));
  if (classify_failure(outcome.code) == Disposition::preemptive && cfg_.drain_window > 0) {
    s.phase = Phase::draining;
    s.drain_until = now_ + to_us(cfg_.drain_window);
  } else {
    s.phase = Phase::closed;
    s.relay.reset();
  }
  on_outcome(s.transfer, outcome, action);
}

void Simulation::on_outcome(std::size_t ti, const RunOutcome& outcome, SchedulingAction action) {
  auto& t = transfers_[ti];
  switch (action) {
    case SchedulingAction::release:
      t.done_at = now_;
      break;
    case SchedulingAction::requeue:
    case SchedulingAction::requeue_await_network:
      if (!t.gap) {
        Gap g;
        g.start = now_;
        g.preemptive = classify_failure(outcome.code) == Disposition::preemptive;
        if (any_link_up()) g.any_link_up = now_;
        t.gap = g;
      }
      break;
    case SchedulingAction::fail:
      t.done_at = now_;
      t.gap.reset();
      break;
    case SchedulingAction::none:
      break;
  }
}

void Simulation::close_gap(Transfer& t, const std::string& iface) {
  if (!t.gap) return;
  const auto& g = *t.gap;
  const Micros attach = links_.at(iface).attached_at;
  const Micros eff = g.preemptive ? std::min(attach, now_) : std::max(g.start, attach);
  t.m.handoff_delay_s += to_s(std::max<Micros>(0, eff - g.start));
  t.m.detection_delay_s += to_s(now_ - eff);
  if (!g.preemptive) {
    const Micros up = std::min(now_, g.any_link_up.value_or(now_));
    t.m.disconnect_time_s += to_s(up - g.start);
  }
  t.stalls.push_back(to_s(now_ - g.start));
  t.gap.reset();
}

void Simulation::check_progress_faults(std::size_t ti) {
  const auto& t = transfers_[ti];
  if (!t.sid) return;
  std::optional<ByteCount> delivered;
  for (std::size_t i = 0; i < faults_.on_progress.size(); ++i) {
    const auto& f = faults_.on_progress[i];
    if (fired_[i] || f.transfer != ti) continue;
    if (!delivered) delivered = proxy_.record(*t.sid).bytes_delivered;
    if (*delivered < f.at_bytes) continue;
    fired_[i] = true;
    events_.push(now_, [this, a = f.action] { apply(a); });
    if (f.restore)
      events_.push(now_ + to_us(f.restore_after), [this, a = *f.restore] { apply(a); });
  }
}

void Simulation::tick() {
  for (auto& [id, link] : links_) {
    std::vector<Stream*> eligible;
    for (auto& s : streams_) {
      if (s->iface != id || s->phase == Phase::closed) continue;
      if (s->phase == Phase::draining && now_ > s->drain_until) {
        s->phase = Phase::closed;
        s->relay.reset();
        continue;
      }
      if (s->ready_at < now_) eligible.push_back(s.get());
    }
    if (!link.up || eligible.empty()) {
      link.credit = 0;
      continue;
    }
    std::rotate(eligible.begin(),
                eligible.begin() + static_cast<std::ptrdiff_t>(link.rotation++ % eligible.size()),
                eligible.end());

    link.credit += link.rate_bps * tick_us_;
    auto budget = static_cast<ByteCount>(link.credit / kMicroBitsPerByte);
    ByteCount used = 0;
    std::vector<Stream*> wanting = eligible;
    while (budget > used && !wanting.empty()) {
      const ByteCount left = budget - used;
      const ByteCount share = left / wanting.size();
      const ByteCount extra = left % wanting.size();
      std::vector<Stream*> next;
      for (std::size_t i = 0; i < wanting.size(); ++i) {
        Stream* s = wanting[i];
        const ByteCount give = share + (i < extra ? 1 : 0);
        if (give == 0) {
          next.push_back(s);
          continue;
        }
        const auto got = pump_stream(*s, static_cast<std::size_t>(give));
        used += got;
        if (got == give && s->phase != Phase::closed) next.push_back(s);
      }
      if (next.size() == wanting.size() && share == 0 && extra == 0) break;
      wanting = std::move(next);
    }
    link.credit -= static_cast<std::int64_t>(used) * kMicroBitsPerByte;
    if (wanting.empty()) link.credit %= kMicroBitsPerByte;
  }
  std::erase_if(streams_, [](const auto& s) { return s->phase == Phase::closed; });
}

bool Simulation::any_link_up() const {
  return std::any_of(links_.begin(), links_.end(), [](const auto& kv) { return kv.second.up; });
}

void Simulation::link_up(Link& l, const std::string& id) {
  if (l.up) return;
  l.up = true;
  l.attached_at = now_;
  l.credit = 0;
  log("link " + id + " up");
  for (auto& t : transfers_)
    if (t.gap && !t.gap->any_link_up) t.gap->any_link_up = now_;
}

void Simulation::link_down(Link& l, const std::string& id, FailureCause cause) {
  l.up = false;
  log("link " + id + " down (" + to_string(cause) + ")");
  for (auto& s : streams_) {
    if (s->iface != id || s->phase == Phase::closed) continue;
    if (s->phase == Phase::draining) {
      s->phase = Phase::closed;
      s->relay.reset();
      continue;
    }
    finish_stream(*s, RunOutcome::failure(cause, "link severed"));
  }
}

void Simulation::os_update(const std::string& id, bool present, Micros at) {
  auto& l = links_.at(id);
  const auto gen = l.generation;
  events_.push(at, [this, id, present, gen] {
    auto& link = links_.at(id);
    if (link.generation != gen) return;
    if (link.os_present != present) log("os table " + std::string(present ? "adds " : "drops ") + id);
    link.os_present = present;
  });
}

void Simulation::apply(const Action& a) {
  auto& l = links_.at(a.iface);
  log(std::string("action ") + to_string(a.kind) + " " + a.iface +
      (a.target.empty() ? "" : " -> " + a.target));
  const bool turning_on =
      a.kind == ActionKind::enable || a.kind == ActionKind::ap_power_on || a.kind == ActionKind::nic_on;
  if (turning_on == l.up) {
    ++warnings_;
    log("warning: " + std::string(to_string(a.kind)) + " ignored, " + a.iface + " already " +
        (l.up ? "up" : "down"));
    return;
  }
  ++l.generation;
  const Micros connect = to_us(cfg_.connect_event_latency);
  const Micros disconnect = to_us(cfg_.disconnect_event_latency);
  switch (a.kind) {
    case ActionKind::enable:
    case ActionKind::ap_power_on:
      link_up(l, a.iface);
      os_update(a.iface, true, now_ + connect);
      break;
    case ActionKind::nic_on: {
      const auto gen = l.generation;
      events_.push(now_ + connect, [this, id = a.iface, gen] {
        auto& link = links_.at(id);
        if (link.generation == gen) link_up(link, id);
      });
      os_update(a.iface, true, now_ + connect);
      break;
    }
    case ActionKind::disable:
    case ActionKind::nic_off:
      link_down(l, a.iface, FailureCause::net_down);
      os_update(a.iface, false, now_ + disconnect);
      break;
    case ActionKind::ap_power_off:
      link_down(l, a.iface, FailureCause::conn_reset);
      os_update(a.iface, false, now_ + disconnect);
      break;
    case ActionKind::subnet_handoff: {
      link_down(l, a.iface, FailureCause::addr_not_available);
      l.os_present = false;
      log("os table drops " + a.iface);
      auto& to = links_.at(a.target);
      ++to.generation;
      const auto gen = to.generation;
      const Micros up_at = now_ + to_us(cfg_.subnet_handoff_delay);
      events_.push(up_at, [this, id = a.target, gen] {
        auto& link = links_.at(id);
        if (link.generation == gen) link_up(link, id);
      });
      os_update(a.target, true, up_at + connect);
      break;
    }
  }
}

bool Simulation::finished() const {
  if (accepted_ < transfers_.size() || pending_attempts_ > 0) return false;
  for (const auto& s : streams_)
    if (s->phase != Phase::closed) return false;
  return proxy_.all_terminal();
}

RunResult Simulation::run() {
  validate(sc_);
  setup();
  const Micros limit = to_us(cfg_.max_time);
  Micros last_done = 0;
  while (true) {
    pump_dispatch();
    if (finished()) break;
    const bool active = std::any_of(streams_.begin(), streams_.end(),
                                    [](const auto& s) { return s->phase != Phase::closed; });
    Micros next_tick = kNever;
    if (active) {
      next_tick = (now_ + tick_us_ - 1) / tick_us_ * tick_us_;
      if (next_tick <= last_tick_) next_tick = last_tick_ + tick_us_;
    }
    const Micros next_event = events_.next_time();
    const Micros t = std::min(next_tick, next_event);
    if (t == kNever || t > limit) break;
    now_ = t;
    if (next_event <= t) {
      events_.run_next();
      continue;
    }
    last_tick_ = t;
    tick();
  }
  for (const auto& t : transfers_)
    if (t.done_at) last_done = std::max(last_done, *t.done_at);

  RunResult out;
  out.scenario = sc_.name;
  out.seed = sc_.seed;
  out.warnings = warnings_;
  out.end_time = to_s(finished() ? last_done : now_);
  for (auto& t : transfers_) {
    TransferResult r;
    r.spec = t.spec;
    r.metrics = t.m;
    r.request_offsets = t.offsets;
    r.stalls = t.stalls;
    if (t.sid) {
      const auto rec = proxy_.record(*t.sid);
      r.metrics.completed = rec.state == SessionState::completed;
      r.bytes_delivered = rec.bytes_delivered;
      r.failures = rec.failures;
      r.preemptions = rec.preemptions;
      r.runs = rec.runs;
      r.last_decision = rec.last_decision;
      r.continuity = proxy_.user_perceived_continuity(*t.sid);
      r.local_leg_error = t.leg->aborted();
      r.content_matches = t.leg->content() == generate_content(sc_.seed, t.spec.resource_id, t.spec.size);
      r.continuity = r.continuity && r.content_matches;
    }
    const Micros end = t.done_at.value_or(now_);
    r.metrics.overall_time_s = to_s(end - to_us(t.spec.start));
    out.transfers.push_back(std::move(r));
  }
  for (const auto& t : sc_.transfers)
    out.origin_bytes_served[t.resource_id] = origin_.bytes_served(t.resource_id);
  out.gateway_bytes_skipped = gateway_.stats().bytes_skipped;
  out.trace = std::move(trace_);
  return out;
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const StackConfig& config, const Faults& faults) {
  for (const auto& f : faults.on_progress) {
    if (f.transfer >= scenario.transfers.size())
      throw ScenarioError("progress fault references unknown transfer");
    for (const Action* a : {&f.action, f.restore ? &*f.restore : nullptr})
      if (a && (!scenario.find_interface(a->iface) ||
                (a->kind == ActionKind::subnet_handoff && !scenario.find_interface(a->target))))
        throw ScenarioError("progress fault references unknown interface");
  }
  for (const auto& f : faults.origin)
    if (std::none_of(scenario.transfers.begin(), scenario.transfers.end(),
                     [&](const auto& t) { return t.resource_id == f.resource_id; }))
      throw ScenarioError("origin fault references unknown resource " + f.resource_id);
  Simulation sim(scenario, config, faults);
  return sim.run();
}

}  // namespace hsc::sim
