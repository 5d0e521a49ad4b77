#include "pmon/netsim.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

namespace pmon {

void NetworkConfig::check() const {
  std::ostringstream err;
  auto check_one = [&](const std::string& where, double d, double j, double p) {
    if (!(d >= 0.0)) err << " " << where << "base_delay must be >= 0;";
    if (!(j >= 0.0)) err << " " << where << "jitter must be >= 0;";
    if (!(p >= 0.0 && p <= 1.0)) err << " " << where << "drop_prob must be in [0,1];";
  };
  check_one("", base_delay, jitter, drop_prob);
  for (const auto& [k, v] : per_link_overrides)
    check_one("link " + std::to_string(k.first) + "-" + std::to_string(k.second) + " ",
              v.base_delay, v.jitter, v.drop_prob);
  if (!err.str().empty()) throw std::invalid_argument("network config:" + err.str());
}

bool Network::Pending::operator>(const Pending& o) const {
  if (m.deliver_at != o.m.deliver_at) return m.deliver_at > o.m.deliver_at;
  if (m.sender != o.m.sender) return m.sender > o.m.sender;
  if (m.seq != o.m.seq) return m.seq > o.m.seq;
  return m.receiver > o.m.receiver;
}

Network::Network(RingTopology ring, NetworkConfig config)
    : ring_(std::move(ring)), cfg_(std::move(config)), rng_(cfg_.seed) {
  cfg_.check();
  next_seq_.assign(ring_.size(), 0);
  for (const auto& e : ring_.edges()) links_[key(e[0], e[1])] = Link{};
}

LinkParams Network::params_for(int u, int v) const {
  auto it = cfg_.per_link_overrides.find(key(u, v));
  if (it != cfg_.per_link_overrides.end()) return it->second;
  return {cfg_.base_delay, cfg_.jitter, cfg_.drop_prob};
}

void Network::set_link(int u, int v, LinkState state, double at, double delay) {
  if (!ring_.is_edge(u, v))
    throw TopologyViolation("set_link: " + std::to_string(u) + "-" + std::to_string(v) +
                            " is not a ring edge");
  if (state == LinkState::delay_override && !(delay >= 0.0))
    throw std::invalid_argument("set_link: delay_override needs delay >= 0");
  LinkEvent ev{u, v, state, at, delay};
  // Stable insertion keeps same-time events in call order.
  auto pos = std::upper_bound(schedule_.begin(), schedule_.end(), at,
                              [](double t, const LinkEvent& e) { return t < e.at; });
  schedule_.insert(pos, ev);
}

void Network::advance(double now) {
  if (now < now_) throw std::invalid_argument("network: time went backwards");
  now_ = now;
  while (!schedule_.empty() && schedule_.front().at <= now) {
    const LinkEvent& ev = schedule_.front();
    Link& l = links_[key(ev.u, ev.v)];
    l.state = ev.state;
    l.delay = ev.delay;
    char buf[128];
    std::snprintf(buf, sizeof buf, "link %d-%d %d %.9g %.9g", key(ev.u, ev.v).first,
                  key(ev.u, ev.v).second, static_cast<int>(ev.state), ev.at, ev.delay);
    log_.emplace_back(buf);
    schedule_.erase(schedule_.begin());
  }
  while (!queue_.empty() && queue_.top().m.deliver_at <= now) {
    const Message m = queue_.top().m;
    queue_.pop();
    auto& slot = latest_[{m.receiver, m.sender}];
    const bool fresher = slot.sender < 0 || m.seq > slot.seq;
    if (fresher) slot = m;
    char buf[160];
    std::snprintf(buf, sizeof buf, "deliver %d>%d #%lld %.9g %.9g%s", m.sender, m.receiver,
                  static_cast<long long>(m.seq), m.sent_at, m.deliver_at,
                  fresher ? "" : " superseded");
    log_.emplace_back(buf);
  }
}

void Network::send(int from, int to, double theta, double now) {
  if (!ring_.is_edge(from, to))
    throw TopologyViolation("send: " + std::to_string(from) + "->" + std::to_string(to) +
                            " is not a ring edge");
  advance(now);
  const LinkParams lp = params_for(from, to);
  const Link& link = links_[key(from, to)];
  // Draw both variates for every send so that link state does not shift
  // the random stream of later sends.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u_drop = unit(rng_);
  const double u_jit = unit(rng_);
  Message m;
  m.sender = from;
  m.receiver = to;
  m.theta = theta;
  m.sent_at = now;
  m.seq = next_seq_[from]++;
  char buf[160];
  if (link.state == LinkState::down || u_drop < lp.drop_prob) {
    std::snprintf(buf, sizeof buf, "drop %d>%d #%lld %.9g", from, to,
                  static_cast<long long>(m.seq), now);
    log_.emplace_back(buf);
    return;
  }
  double delay = link.state == LinkState::delay_override
                     ? link.delay
                     : lp.base_delay + lp.jitter * (2.0 * u_jit - 1.0);
  m.deliver_at = now + std::max(0.0, delay);
  queue_.push({m});
  std::snprintf(buf, sizeof buf, "send %d>%d #%lld %.9g %.9g %.17g", from, to,
                static_cast<long long>(m.seq), m.sent_at, m.deliver_at, theta);
  log_.emplace_back(buf);
}

std::map<int, Message> Network::poll(int to, double now) {
  advance(now);
  std::map<int, Message> out;
  for (int nb : ring_.neighbors(to)) {
    auto it = latest_.find({to, nb});
    if (it != latest_.end()) out[nb] = it->second;
  }
  return out;
}

double Network::staleness(int to, int neighbor, double now) {
  advance(now);
  auto it = latest_.find({to, neighbor});
  if (it == latest_.end()) return std::numeric_limits<double>::infinity();
  return now - it->second.sent_at;
}

std::uint64_t Network::trace_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& line : log_) {
    for (unsigned char c : line) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= '\n';
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace pmon
