#pragma once

#include "pmon/coordination.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace pmon {

struct Message {
  int sender = -1;
  int receiver = -1;
  double theta = 0.0;
  double sent_at = 0.0;
  double deliver_at = 0.0;
  std::int64_t seq = 0;
};

struct LinkParams {
  double base_delay = 0.0;
  double jitter = 0.0;
  double drop_prob = 0.0;
};

struct NetworkConfig {
  double base_delay = 0.05;
  double jitter = 0.0;     // half-width of the uniform jitter
  double drop_prob = 0.0;
  std::map<std::pair<int, int>, LinkParams> per_link_overrides;  // key (min id, max id)
  std::uint64_t seed = 1;

  void check() const;
};

enum class LinkState { up, down, delay_override };

struct LinkEvent {
  int u = 0;
  int v = 0;
  LinkState state = LinkState::up;
  double at = 0.0;
  double delay = 0.0;  // used by delay_override
};

class TopologyViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Discrete-event ring network. Only phases travel. Deliveries are ordered by
/// (deliver_at, sender, seq); link changes take effect at their scheduled
/// time and apply to both directions.
class Network {
 public:
  Network(RingTopology ring, NetworkConfig config);

  void send(int from, int to, double theta, double now);

  /// Latest-by-seq delivered message from each neighbor with data.
  std::map<int, Message> poll(int to, double now);

  /// now - sent_at of the latest delivered message; +inf if none.
  double staleness(int to, int neighbor, double now);

  void set_link(int u, int v, LinkState state, double at, double delay = 0.0);

  const std::vector<std::string>& event_log() const { return log_; }
  std::uint64_t trace_hash() const;
  const RingTopology& ring() const { return ring_; }

 private:
  struct Pending {
    Message m;
    bool operator>(const Pending& o) const;
  };
  struct Link {
    LinkState state = LinkState::up;
    double delay = 0.0;
  };
  static std::pair<int, int> key(int u, int v) { return {std::min(u, v), std::max(u, v)}; }
  void advance(double now);
  LinkParams params_for(int u, int v) const;

  RingTopology ring_;
  NetworkConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<std::int64_t> next_seq_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> queue_;
  std::map<std::pair<int, int>, Message> latest_;  // (receiver, sender)
  std::map<std::pair<int, int>, Link> links_;
  std::vector<LinkEvent> schedule_;  // pending, sorted by time
  double now_ = -std::numeric_limits<double>::infinity();
  std::vector<std::string> log_;
};

}  // namespace pmon
