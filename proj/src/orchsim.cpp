#include "prosched/orchsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <tuple>

#include "text_util.hpp"

namespace prosched {

std::string_view to_string(LbStrategy s) {
  switch (s) {
    case LbStrategy::kRoundRobin: return "round_robin";
    case LbStrategy::kRandom: return "random";
    case LbStrategy::kResponseTime: return "response_time";
  }
  return "round_robin";
}

LbStrategy parse_lb_strategy(std::string_view s) {
  const std::string t = detail::ascii_lower(detail::trim(s));
  if (t == "round_robin") return LbStrategy::kRoundRobin;
  if (t == "random") return LbStrategy::kRandom;
  if (t == "response_time") return LbStrategy::kResponseTime;
  throw std::invalid_argument("unknown load balancing strategy: " + std::string(s));
}

std::vector<ServerState> plan_cluster(const ClusterConfig& cfg) {
  const double f = cfg.gpu_memory_fraction_per_server;
  if (!(f > 0 && f <= 1)) throw ClusterError("memory fraction per server must lie in (0, 1]");
  if (cfg.gpu_count < 1) throw ClusterError("at least one device is required");
  if (cfg.max_servers_per_model < 1) throw ClusterError("max_servers_per_model must be at least 1");
  const int per_gpu = static_cast<int>(std::floor(1.0 / f + 1e-9));
  const int n = std::min(cfg.max_servers_per_model, cfg.gpu_count * per_gpu);
  const long width = static_cast<long>(cfg.port_end) - cfg.port_start + 1;
  if (width < n) {
    throw ClusterError("port range " + std::to_string(cfg.port_start) + "-" + std::to_string(cfg.port_end) +
                       " cannot hold " + std::to_string(n) + " servers");
  }
  std::vector<ServerState> out;
  for (int i = 0; i < n; ++i) {
    ServerState s;
    s.id = i;
    s.port = cfg.port_start + i;
    s.gpu = i / per_gpu;
    out.push_back(s);
  }
  return out;
}

LoadBalancer::LoadBalancer(LbStrategy strategy, std::uint64_t seed) : strategy_(strategy), rng_(seed) {}

int LoadBalancer::next(const std::vector<ServerState>& servers, const std::vector<bool>* eligible) {
  std::vector<const ServerState*> pool;
  for (std::size_t i = 0; i < servers.size(); ++i) {
    if (servers[i].healthy && (!eligible || (*eligible)[i])) pool.push_back(&servers[i]);
  }
  if (pool.empty()) throw ClusterError("no healthy server available");
  std::sort(pool.begin(), pool.end(), [](const ServerState* a, const ServerState* b) { return a->id < b->id; });
  const ServerState* pick = nullptr;
  switch (strategy_) {
    case LbStrategy::kRoundRobin: {
      auto it = std::find_if(pool.begin(), pool.end(), [&](const ServerState* s) { return s->id > last_; });
      pick = it == pool.end() ? pool.front() : *it;
      break;
    }
    case LbStrategy::kRandom:
      pick = pool[static_cast<std::size_t>(rng_() % pool.size())];
      break;
    case LbStrategy::kResponseTime:
      pick = *std::min_element(pool.begin(), pool.end(), [](const ServerState* a, const ServerState* b) {
        return std::tie(a->mean_response_time, a->id) < std::tie(b->mean_response_time, b->id);
      });
      break;
  }
  last_ = pick->id;
  return pick->id;
}

int next_server(const std::vector<ServerState>& servers, LoadBalancer& lb) { return lb.next(servers); }

PayloadPlan partition_payload(int total, int workers, bool replicate) {
  if (workers < 1) throw std::invalid_argument("at least one worker is required");
  if (total < workers) throw std::invalid_argument("payload smaller than worker count");
  PayloadPlan p;
  p.total = total;
  p.workers = workers;
  p.replicate = replicate;
  p.aligned_size = (total / workers) * workers;
  p.assignments.resize(static_cast<std::size_t>(workers));
  if (replicate) {
    std::vector<int> all(static_cast<std::size_t>(p.aligned_size));
    for (int i = 0; i < p.aligned_size; ++i) all[static_cast<std::size_t>(i)] = i;
    for (auto& a : p.assignments) a = all;
  } else {
    const int chunk = p.aligned_size / workers;
    for (int w = 0; w < workers; ++w) {
      for (int i = 0; i < chunk; ++i) p.assignments[static_cast<std::size_t>(w)].push_back(w * chunk + i);
    }
  }
  return p;
}

std::vector<TrainStepTrace> simulate_training(const PayloadPlan& plan, const TrainOptions& opt) {
  if (opt.base_batch < 1) throw std::invalid_argument("base batch must be at least 1");
  if (opt.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  const int n = plan.workers;
  if (static_cast<int>(plan.assignments.size()) != n) throw std::invalid_argument("plan has wrong worker count");
  const std::size_t len = plan.assignments.empty() ? 0 : plan.assignments.front().size();
  for (const auto& a : plan.assignments) {
    if (a.size() != len) throw std::invalid_argument("worker assignments differ in length");
  }
  if (opt.failure && (opt.failure->worker < 0 || opt.failure->worker >= n)) {
    throw std::invalid_argument("failure injected on an unknown worker");
  }
  auto tokens = [&](int sample) -> long {
    return sample >= 0 && static_cast<std::size_t>(sample) < opt.sample_tokens.size()
               ? opt.sample_tokens[static_cast<std::size_t>(sample)]
               : 1;
  };
  auto load = [&](int w, std::size_t pos, int b) {
    long sum = 0;
    const auto& a = plan.assignments[static_cast<std::size_t>(w)];
    for (std::size_t i = pos; i < std::min(len, pos + static_cast<std::size_t>(b)); ++i) sum += tokens(a[i]);
    return sum;
  };

  std::vector<TrainStepTrace> out;
  double clock = 0.0;
  int step = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t pos = 0; pos < len;) {
      int b = opt.base_batch;
      if (opt.dynamic && opt.token_budget > 0 && b > 1) {
        for (int w = 0; w < n; ++w) {
          if (load(w, pos, b) > opt.token_budget) {
            b = opt.base_batch - 1;
            break;
          }
        }
      }
      const int take = static_cast<int>(std::min(len - pos, static_cast<std::size_t>(b)));
      TrainStepTrace tr;
      tr.step = step;
      tr.epoch = epoch;
      tr.partial = take < b;
      double slowest = 0.0;
      for (int w = 0; w < n; ++w) {
        const long t = load(w, pos, take);
        tr.effective_token_budget = std::max(tr.effective_token_budget, t);
        slowest = std::max(slowest, static_cast<double>(t) * opt.seconds_per_token + opt.step_overhead);
        tr.batch_sizes.push_back(take);
      }
      clock += slowest;
      tr.barrier_ordinals.assign(static_cast<std::size_t>(n), step);
      tr.barrier_times.assign(static_cast<std::size_t>(n), clock);
      pos += static_cast<std::size_t>(take);
      if (opt.failure && opt.failure->step == step) {
        tr.checkpoint = true;
        tr.error_terminated = true;
        out.push_back(std::move(tr));
        return out;
      }
      out.push_back(std::move(tr));
      ++step;
    }
  }
  if (!out.empty()) out.back().checkpoint = true;
  return out;
}

std::vector<long> per_worker_visits(const std::vector<TrainStepTrace>& traces, int workers) {
  std::vector<long> v(static_cast<std::size_t>(workers), 0);
  for (const auto& t : traces) {
    for (std::size_t w = 0; w < t.batch_sizes.size() && w < v.size(); ++w) v[w] += t.batch_sizes[w];
  }
  return v;
}

ServiceModel calibrate_service_model(int workload, const std::vector<std::pair<int, double>>& points) {
  if (points.size() != 3) throw std::invalid_argument("calibration needs exactly three points");
  if (workload < 1) throw std::invalid_argument("workload must be positive");
  double m[3][3], rhs[3];
  for (int r = 0; r < 3; ++r) {
    const int n = points[static_cast<std::size_t>(r)].first;
    if (n < 1) throw std::invalid_argument("server counts must be positive");
    m[r][0] = 1.0;
    m[r][1] = n - 1.0;
    m[r][2] = static_cast<double>((workload + n - 1) / n);
    rhs[r] = points[static_cast<std::size_t>(r)].second;
  }
  auto det3 = [](const double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double d = det3(m);
  if (std::abs(d) < 1e-12) throw std::invalid_argument("calibration points are degenerate");
  double x[3];
  for (int c = 0; c < 3; ++c) {
    double mc[3][3];
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) mc[r][k] = k == c ? rhs[r] : m[r][k];
    }
    x[c] = det3(mc) / d;
  }
  ServiceModel s;
  s.startup_time = x[0];
  s.startup_lag = x[1];
  s.service_time = x[2];
  s.capacity = 1;
  if (s.service_time <= 0 || s.startup_time < 0) throw std::invalid_argument("calibration gives a non-physical model");
  return s;
}

namespace {

enum EventKind { kComplete = 0, kHealth = 1, kReady = 2 };

struct Event {
  double time;
  int server;
  int kind;
  long seq;
  long request = -1;
  long generation = 0;
  bool healthy = false;

  bool operator>(const Event& o) const {
    return std::tie(time, server, kind, seq) > std::tie(o.time, o.server, o.kind, o.seq);
  }
};

}  // namespace

RolloutResult simulate_rollout_phase(int workload, const std::vector<ServerState>& servers,
                                     const ServiceModel& service, LbStrategy strategy,
                                     bool concurrent_startup, std::uint64_t seed,
                                     const std::vector<HealthEvent>& health_events) {
  if (workload < 1) throw std::invalid_argument("workload must be positive");
  if (servers.empty()) throw std::invalid_argument("no servers to simulate");
  if (service.capacity < 1) throw std::invalid_argument("server capacity must be at least 1");
  const std::size_t n = servers.size();

  std::vector<ServerState> state = servers;
  for (std::size_t i = 0; i < n; ++i) state[i].id = static_cast<int>(i);
  std::vector<bool> ready(n, false);
  std::vector<std::vector<long>> running(n);
  std::vector<double> busy(n, 0.0), resp_sum(n, 0.0);
  std::vector<long> generation(static_cast<std::size_t>(workload), 0);
  std::vector<double> started(static_cast<std::size_t>(workload), 0.0);
  std::deque<long> queue;
  for (long r = 0; r < workload; ++r) queue.push_back(r);

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  long seq = 0;
  RolloutResult res;
  for (std::size_t i = 0; i < n; ++i) {
    res.servers.push_back({static_cast<int>(i), state[i].port, 0, 0, 0, 0});
    const double t = concurrent_startup ? service.startup_time + static_cast<double>(i) * service.startup_lag
                                        : static_cast<double>(i + 1) * service.startup_time;
    res.servers[i].ready_at = t;
    events.push({t, static_cast<int>(i), kReady, seq++});
  }
  for (const HealthEvent& h : health_events) {
    if (h.server < 0 || static_cast<std::size_t>(h.server) >= n) {
      throw std::invalid_argument("health event for unknown server " + std::to_string(h.server));
    }
    Event e{h.time, h.server, kHealth, seq++};
    e.healthy = h.healthy;
    events.push(e);
  }

  LoadBalancer lb(strategy, seed);
  std::mt19937_64 jitter_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto dispatch = [&](double now) {
    while (!queue.empty()) {
      std::vector<bool> eligible(n);
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        eligible[i] = ready[i] && state[i].healthy && state[i].in_flight < service.capacity;
        any = any || eligible[i];
      }
      if (!any) return;
      const auto id = static_cast<std::size_t>(lb.next(state, &eligible));
      const long req = queue.front();
      queue.pop_front();
      double dur = service.service_time;
      if (service.jitter > 0) dur *= 1.0 - service.jitter + 2.0 * service.jitter * unit(jitter_rng);
      ++state[id].in_flight;
      running[id].push_back(req);
      started[static_cast<std::size_t>(req)] = now;
      Event e{now + dur, static_cast<int>(id), kComplete, seq++};
      e.request = req;
      e.generation = generation[static_cast<std::size_t>(req)];
      events.push(e);
    }
  };

  double now = 0.0;
  while (!events.empty() && res.completed < workload) {
    const Event e = events.top();
    events.pop();
    now = e.time;
    const auto s = static_cast<std::size_t>(e.server);
    if (e.kind == kReady) {
      ready[s] = true;
    } else if (e.kind == kComplete) {
      if (e.generation != generation[static_cast<std::size_t>(e.request)]) continue;
      auto& run = running[s];
      run.erase(std::find(run.begin(), run.end(), e.request));
      --state[s].in_flight;
      const double dur = now - started[static_cast<std::size_t>(e.request)];
      busy[s] += dur;
      resp_sum[s] += dur;
      ++state[s].request_count;
      state[s].mean_response_time = resp_sum[s] / static_cast<double>(state[s].request_count);
      ++res.completed;
      res.makespan = now;
    } else {
      state[s].healthy = e.healthy;
      if (!e.healthy) {
        std::sort(running[s].begin(), running[s].end());
        for (auto it = running[s].rbegin(); it != running[s].rend(); ++it) {
          ++generation[static_cast<std::size_t>(*it)];
          queue.push_front(*it);
          ++res.requeued;
        }
        running[s].clear();
        state[s].in_flight = 0;
      }
      const bool any_healthy = std::any_of(state.begin(), state.end(), [](const ServerState& x) { return x.healthy; });
      if (!any_healthy) {
        res.terminated_early = true;
        res.makespan = now;
        break;
      }
    }
    dispatch(now);
  }
  if (res.completed < workload && !res.terminated_early) {
    res.terminated_early = true;
    res.makespan = now;
  }
  for (std::size_t i = 0; i < n; ++i) {
    res.servers[i].requests = state[i].request_count;
    res.servers[i].busy_time = busy[i];
    res.servers[i].mean_response_time = state[i].mean_response_time;
  }
  return res;
}

ScalePhase parse_scale_phase(std::string_view s) {
  const std::string t = detail::ascii_lower(detail::trim(s));
  if (t == "pre_training_ddp") return ScalePhase::kPreTrainingDdp;
  if (t == "pre_training_single") return ScalePhase::kPreTrainingSingle;
  if (t == "post_training") return ScalePhase::kPostTraining;
  throw std::invalid_argument("unknown scale phase: " + std::string(s));
}

Cluster make_cluster(const ClusterConfig& cfg) {
  Cluster c;
  c.config = cfg;
  c.planned = plan_cluster(cfg);
  c.active = c.planned;
  return c;
}

Cluster scale_cluster(Cluster c, ScalePhase phase) {
  switch (phase) {
    case ScalePhase::kPreTrainingDdp:
      c.active.clear();
      c.monitoring = false;
      break;
    case ScalePhase::kPreTrainingSingle: {
      c.active.clear();
      auto it = std::min_element(c.planned.begin(), c.planned.end(),
                                 [](const ServerState& a, const ServerState& b) { return a.port < b.port; });
      if (it != c.planned.end()) c.active.push_back(*it);
      c.monitoring = false;
      break;
    }
    case ScalePhase::kPostTraining:
      c.active = c.planned;
      c.monitoring = true;
      break;
  }
  return c;
}

}  // namespace prosched
