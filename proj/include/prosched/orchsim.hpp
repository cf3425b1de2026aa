#pragma once

// Discrete-event model of a single-node rollout/training runtime: an
// inference server pool behind a load balancer, cluster scaling around the
// training phase, and data-parallel payload distribution with per-step
// barriers and dynamic batch sizing.
//
// The simulator is single-threaded. Simultaneous events are ordered by
// (time, server id, event kind), so a fixed seed replays exactly.

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace prosched {

enum class LbStrategy { kRoundRobin, kRandom, kResponseTime };
std::string_view to_string(LbStrategy s);
LbStrategy parse_lb_strategy(std::string_view s);

struct ClusterConfig {
  int max_servers_per_model = 8;
  int gpu_count = 4;
  double gpu_memory_fraction_per_server = 0.4;
  int port_start = 8000;
  int port_end = 8099;  // inclusive
  LbStrategy strategy = LbStrategy::kRoundRobin;
  bool concurrent_startup = true;
};

struct ServerState {
  int id = 0;
  int port = 0;
  int gpu = 0;
  bool healthy = true;
  int in_flight = 0;
  long request_count = 0;
  double mean_response_time = 0;  // simulated milliseconds or seconds, caller's unit
};

struct ClusterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Servers fill devices in order, floor(1/fraction) per device, capped at
/// max_servers_per_model. Throws ClusterError on an infeasible fraction or
/// too few ports.
std::vector<ServerState> plan_cluster(const ClusterConfig& cfg);

class LoadBalancer {
 public:
  explicit LoadBalancer(LbStrategy strategy, std::uint64_t seed = 0);

  /// Picks among servers with healthy=true (and eligible[i] when given).
  /// Throws ClusterError when nothing is selectable.
  int next(const std::vector<ServerState>& servers, const std::vector<bool>* eligible = nullptr);

 private:
  LbStrategy strategy_;
  std::mt19937_64 rng_;
  int last_ = -1;
};

int next_server(const std::vector<ServerState>& servers, LoadBalancer& lb);

struct PayloadPlan {
  int total = 0;
  int workers = 1;
  bool replicate = false;
  int aligned_size = 0;
  std::vector<std::vector<int>> assignments;
};

PayloadPlan partition_payload(int total, int workers, bool replicate);

struct FailureInjection {
  int worker = 0;
  int step = 0;
};

struct TrainOptions {
  int base_batch = 4;
  long token_budget = 0;  // 0 disables the budget check
  bool dynamic = false;
  int epochs = 1;
  std::vector<int> sample_tokens;  // per sample index; missing entries count 1
  double seconds_per_token = 0.001;
  double step_overhead = 0.0;
  std::optional<FailureInjection> failure;
};

struct TrainStepTrace {
  int step = 0;
  int epoch = 0;
  std::vector<int> batch_sizes;        // per worker
  std::vector<int> barrier_ordinals;   // per worker, identical by construction
  std::vector<double> barrier_times;   // per worker, cumulative
  long effective_token_budget = 0;  // tokens in the heaviest worker batch
  bool partial = false;  // tail batch shorter than the step's batch size
  bool checkpoint = false;
  bool error_terminated = false;
};

std::vector<TrainStepTrace> simulate_training(const PayloadPlan& plan, const TrainOptions& opt);

/// Samples seen by each worker across the traces.
std::vector<long> per_worker_visits(const std::vector<TrainStepTrace>& traces, int workers);

struct ServiceModel {
  double service_time = 1.0;  // per request
  int capacity = 1;           // concurrent requests per server
  double startup_time = 0.0;  // model load per server
  double startup_lag = 0.0;   // extra delay per server index when starting concurrently
  double jitter = 0.0;        // service time scaled by U[1-j, 1+j]
};

/// Fits (startup_time, startup_lag, service_time) so that
/// T(N) = S + (N-1)*L + ceil(W/N)*d passes through three measured points.
ServiceModel calibrate_service_model(int workload, const std::vector<std::pair<int, double>>& points);

struct HealthEvent {
  double time = 0;
  int server = 0;
  bool healthy = false;
};

struct ServerStats {
  int id = 0;
  int port = 0;
  long requests = 0;
  double busy_time = 0;
  double mean_response_time = 0;
  double ready_at = 0;
};

struct RolloutResult {
  double makespan = 0;
  int completed = 0;
  int requeued = 0;
  bool terminated_early = false;
  std::vector<ServerStats> servers;
};

RolloutResult simulate_rollout_phase(int workload, const std::vector<ServerState>& servers,
                                     const ServiceModel& service, LbStrategy strategy,
                                     bool concurrent_startup, std::uint64_t seed,
                                     const std::vector<HealthEvent>& health_events = {});

enum class ScalePhase { kPreTrainingDdp, kPreTrainingSingle, kPostTraining };
ScalePhase parse_scale_phase(std::string_view s);

struct Cluster {
  ClusterConfig config;
  std::vector<ServerState> planned;
  std::vector<ServerState> active;
  bool monitoring = true;
};

Cluster make_cluster(const ClusterConfig& cfg);
Cluster scale_cluster(Cluster c, ScalePhase phase);

}  // namespace prosched
