#include "irsopt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace irsopt {

namespace {

constexpr const char* kArtifactVersion = "irsopt-0.1.0";

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

int thread_budget() {
  if (const char* env = std::getenv("IRSOPT_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::uint64_t trial_salt(int sweep_index, int trial) {
  return (static_cast<std::uint64_t>(sweep_index) << 32) |
         static_cast<std::uint64_t>(trial);
}

struct DrlContext {
  MlpParams actor;
  int m = 0;
};

std::string checkpoint_path_for_m(const std::string& pattern, int m) {
  std::string path = pattern;
  const auto pos = path.find("{M}");
  if (pos != std::string::npos)
    path.replace(pos, 3, std::to_string(m));
  return path;
}

DrlContext load_drl_context(const ExperimentConfig& cfg, int m) {
  if (cfg.checkpoint.empty())
    throw MissingCheckpointError("drl method requires --checkpoint");
  const std::string path = checkpoint_path_for_m(cfg.checkpoint, m);
  MlpParams actor;
  try {
    actor = load_checkpoint(path);
  } catch (const std::exception& e) {
    throw MissingCheckpointError(std::string("cannot load checkpoint ") +
                                 path + ": " + e.what());
  }
  if (actor.arch.widths.back() != m)
    throw MissingCheckpointError("checkpoint trained for M=" +
                                 std::to_string(actor.arch.widths.back()) +
                                 ", experiment needs M=" + std::to_string(m));
  return DrlContext{std::move(actor), m};
}

struct Solution {
  PhaseConfig phases;
  double wall_ms = 0.0;
};

// DRL evaluation rollout on an env seeded per trial and loaded with the
// trial's nominal channels.
Solution drl_solve(const DrlContext& drl, const ExperimentConfig& cfg,
                   const ChannelSet& channels, const FadingParams& fading,
                   std::uint64_t env_seed) {
  EnvConfig env_cfg = cfg.env;
  env_cfg.fading = fading;
  env_cfg.seed = env_seed;
  IrsEnv env(env_cfg);
  const Eigen::VectorXd state = env.reset_with(channels);
  const double start = now_ms();
  const PhaseConfig phases =
      greedy_phases_from(drl.actor, env, state, cfg.drl_rollout);
  return Solution{phases, now_ms() - start};
}

Solution solve_with_method(Method method, const ExperimentConfig& cfg,
                           const ChannelSet& channels,
                           const FadingParams& fading, RngStream& method_rng,
                           std::uint64_t env_seed, const DrlContext* drl) {
  const int m = static_cast<int>(channels.h_br.rows());
  switch (method) {
    case Method::kDrl:
      return drl_solve(*drl, cfg, channels, fading, env_seed);
    case Method::kVamp: {
      const SolverTrace trace = vamp_solve(channels, cfg.solver);
      return Solution{trace.final_phases, trace.wall_time_s * 1e3};
    }
    case Method::kAdmm: {
      const SolverTrace trace = admm_solve(channels, cfg.solver);
      return Solution{trace.final_phases, trace.wall_time_s * 1e3};
    }
    case Method::kBcd: {
      const SolverTrace trace = coordinate_ascent(channels, cfg.solver);
      return Solution{trace.final_phases, trace.wall_time_s * 1e3};
    }
    case Method::kRandom: {
      const double start = now_ms();
      PhaseConfig phases = random_phases(method_rng, m);
      return Solution{std::move(phases), now_ms() - start};
    }
    case Method::kOracle: {
      const double start = now_ms();
      PhaseConfig phases = grid_oracle(channels, cfg.grid_levels);
      return Solution{std::move(phases), now_ms() - start};
    }
  }
  throw std::logic_error("solve_with_method: unknown method");
}

void base_meta(const ExperimentConfig& cfg, ResultTable& table) {
  table.meta["artifact_version"] = kArtifactVersion;
  table.meta["experiment"] = cfg.experiment;
  table.meta["seed"] = std::to_string(cfg.seed);
  table.meta["trials"] = std::to_string(cfg.trials);
  std::ostringstream sweep, methods;
  for (size_t i = 0; i < cfg.sweep.size(); ++i)
    sweep << (i ? ";" : "") << cfg.sweep[i];
  for (size_t i = 0; i < cfg.methods.size(); ++i)
    methods << (i ? ";" : "") << method_name(cfg.methods[i]);
  table.meta["sweep"] = sweep.str();
  table.meta["methods"] = methods.str();
  table.meta["drl_eval_protocol"] = "best-of-" +
                                    std::to_string(cfg.drl_rollout) +
                                    "-step greedy rollout";
  table.meta["drl_timing_protocol"] = "single actor forward pass";
}

void validate_common(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.sweep.empty()) throw ConfigError("sweep must be non-empty");
  if (cfg.methods.empty()) throw ConfigError("methods must be non-empty");
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kDrl: return "drl";
    case Method::kVamp: return "vamp";
    case Method::kAdmm: return "admm";
    case Method::kBcd: return "bcd";
    case Method::kRandom: return "random";
    case Method::kOracle: return "oracle";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "drl") return Method::kDrl;
  if (name == "vamp") return Method::kVamp;
  if (name == "admm") return Method::kAdmm;
  if (name == "bcd") return Method::kBcd;
  if (name == "random") return Method::kRandom;
  if (name == "oracle") return Method::kOracle;
  throw ConfigError("unknown method: " + name);
}

FadingParams fading_for_m(const FadingParams& base, int m) {
  if (m < 1) throw ConfigError("M must be >= 1");
  FadingParams fading = base;
  int m_y = static_cast<int>(std::sqrt(static_cast<double>(m)));
  while (m_y > 1 && m % m_y != 0) --m_y;
  fading.m_y = m_y;
  fading.m_x = m / m_y;
  return fading;
}

ResultTable run_snr_vs_m(const ExperimentConfig& cfg) {
  validate_common(cfg);
  ResultTable table;
  base_meta(cfg, table);

  const RngStream master(cfg.seed);
  const bool wants_drl = std::count(cfg.methods.begin(), cfg.methods.end(),
                                    Method::kDrl) > 0;

  for (int si = 0; si < static_cast<int>(cfg.sweep.size()); ++si) {
    const int m = static_cast<int>(cfg.sweep[si]);
    const FadingParams fading = fading_for_m(cfg.env.fading, m);
    DrlContext drl;
    if (wants_drl) drl = load_drl_context(cfg, m);

    std::vector<std::vector<ResultRow>> per_trial(cfg.trials);
    parallel_for(cfg.trials, thread_budget(), [&](int trial) {
      const RngStream trial_base = master.derive(trial_salt(si, trial));
      RngStream ch_rng = trial_base.derive(0);
      const ChannelSet channels = sample_channels(ch_rng, fading, cfg.env.geom);
      for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        RngStream method_rng = trial_base.derive(1 + mi);
        const std::uint64_t env_seed = trial_base.derive(1000).next_u64();
        const Solution sol =
            solve_with_method(cfg.methods[mi], cfg, channels, fading,
                              method_rng, env_seed, &drl);
        const Eigen::VectorXcd h = effective_channel(channels, sol.phases);
        const Beamformer f = mrt(h, cfg.env.sys.p_max);
        per_trial[trial].push_back(
            ResultRow{method_name(cfg.methods[mi]), static_cast<double>(m),
                      trial, snr_db(h, f, cfg.env.sys.sigma2_n), 0.0, false,
                      sol.wall_ms});
      }
    });
    for (auto& rows : per_trial)
      table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  }
  return table;
}

namespace {

// Shared freeze-then-re-evaluate driver for the two robustness experiments.
// `make_perturbed(sweep_index, nominal, rng)` produces the stressed channels.
ResultTable run_robustness(
    const ExperimentConfig& cfg,
    const std::function<ChannelSet(double, const ChannelSet&, RngStream&)>&
        make_perturbed) {
  validate_common(cfg);
  ResultTable table;
  base_meta(cfg, table);
  table.meta["protocol"] = cfg.requery_on_perturbed
                               ? "re-query on perturbed CSI"
                               : "freeze phases and beamformer";

  const RngStream master(cfg.seed);
  const int m = cfg.env.fading.m();
  const bool wants_drl = std::count(cfg.methods.begin(), cfg.methods.end(),
                                    Method::kDrl) > 0;
  DrlContext drl;
  if (wants_drl) drl = load_drl_context(cfg, m);

  std::vector<std::vector<ResultRow>> per_trial(cfg.trials);
  parallel_for(cfg.trials, thread_budget(), [&](int trial) {
    const RngStream trial_base = master.derive(trial_salt(0, trial));
    RngStream ch_rng = trial_base.derive(0);
    const ChannelSet nominal =
        sample_channels(ch_rng, cfg.env.fading, cfg.env.geom);

    // Nominal solutions, frozen afterwards.
    struct Frozen {
      Solution sol;
      Beamformer f;
      double nominal_db;
    };
    std::vector<Frozen> frozen;
    for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      RngStream method_rng = trial_base.derive(1 + mi);
      const std::uint64_t env_seed = trial_base.derive(1000).next_u64();
      Solution sol = solve_with_method(cfg.methods[mi], cfg, nominal,
                                       cfg.env.fading, method_rng, env_seed,
                                       &drl);
      const Eigen::VectorXcd h = effective_channel(nominal, sol.phases);
      Beamformer f = mrt(h, cfg.env.sys.p_max);
      const double nominal_db = snr_db(h, f, cfg.env.sys.sigma2_n);
      frozen.push_back(Frozen{std::move(sol), std::move(f), nominal_db});
    }

    for (int si = 0; si < static_cast<int>(cfg.sweep.size()); ++si) {
      RngStream perturb_rng = trial_base.derive(10000 + si);
      const ChannelSet stressed =
          make_perturbed(cfg.sweep[si], nominal, perturb_rng);
      for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const Frozen& fr = frozen[mi];
        double perturbed_db;
        if (cfg.requery_on_perturbed && cfg.methods[mi] == Method::kDrl) {
          RngStream method_rng = trial_base.derive(20000 + si);
          const std::uint64_t env_seed =
              trial_base.derive(30000 + si).next_u64();
          const Solution requeried = drl_solve(drl, cfg, stressed,
                                               cfg.env.fading, env_seed);
          const Eigen::VectorXcd h =
              effective_channel(stressed, requeried.phases);
          perturbed_db =
              snr_db(h, mrt(h, cfg.env.sys.p_max), cfg.env.sys.sigma2_n);
        } else {
          const Eigen::VectorXcd h = effective_channel(stressed, fr.sol.phases);
          perturbed_db = snr_db(h, fr.f, cfg.env.sys.sigma2_n);
        }
        per_trial[trial].push_back(ResultRow{
            method_name(cfg.methods[mi]), cfg.sweep[si], trial, perturbed_db,
            fr.nominal_db - perturbed_db, true, fr.sol.wall_ms});
      }
    }
  });
  for (auto& rows : per_trial)
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  return table;
}

}  // namespace

ResultTable run_robust_noise(const ExperimentConfig& cfg) {
  for (double eps : cfg.sweep)
    if (eps < 0.0 || eps > 1.0)
      throw ConfigError("robust-noise sweep values must be in [0, 1]");
  return run_robustness(
      cfg, [](double eps, const ChannelSet& nominal, RngStream& rng) {
        return perturb_channels(nominal, eps, rng);
      });
}

ResultTable run_robust_mobility(const ExperimentConfig& cfg) {
  const LinkGeometry geom = cfg.env.geom;
  return run_robustness(
      cfg, [geom](double delta_d, const ChannelSet& nominal, RngStream&) {
        return rescale_mobility(nominal, geom, delta_d);
      });
}

ResultTable bench_inference(const ExperimentConfig& cfg) {
  validate_common(cfg);
  ResultTable table;
  base_meta(cfg, table);
  table.meta["timing_scope"] = "solver/policy execution only";

  const RngStream master(cfg.seed);
  const bool wants_drl = std::count(cfg.methods.begin(), cfg.methods.end(),
                                    Method::kDrl) > 0;

  for (int si = 0; si < static_cast<int>(cfg.sweep.size()); ++si) {
    const int m = static_cast<int>(cfg.sweep[si]);
    const FadingParams fading = fading_for_m(cfg.env.fading, m);

    // Timing runs stay single-threaded; a randomly initialized actor has
    // identical cost to a trained one, so bench does not need a checkpoint.
    DrlContext drl;
    if (wants_drl) {
      if (!cfg.checkpoint.empty()) {
        drl = load_drl_context(cfg, m);
      } else {
        RngStream init_rng = master.derive(trial_salt(si, 1 << 24));
        drl.actor = MlpParams::init(
            ArchSpec{{m + 1, cfg.agent.hidden1, cfg.agent.hidden2, m},
                     OutputActivation::kScaledPhase},
            init_rng);
        drl.m = m;
      }
    }

    // Warm-up draw per sweep point.
    {
      RngStream warm = master.derive(trial_salt(si, 1 << 25));
      const ChannelSet ch = sample_channels(warm, fading, cfg.env.geom);
      vamp_solve(ch, cfg.solver);
    }

    for (int trial = 0; trial < cfg.trials; ++trial) {
      const RngStream trial_base = master.derive(trial_salt(si, trial));
      RngStream ch_rng = trial_base.derive(0);
      const ChannelSet channels = sample_channels(ch_rng, fading, cfg.env.geom);
      for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const Method method = cfg.methods[mi];
        RngStream method_rng = trial_base.derive(1 + mi);
        PhaseConfig phases;
        double wall_ms = 0.0;
        if (method == Method::kDrl) {
          // Table-2 protocol: one forward pass of the policy.
          RngStream state_rng = trial_base.derive(2000);
          const PhaseConfig probe = random_phases(state_rng, m);
          const Eigen::VectorXcd h0 = effective_channel(channels, probe);
          const double probe_snr =
              snr_db(h0, mrt(h0, cfg.env.sys.p_max), cfg.env.sys.sigma2_n);
          const Eigen::VectorXd state = encode_state(probe_snr, probe);
          const double start = now_ms();
          phases = PhaseConfig{forward_one(drl.actor, state)};
          wall_ms = now_ms() - start;
        } else {
          const Solution sol = solve_with_method(
              method, cfg, channels, fading, method_rng, 0, nullptr);
          phases = sol.phases;
          wall_ms = sol.wall_ms;
        }
        const Eigen::VectorXcd h = effective_channel(channels, phases);
        table.rows.push_back(ResultRow{
            method_name(method), static_cast<double>(m), trial,
            snr_db(h, mrt(h, cfg.env.sys.p_max), cfg.env.sys.sigma2_n), 0.0,
            false, wall_ms});
      }
    }
  }
  return table;
}

std::string csv_string(const ResultTable& table) {
  std::ostringstream out;
  out << "method,sweep_value,trial,snr_db,snr_loss_db,wall_time_ms\n";
  char buf[64];
  for (const auto& row : table.rows) {
    out << row.method << ',';
    std::snprintf(buf, sizeof(buf), "%.10g", row.sweep_value);
    out << buf << ',' << row.trial << ',';
    std::snprintf(buf, sizeof(buf), "%.10g", row.snr_db);
    out << buf << ',';
    if (row.has_loss) {
      std::snprintf(buf, sizeof(buf), "%.10g", row.snr_loss_db);
      out << buf;
    }
    out << ',';
    std::snprintf(buf, sizeof(buf), "%.6g", row.wall_time_ms);
    out << buf << '\n';
  }
  return out.str();
}

void write_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // LF endings on every platform
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << csv_string(table);
}

void write_manifest(const ExperimentConfig& cfg, const ResultTable& table,
                    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
  for (const auto& [key, value] : table.meta) out << key << "=" << value << "\n";
  out << "rows=" << table.rows.size() << "\n";
  out << "env.n_bs=" << cfg.env.fading.n_bs << "\n";
  out << "env.m=" << cfg.env.fading.m() << "\n";
  out << "env.k1=" << cfg.env.fading.k1 << "\n";
  out << "env.k2=" << cfg.env.fading.k2 << "\n";
  out << "env.d_bu=" << cfg.env.geom.d_bu << "\n";
  out << "env.d_br=" << cfg.env.geom.d_br << "\n";
  out << "env.d_ru=" << cfg.env.geom.d_ru << "\n";
  out << "solver.max_iters=" << cfg.solver.max_iters << "\n";
  out << "checkpoint=" << cfg.checkpoint << "\n";
}

}  // namespace irsopt
