#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "irsopt/harness.hpp"

namespace irsopt {

namespace {

using nlohmann::json;

// Minimal flat-TOML reader: `key = value` lines with numbers, booleans,
// quoted strings and one-level arrays. Section headers are accepted and
// ignored (the key set is flat).
json parse_flat_toml(std::istream& in) {
  json out = json::object();
  std::string line;
  int lineno = 0;
  const auto parse_scalar = [](std::string token) -> json {
    if (token.size() >= 2 && token.front() == '"' && token.back() == '"')
      return token.substr(1, token.size() - 2);
    if (token == "true") return true;
    if (token == "false") return false;
    try {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      if (used == token.size()) return v;
    } catch (...) {
    }
    throw ConfigError("config: cannot parse value '" + token + "'");
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key or value");

    if (value.front() == '[') {
      if (value.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": unterminated array");
      json arr = json::array();
      std::stringstream items(value.substr(1, value.size() - 2));
      std::string item;
      while (std::getline(items, item, ',')) {
        item = trim(item);
        if (!item.empty()) arr.push_back(parse_scalar(item));
      }
      out[key] = std::move(arr);
    } else {
      out[key] = parse_scalar(value);
    }
  }
  return out;
}

template <typename T>
void take(json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      field = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError(std::string("config: bad value for key '") + key + "'");
    }
    j.erase(it);
  }
}

void apply_config(json j, ExperimentConfig& cfg) {
  take(j, "experiment", cfg.experiment);
  take(j, "sweep", cfg.sweep);
  take(j, "trials", cfg.trials);
  if (auto it = j.find("methods"); it != j.end()) {
    std::vector<std::string> names = it->get<std::vector<std::string>>();
    cfg.methods.clear();
    for (const auto& name : names) cfg.methods.push_back(method_from_name(name));
    j.erase(it);
  }
  take(j, "seed", cfg.seed);
  take(j, "checkpoint", cfg.checkpoint);
  take(j, "out", cfg.out_dir);
  take(j, "requery_on_perturbed", cfg.requery_on_perturbed);
  take(j, "grid_levels", cfg.grid_levels);
  take(j, "drl_rollout", cfg.drl_rollout);

  take(j, "n_bs", cfg.env.fading.n_bs);
  take(j, "m_x", cfg.env.fading.m_x);
  take(j, "m_y", cfg.env.fading.m_y);
  if (auto it = j.find("m"); it != j.end()) {
    cfg.env.fading = fading_for_m(cfg.env.fading, it->get<int>());
    j.erase(it);
  }
  take(j, "k1", cfg.env.fading.k1);
  take(j, "k2", cfg.env.fading.k2);
  take(j, "horizon", cfg.env.horizon);
  take(j, "env_seed", cfg.env.seed);
  double p_max_dbm = 5.0, noise_dbm = -80.0;
  bool have_power = j.contains("p_max_dbm") || j.contains("noise_dbm");
  take(j, "p_max_dbm", p_max_dbm);
  take(j, "noise_dbm", noise_dbm);
  if (have_power) cfg.env.sys = SystemParams::from_dbm(p_max_dbm, noise_dbm);

  take(j, "d_bu", cfg.env.geom.d_bu);
  take(j, "d_br", cfg.env.geom.d_br);
  take(j, "d_ru", cfg.env.geom.d_ru);
  take(j, "alpha_bu", cfg.env.geom.alpha_bu);
  take(j, "alpha_br", cfg.env.geom.alpha_br);
  take(j, "alpha_ru", cfg.env.geom.alpha_ru);
  take(j, "d0", cfg.env.geom.d0);
  take(j, "g0_db", cfg.env.geom.g0_db);
  take(j, "bs_aod", cfg.env.geom.bs_aod);
  take(j, "irs_aoa_az", cfg.env.geom.irs_aoa_az);
  take(j, "irs_aoa_el", cfg.env.geom.irs_aoa_el);
  take(j, "irs_aod_az", cfg.env.geom.irs_aod_az);
  take(j, "irs_aod_el", cfg.env.geom.irs_aod_el);

  take(j, "max_iters", cfg.solver.max_iters);
  take(j, "rho_admm", cfg.solver.rho_admm);
  take(j, "damping", cfg.solver.damping);
  take(j, "tol", cfg.solver.tol);

  take(j, "gamma", cfg.agent.gamma);
  take(j, "tau", cfg.agent.tau);
  take(j, "batch_size", cfg.agent.batch_size);
  take(j, "t_train", cfg.agent.t_train);
  take(j, "n_train", cfg.agent.n_train);
  take(j, "t_adapt", cfg.agent.t_adapt);
  take(j, "total_env_steps", cfg.agent.total_env_steps);
  take(j, "lr", cfg.agent.lr);
  take(j, "replay_capacity", cfg.agent.replay_capacity);
  take(j, "hidden1", cfg.agent.hidden1);
  take(j, "hidden2", cfg.agent.hidden2);
  take(j, "normalize_reward", cfg.agent.normalize_reward);

  take(j, "sigma0", cfg.noise.sigma_k);
  take(j, "alpha_adapt", cfg.noise.alpha_adapt);
  take(j, "delta", cfg.noise.delta);
  take(j, "sigma_a", cfg.noise.sigma_a);

  if (!j.empty())
    throw ConfigError("config: unknown key '" + j.begin().key() + "'");
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
  } else {
    j = parse_flat_toml(in);
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig cfg;
  apply_config(std::move(j), cfg);
  return cfg;
}

namespace {

ResultTable dispatch(const ExperimentConfig& cfg) {
  if (cfg.experiment == "snr-vs-m") return run_snr_vs_m(cfg);
  if (cfg.experiment == "robust-noise") return run_robust_noise(cfg);
  if (cfg.experiment == "robust-mobility") return run_robust_mobility(cfg);
  if (cfg.experiment == "bench-inference") return bench_inference(cfg);
  throw ConfigError("unknown experiment tag: " + cfg.experiment);
}

void apply_flag_overrides(ExperimentConfig& cfg, const std::string& seed_str,
                          const std::string& out, const std::string& ckpt,
                          const std::string& methods, int trials) {
  if (!seed_str.empty()) cfg.seed = std::stoull(seed_str);
  if (!out.empty()) cfg.out_dir = out;
  if (!ckpt.empty()) cfg.checkpoint = ckpt;
  if (trials > 0) cfg.trials = trials;
  if (!methods.empty()) {
    cfg.methods.clear();
    std::stringstream ss(methods);
    std::string name;
    while (std::getline(ss, name, ','))
      if (!name.empty()) cfg.methods.push_back(method_from_name(name));
  }
}

int run_train(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::string ckpt_path =
      cfg.checkpoint.empty()
          ? (std::filesystem::path(cfg.out_dir) / "actor-ckpt.json").string()
          : cfg.checkpoint;

  EnvConfig env_cfg = cfg.env;
  env_cfg.seed = RngStream(cfg.seed).derive(7).next_u64();
  IrsEnv env(env_cfg);
  DdpgAgent agent(env.num_elements(), cfg.agent, cfg.noise, cfg.seed);
  const TrainingCurve curve = agent.train(env);

  agent.save(ckpt_path);
  write_training_curve(
      (std::filesystem::path(cfg.out_dir) / "training_curve.csv").string(),
      curve);

  ResultTable dummy;
  dummy.meta["artifact_version"] = "irsopt-0.1.0";
  dummy.meta["experiment"] = "train";
  dummy.meta["seed"] = std::to_string(cfg.seed);
  dummy.meta["episodes"] = std::to_string(curve.episodes.size());
  dummy.meta["skipped_warmup_phases"] = std::to_string(curve.skipped_phases);
  dummy.meta["checkpoint"] = ckpt_path;
  write_manifest(cfg, dummy,
                 (std::filesystem::path(cfg.out_dir) / "manifest.txt").string());

  if (!curve.episodes.empty())
    std::cout << "trained " << curve.episodes.size()
              << " episodes; final mean reward "
              << curve.episodes.back().mean_reward_db << " dB\n";
  std::cout << "checkpoint written to " << ckpt_path << "\n";
  return 0;
}

int run_eval(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  ExperimentConfig local = cfg;
  if (local.sweep.empty()) {
    if (local.experiment == "snr-vs-m")
      local.sweep = {16, 32, 64};
    else if (local.experiment == "robust-noise")
      local.sweep = {1.0, 0.99, 0.95, 0.9, 0.8, 0.5};
    else if (local.experiment == "robust-mobility")
      local.sweep = {5, 10, 15, 20, 25};
  }
  const ResultTable table = dispatch(local);
  const auto out = std::filesystem::path(local.out_dir);
  write_csv(table, (out / "results.csv").string());
  write_manifest(local, table, (out / "manifest.txt").string());
  std::cout << "wrote " << table.rows.size() << " rows to "
            << (out / "results.csv").string() << "\n";
  return 0;
}

int run_bench(ExperimentConfig cfg) {
  cfg.experiment = "bench-inference";
  if (cfg.sweep.empty()) cfg.sweep = {50, 100, 144, 196, 256};
  if (cfg.methods.empty() ||
      (cfg.methods.size() == 3 && cfg.methods[0] == Method::kVamp))
    cfg.methods = {Method::kVamp, Method::kAdmm, Method::kDrl};
  std::filesystem::create_directories(cfg.out_dir);
  const ResultTable table = bench_inference(cfg);
  const auto out = std::filesystem::path(cfg.out_dir);
  write_csv(table, (out / "results.csv").string());
  write_manifest(cfg, table, (out / "manifest.txt").string());
  std::cout << "wrote " << table.rows.size() << " rows to "
            << (out / "results.csv").string() << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"IRS phase-shift optimization and benchmarking suite"};
  app.require_subcommand(1);

  std::string config_path, seed_str, out_dir, checkpoint, methods;
  int trials = -1;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON or TOML config file");
    sub->add_option("--seed", seed_str, "64-bit master seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--checkpoint", checkpoint, "actor checkpoint path");
    sub->add_option("--method", methods, "comma-separated method list");
    sub->add_option("--trials", trials, "trials per sweep point");
  };

  CLI::App* train = app.add_subcommand("train", "train the DDPG agent");
  CLI::App* eval = app.add_subcommand("eval", "run an evaluation experiment");
  CLI::App* bench = app.add_subcommand("bench", "inference-time benchmark");
  add_common(train);
  add_common(eval);
  add_common(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    apply_flag_overrides(cfg, seed_str, out_dir, checkpoint, methods, trials);

    if (train->parsed()) return run_train(cfg);
    if (bench->parsed()) return run_bench(std::move(cfg));
    return run_eval(cfg);
  } catch (const MissingCheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace irsopt
