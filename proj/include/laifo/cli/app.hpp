#pragma once

// The `laifo` command line. run() parses argv, executes one subcommand and
// maps library errors to exit codes:
//   0 success, 1 runtime failure (I/O, corrupt files),
//   2 contract violations (bad flags, config invariants, capability
//     mismatches such as "expert actions required"),
//   3 verify-theory found a bound violated on an instance where it must hold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "laifo/cli/aggregate.hpp"
#include "laifo/cli/hash.hpp"
#include "laifo/envs/continuous.hpp"
#include "laifo/expertgen/expert.hpp"
#include "laifo/imitate/config.hpp"
#include "laifo/imitate/report.hpp"
#include "laifo/imitate/train.hpp"
#include "laifo/nets/checkpoint.hpp"
#include "laifo/replay/dataset.hpp"
#include "laifo/theory/bounds.hpp"

namespace laifo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class F>
void with_precision(imitate::Precision p, F&& f) {
  if (p == imitate::Precision::f32) {
    f.template operator()<float>();
  } else {
    f.template operator()<double>();
  }
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

inline void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

inline fs::path prepare_out_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("--out-dir is required");
  fs::create_directories(dir);
  return fs::path(dir);
}

/// --config FILE plus one --<key> flag per config key (dashes or
/// underscores) and repeatable --set key=value. Flags beat the file.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key=value configuration file");
    for (const auto& key : imitate::config_keys()) {
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      std::string names = "--" + dashed;
      if (dashed != key) names += ",--" + key;
      options[key] = app->add_option(names, values[key], "config override for '" + key + "'");
    }
    app->add_option("--set", sets, "extra key=value override (repeatable)");
  }

  std::vector<std::pair<std::string, std::string>> overrides() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& key : imitate::config_keys()) {
      if (options.at(key)->count() > 0) out.emplace_back(key, values.at(key));
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return out;
  }

  imitate::Config build() const { return imitate::load_config(file, overrides()); }
};

inline std::function<void(const imitate::TrainRow&)> row_sink(imitate::MetricsWriter& w, std::ostream& out) {
  return [&w, &out](const imitate::TrainRow& r) {
    w.append(r);
    std::ostringstream line;
    line << "frame " << r.frame << "  eval_return " << std::fixed << std::setprecision(2) << r.eval_return
         << "  wall " << std::setprecision(1) << r.wall_clock_s << "s\n";
    out << line.str() << std::flush;
  };
}

inline json expert_score_record(double score, const std::string& env, const std::string& source) {
  return {{"score", score}, {"env", env}, {"source", source}};
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct TrainExpertArgs {
  std::string env;
  std::string out_dir;
  detail::ConfigFlags cfg;
};

inline int cmd_train_expert(const TrainExpertArgs& a, std::ostream& out) {
  const imitate::Config cfg = a.cfg.build();
  const fs::path dir = detail::prepare_out_dir(a.out_dir);
  const imitate::Config used = expertgen::expert_config(cfg, cfg.frames);
  detail::write_text(dir / "config.txt", imitate::to_text(used));
  imitate::MetricsWriter metrics((dir / "metrics.csv").string());
  detail::with_precision(cfg.precision, [&]<class T>() {
    auto e = expertgen::train_expert<T>(a.env, cfg.frames, cfg, detail::row_sink(metrics, out));
    json meta = {{"kind", "expert"},  {"algo", "rl"},        {"env", e.state_env},
                 {"score", e.score},  {"seed", cfg.seed},    {"config", imitate::to_text(used)}};
    nets::save_checkpoint((dir / "expert.ckpt").string(), e.bundle.named_parameters(), meta);
    detail::write_json(dir / "expert_score.json", detail::expert_score_record(e.score, e.state_env, "eval"));
    detail::write_json(dir / "run.json", {{"algo", "rl"},
                                          {"env", e.state_env},
                                          {"requested_env", a.env},
                                          {"seed", cfg.seed},
                                          {"frames", cfg.frames},
                                          {"expert_data", nullptr}});
    out << "expert score " << e.score << " on " << e.state_env << "\n";
  });
  return 0;
}

struct RecordArgs {
  std::string expert;
  std::string env;
  int episodes = 100;
  bool with_actions = false;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string name = "expert.laifo";
};

inline int cmd_record(const RecordArgs& a, std::ostream& out) {
  const nets::Checkpoint ck = nets::load_checkpoint(a.expert);
  if (ck.meta.value("kind", "") != "expert") throw UsageError("record: '" + a.expert + "' is not an expert checkpoint");
  const std::string state_env = ck.meta.at("env").get<std::string>();
  const imitate::Config cfg = imitate::parse_config(ck.meta.at("config").get<std::string>());
  const std::string obs_env = imitate::resolve_env_id(a.env, cfg);
  if (envs::full_state_id(obs_env) != state_env) {
    throw UsageError("record: expert acts on '" + state_env + "' and cannot render '" + obs_env + "'");
  }
  if (a.episodes < 1) throw UsageError("record: --episodes must be >= 1");
  const fs::path dir = detail::prepare_out_dir(a.out_dir);
  const fs::path file = dir / a.name;
  replay::ExpertDataset ds;
  detail::with_precision(cfg.precision, [&]<class T>() {
    nets::Rng rng(0);
    auto env = envs::make_env(state_env);
    auto bundle = imitate::make_bundle<T>(imitate::Algo::rl, imitate::layout_of(*env), cfg, rng);
    nets::restore(ck, bundle.named_parameters());
    ds = expertgen::record(bundle, state_env, obs_env, a.episodes, a.with_actions, a.seed);
  });
  replay::save_dataset(ds, file.string());
  const double mean = ds.mean_return();
  detail::write_json(dir / "expert_score.json", detail::expert_score_record(mean, obs_env, "recorded"));
  out << "recorded " << ds.count() << " episodes on " << obs_env << (a.with_actions ? " with actions" : "")
      << ", mean return " << mean << "\n"
      << "sha1 " << file_hash(file.string()) << "  " << file.string() << "\n";
  return 0;
}

struct ImitateArgs {
  std::string algo;
  std::string env;
  std::string expert_data;
  std::string out_dir;
  std::optional<double> expert_score;
  std::string expert_score_file;
  bool no_videos = false;
  detail::ConfigFlags cfg;
};

/// Resolves the expert score a run is normalized by: an explicit value, a
/// score record from train-expert/record, or the dataset's own returns.
inline json resolve_expert_score(const ImitateArgs& a, const replay::ExpertDataset& ds) {
  if (a.expert_score) return detail::expert_score_record(*a.expert_score, ds.env, "flag");
  if (!a.expert_score_file.empty()) {
    json j = read_json(a.expert_score_file);
    if (!j.contains("score")) throw ReportError("missing expert score: '" + a.expert_score_file + "' has no 'score'");
    j["source"] = a.expert_score_file;
    return j;
  }
  if (!ds.has_rewards) {
    throw UsageError("missing expert score: dataset has no rewards; pass --expert-score or --expert-score-file");
  }
  return detail::expert_score_record(ds.mean_return(), ds.env, "dataset");
}

inline int cmd_imitate(imitate::Algo algo, const ImitateArgs& a, std::ostream& out) {
  std::vector<std::pair<std::string, std::string>> extra = a.cfg.overrides();
  if (a.no_videos) extra.emplace_back("imitation_weight", "0");
  const imitate::Config cfg = imitate::load_config(a.cfg.file, extra);
  if (a.expert_data.empty()) throw UsageError(std::string(imitate::algo_name(algo)) + ": --expert-data is required");
  const replay::ExpertDataset ds = replay::load_dataset(a.expert_data);
  const auto env_id = imitate::training_env_id(algo, imitate::resolve_env_id(a.env, cfg));
  imitate::check_capabilities(algo, env_id, &ds);
  const json score = resolve_expert_score(a, ds);
  const fs::path dir = detail::prepare_out_dir(a.out_dir);

  detail::write_text(dir / "config.txt", imitate::to_text(cfg));
  json run = {{"algo", imitate::algo_name(algo)},
              {"env", a.env},
              {"training_env", env_id},
              {"seed", cfg.seed},
              {"frames", cfg.frames},
              {"expert_data", fs::absolute(a.expert_data).string()},
              {"expert_sha1", file_hash(a.expert_data)},
              {"expert_episodes", ds.count()},
              {"expert_has_actions", ds.has_actions}};
  if (algo == imitate::Algo::rl_plus_videos) run["videos"] = !a.no_videos;
  detail::write_json(dir / "run.json", run);
  detail::write_json(dir / "expert_score.json", score);

  imitate::MetricsWriter metrics((dir / "metrics.csv").string());
  detail::with_precision(cfg.precision, [&]<class T>() {
    imitate::Trainer<T> trainer(algo, a.env, &ds, cfg);
    const auto rep = trainer.run(detail::row_sink(metrics, out));
    json meta = {{"kind", "agent"}, {"algo", imitate::algo_name(algo)}, {"env", trainer.env_id()},
                 {"seed", cfg.seed}, {"config", imitate::to_text(cfg)}};
    nets::save_checkpoint((dir / "final.ckpt").string(), trainer.bundle().named_parameters(), meta);
    const double s = score.at("score").get<double>();
    out << imitate::algo_name(algo) << " final return " << rep.final_return() << " (normalized " << rep.final_return() / s
        << ")\n";
  });
  return 0;
}

struct TheoryArgs {
  std::string claim = "theorem2";
  int instances = 100;
  std::uint64_t seed = 0;
  std::string structure;  ///< empty picks the claim's natural structure
  std::string divergence = "tv";
  int k = 0;              ///< 0 picks 2 for theorem3, 1 otherwise
  double gamma = 0.9;
  int max_states = 16;
  int max_actions = 4;
  int max_observations = 8;
  double tolerance = 1e-8;
  std::string out_dir;
};

/// Whether the claim's preconditions hold on this kind of instance, so a
/// negative slack is a genuine failure rather than a diagnostic.
inline bool claim_must_hold(theory::Claim c, envs::Structure s) {
  switch (c) {
    case theory::Claim::theorem1:
    case theory::Claim::theorem2:
    case theory::Claim::lemma1:
    case theory::Claim::theorem3: return s != envs::Structure::random;
    case theory::Claim::corollary1: return s == envs::Structure::injective;
    case theory::Claim::lemma2:
    case theory::Claim::lemma4: return true;
  }
  return true;
}

inline envs::Structure parse_structure(const std::string& s) {
  if (s == "random") return envs::Structure::random;
  if (s == "mdp") return envs::Structure::mdp;
  if (s == "injective" || s == "injective-deterministic") return envs::Structure::injective;
  throw UsageError("unknown structure '" + s + "' (random, mdp, injective)");
}

inline int cmd_verify_theory(const TheoryArgs& a, std::ostream& out, std::ostream& err) {
  const theory::Claim claim = theory::parse_claim(a.claim);
  const theory::FKind kind = theory::parse_fkind(a.divergence);
  theory::InstanceSpec spec;
  spec.structure = !a.structure.empty()                ? parse_structure(a.structure)
                   : claim == theory::Claim::corollary1 ? envs::Structure::injective
                                                        : envs::Structure::mdp;
  spec.k = a.k > 0 ? a.k : (claim == theory::Claim::theorem3 ? 2 : 1);
  spec.gamma = a.gamma;
  spec.max_states = a.max_states;
  spec.max_actions = a.max_actions;
  spec.max_observations = a.max_observations;
  if (a.instances < 1) throw UsageError("verify-theory: --instances must be >= 1");
  if (spec.max_states < 2 || spec.max_states > 32 || spec.max_observations < 2 || spec.max_observations > 32) {
    throw UsageError("verify-theory: model sizes must satisfy 2 <= |S|, |X| <= 32");
  }
  if (spec.max_actions < 2 || spec.max_actions > 8) throw UsageError("verify-theory: |A| must lie in [2, 8]");
  if (spec.k < 1 || spec.k > 2) throw UsageError("verify-theory: window length k must be 1 or 2");
  if (!(spec.gamma >= 0.0 && spec.gamma < 1.0)) throw UsageError("verify-theory: gamma must lie in [0, 1)");

  std::mt19937_64 rng(a.seed);
  json reports = json::array();
  std::ostringstream table;
  table << std::left << std::setw(5) << "#" << std::setw(4) << "S" << std::setw(4) << "A" << std::setw(4) << "X"
        << std::right << std::setw(14) << "lhs" << std::setw(14) << "rhs" << std::setw(14) << "slack" << std::setw(12)
        << "violation" << "\n";
  double min_slack = std::numeric_limits<double>::infinity();
  int failures = 0;
  const bool strict = claim_must_hold(claim, spec.structure);
  for (int i = 0; i < a.instances; ++i) {
    const auto inst = theory::random_instance(spec, rng);
    const auto r = theory::verify(claim, inst.model, inst.scheme, inst.pi_theta, inst.pi_expert, kind);
    json j = r.to_json();
    j["instance"] = i;
    reports.push_back(j);
    min_slack = std::min(min_slack, r.slack);
    if (strict && r.slack < -a.tolerance) ++failures;
    table << std::left << std::setw(5) << i << std::setw(4) << r.S << std::setw(4) << r.A << std::setw(4) << r.X
          << std::right << std::scientific << std::setprecision(4) << std::setw(14) << r.lhs << std::setw(14) << r.rhs
          << std::setw(14) << r.slack << std::setw(12) << std::setprecision(2) << r.violation << std::defaultfloat
          << "\n";
  }
  table << a.claim << " (" << a.divergence << ", " << envs::structure_name(spec.structure) << ", k=" << spec.k
        << "): " << a.instances << " instances, min slack " << std::scientific << min_slack << std::defaultfloat
        << ", " << failures << " below -" << a.tolerance << (strict ? "" : " (diagnostic only)") << "\n";

  if (!a.out_dir.empty()) {
    const fs::path dir = detail::prepare_out_dir(a.out_dir);
    detail::write_json(dir / ("theory_" + a.claim + ".json"), reports);
    out << table.str();
  } else {
    out << reports.dump(2) << "\n";
    err << table.str();
  }
  if (failures > 0) {
    throw VerificationFailure(a.claim + ": slack below -" + std::to_string(a.tolerance) + " on " +
                              std::to_string(failures) + " instance(s)");
  }
  return 0;
}

struct ReportArgs {
  std::vector<std::string> run_dirs;
  std::string out_dir;
};

inline int cmd_report(const ReportArgs& a, std::ostream& out) {
  std::vector<RunSummary> runs;
  for (const auto& d : a.run_dirs) runs.push_back(summarize_run_dir(d));
  const auto groups = group_stats(runs);
  std::ostringstream agg, summary;
  write_aggregate(agg, runs);
  write_group_stats(summary, groups);
  if (!a.out_dir.empty()) {
    const fs::path dir = detail::prepare_out_dir(a.out_dir);
    detail::write_text(dir / "aggregate.csv", agg.str());
    detail::write_text(dir / "summary.csv", summary.str());
  }
  out << agg.str() << "\n";
  for (const auto& g : groups) {
    out << g.algo << " on " << g.env << ": normalized return " << std::fixed << std::setprecision(3) << g.mean
        << " ± " << g.stddev << " over " << g.runs << " run(s), median " << g.median << ", " << g.reached << "/"
        << g.runs << " reached 75%" << std::defaultfloat << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

/// Entry point; `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"laifo: latent adversarial imitation from observations"};
  app.require_subcommand(1);

  TrainExpertArgs te;
  auto* c_te = app.add_subcommand("train-expert", "train a full-state expert with the environment reward");
  c_te->add_option("--env", te.env, "environment id (its full-state variant is used)")->required();
  c_te->add_option("--out-dir", te.out_dir, "run directory")->required();
  te.cfg.attach(c_te);

  RecordArgs rec;
  auto* c_rec = app.add_subcommand("record", "roll out an expert and save an ExpertDataset");
  c_rec->add_option("--expert", rec.expert, "expert checkpoint from train-expert")->required();
  c_rec->add_option("--env", rec.env, "environment whose observations are stored")->required();
  c_rec->add_option("--episodes", rec.episodes, "number of episodes");
  c_rec->add_flag("--with-actions", rec.with_actions, "store expert actions");
  c_rec->add_option("--seed", rec.seed, "evaluation seed for the start states");
  c_rec->add_option("--out-dir", rec.out_dir, "output directory")->required();
  c_rec->add_option("--name", rec.name, "dataset file name");

  ImitateArgs im;
  std::optional<double> im_score;
  auto* c_im = app.add_subcommand("imitate", "train an imitation agent");
  c_im->add_option("--algo", im.algo, "laifo, lail, dacfo, dac or bc")->required();
  c_im->add_option("--env", im.env, "environment id")->required();
  c_im->add_option("--expert-data", im.expert_data, "ExpertDataset file")->required();
  c_im->add_option("--out-dir", im.out_dir, "run directory")->required();
  c_im->add_option("--expert-score", im_score, "expert return used for normalization");
  c_im->add_option("--expert-score-file", im.expert_score_file, "expert_score.json to normalize by");
  im.cfg.attach(c_im);

  ImitateArgs rv;
  std::optional<double> rv_score;
  auto* c_rv = app.add_subcommand("rl-plus-videos", "environment reward plus the imitation reward from expert videos");
  c_rv->add_option("--env", rv.env, "environment id")->required();
  c_rv->add_option("--expert-data", rv.expert_data, "ExpertDataset file")->required();
  c_rv->add_option("--out-dir", rv.out_dir, "run directory")->required();
  c_rv->add_flag("--no-videos", rv.no_videos, "baseline with the imitation reward switched off");
  c_rv->add_option("--expert-score", rv_score, "expert return used for normalization");
  c_rv->add_option("--expert-score-file", rv.expert_score_file, "expert_score.json to normalize by");
  rv.cfg.attach(c_rv);

  TheoryArgs th;
  auto* c_th = app.add_subcommand("verify-theory", "check the suboptimality bounds on random tabular models");
  c_th->add_option("--claim", th.claim, "theorem1, theorem2, corollary1, theorem3, lemma1, lemma2 or lemma4");
  c_th->add_option("--instances", th.instances, "number of random instances");
  c_th->add_option("--seed", th.seed, "generator seed");
  c_th->add_option("--structure", th.structure, "random, mdp or injective");
  c_th->add_option("--divergence", th.divergence, "tv, js or kl (lemma1, theorem3)");
  c_th->add_option("--k", th.k, "latent window length");
  c_th->add_option("--gamma", th.gamma, "discount factor");
  c_th->add_option("--max-states", th.max_states, "largest |S|");
  c_th->add_option("--max-actions", th.max_actions, "largest |A|");
  c_th->add_option("--max-observations", th.max_observations, "largest |X|");
  c_th->add_option("--tolerance", th.tolerance, "allowed negative slack");
  c_th->add_option("--out-dir", th.out_dir, "write the JSON report here instead of stdout");

  ReportArgs rp;
  auto* c_rp = app.add_subcommand("report", "aggregate run directories");
  c_rp->add_option("run_dirs", rp.run_dirs, "run directories")->required();
  c_rp->add_option("--out-dir", rp.out_dir, "write aggregate.csv and summary.csv here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (c_te->parsed()) return cmd_train_expert(te, out);
    if (c_rec->parsed()) return cmd_record(rec, out);
    if (c_im->parsed()) {
      im.expert_score = im_score;
      const imitate::Algo algo = imitate::parse_algo(im.algo);
      if (algo == imitate::Algo::rl || algo == imitate::Algo::rl_plus_videos) {
        throw UsageError("imitate: use train-expert or rl-plus-videos for '" + im.algo + "'");
      }
      return cmd_imitate(algo, im, out);
    }
    if (c_rv->parsed()) {
      rv.expert_score = rv_score;
      return cmd_imitate(imitate::Algo::rl_plus_videos, rv, out);
    }
    if (c_th->parsed()) return cmd_verify_theory(th, out, err);
    if (c_rp->parsed()) return cmd_report(rp, out);
  } catch (const VerificationFailure& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    // CapabilityError, ConfigError, UsageError and argument validation.
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }

}  // namespace laifo::cli
