// Acceptance checks for the library: exact-oracle criteria on the tabular
// theory module, gradient checks on every loss, infrastructure invariants
// and desk-scale point-mass imitation experiments. Prints one PASS/FAIL
// line per criterion and exits nonzero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "laifo/expertgen/expert.hpp"
#include "laifo/grad/check.hpp"
#include "laifo/imitate/report.hpp"
#include "laifo/imitate/train.hpp"
#include "laifo/replay/buffer.hpp"
#include "laifo/replay/dataset.hpp"
#include "laifo/theory/bounds.hpp"
#include "laifo/theory/montecarlo.hpp"

namespace fs = std::filesystem;
using namespace laifo;
using imitate::Algo;
using imitate::Config;
using M = grad::Matrix<double>;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    notes.push_back(std::string(ok ? "  ok    " : "  FAIL  ") + what);
    pass = pass && ok;
  }
  void info(const std::string& what) { notes.push_back("        " + what); }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o << std::setprecision(prec) << v;
  return o.str();
}

std::string sci(double v) {
  std::ostringstream o;
  o << std::scientific << std::setprecision(2) << v;
  return o.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

M random_matrix(grad::Index r, grad::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  M m(r, c);
  for (grad::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// ---------------------------------------------------------------- criterion 1

Outcome gradient_correctness() {
  Outcome out;
  const auto t0 = Clock::now();
  Config cfg;
  cfg.depth = 3;
  cfg.z_dim = 6;
  cfg.hidden = 16;
  imitate::ObservationLayout layout;
  layout.frame_size = 2;
  layout.act_dim = 2;
  std::map<std::string, double> worst = {{"discriminator", 0}, {"critic", 0}, {"actor", 0}, {"bc", 0}};
  std::mt19937_64 r(1);
  for (int trial = 0; trial < 20; ++trial) {
    nets::Rng init(100 + trial);
    auto b = imitate::make_bundle<double>(Algo::laifo, layout, cfg, init);
    for (auto* p : b.actor.parameters()) p->value() = random_matrix(p->rows(), p->cols(), r, 0.5);
    for (auto* p : b.critics.parameters()) p->value() = random_matrix(p->rows(), p->cols(), r, 0.5);
    for (auto* p : b.disc->parameters()) p->value() = random_matrix(p->rows(), p->cols(), r, 0.5);
    const int n = 4 + trial % 5;
    const M obs = random_matrix(n, 2 * cfg.depth, r, 0.5);
    const M actions = random_matrix(n, 2, r, 0.3).cwiseMax(-1.0).cwiseMin(1.0);
    const M y = random_matrix(n, 1, r);
    const M ze = random_matrix(n, 2 * cfg.z_dim, r), za = random_matrix(n, 2 * cfg.z_dim, r);
    const M z = random_matrix(n, cfg.z_dim, r);
    const std::uint64_t s = 1000 + trial;

    auto fd = [](const std::vector<grad::Parameter<double>*>& p, const std::function<grad::Var<double>(grad::Tape<double>&)>& f) {
      return grad::finite_diff_check<double>(f, p, 1e-6);
    };
    worst["discriminator"] = std::max(worst["discriminator"], fd(b.disc->parameters(), [&](grad::Tape<double>& t) {
      nets::Rng local(s);
      return imitate::discriminator_loss(t, *b.disc, ze, za, cfg.lambda, local).total;
    }));
    worst["critic"] = std::max(worst["critic"], fd(b.critic_parameters(), [&](grad::Tape<double>& t) {
      return imitate::critic_loss(t, b.critics, b.encoder.forward(t, t.constant(obs)), actions, y);
    }));
    worst["actor"] = std::max(worst["actor"], fd(b.actor.parameters(), [&](grad::Tape<double>& t) {
      nets::Rng local(s);
      return imitate::actor_loss(t, b.actor, b.critics, z, 0.2, cfg.clip, local);
    }));
    auto params = b.encoder.parameters();
    for (auto* p : b.actor.parameters()) params.push_back(p);
    worst["bc"] = std::max(worst["bc"], fd(params, [&](grad::Tape<double>& t) {
      return imitate::bc_loss(t, b.encoder, b.actor, obs, actions);
    }));
  }
  for (const auto& [name, err] : worst) out.check(err < 1e-4, name + " loss: max relative error " + sci(err) + " < 1e-4 over 20 batches");
  const double secs = seconds_since(t0);
  out.check(secs < 120.0, "runtime " + fmt(secs, 3) + " s < 120 s");
  return out;
}

// ---------------------------------------------------------------- criteria 2-5

Outcome theorem_two(std::uint64_t seed) {
  Outcome out;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(seed);
  int ok2 = 0, ok1 = 0;
  double min2 = 1e300, min1 = 1e300;
  for (int i = 0; i < 100; ++i) {
    const auto inst = theory::random_instance(theory::InstanceSpec{}, rng);
    const auto r2 = theory::verify(theory::Claim::theorem2, inst.model, inst.scheme, inst.pi_theta, inst.pi_expert);
    const auto r1 = theory::verify(theory::Claim::theorem1, inst.model, inst.scheme, inst.pi_theta, inst.pi_expert);
    ok2 += r2.slack >= -1e-8;
    ok1 += r1.slack >= -1e-8;
    min2 = std::min(min2, r2.slack);
    min1 = std::min(min1, r1.slack);
  }
  out.check(ok2 == 100, "theorem2: " + std::to_string(ok2) + "/100 with slack >= -1e-8 (min " + sci(min2) + ")");
  out.check(ok1 == 100, "theorem1: " + std::to_string(ok1) + "/100 with slack >= -1e-8 (min " + sci(min1) + ")");
  const double secs = seconds_since(t0);
  out.check(secs < 300.0, "runtime " + fmt(secs, 3) + " s < 300 s");
  return out;
}

Outcome corollary_one(std::uint64_t seed) {
  Outcome out;
  std::mt19937_64 rng(seed);
  theory::InstanceSpec spec;
  spec.structure = envs::Structure::injective;
  double worst = 0.0;
  int pairs = 0;
  for (int i = 0; i < 50; ++i) {
    const auto inst = theory::random_instance(spec, rng);
    // Several policy pairs per instance, each checked on its own.
    for (int p = 0; p < 5; ++p) {
      const auto pt = p == 0 ? inst.pi_theta : theory::random_policy(inst.scheme, inst.model.A, rng);
      const auto pe = p == 0 ? inst.pi_expert : theory::random_policy(inst.scheme, inst.model.A, rng);
      const auto r = theory::verify(theory::Claim::corollary1, inst.model, inst.scheme, pt, pe);
      worst = std::max(worst, r.c_value);
      ++pairs;
    }
  }
  out.check(worst <= 1e-8, "max C over " + std::to_string(pairs) + " policy pairs on 50 injective instances = " +
                               sci(worst) + " <= 1e-8");
  return out;
}

Outcome lemma_suite(std::uint64_t seed) {
  Outcome out;
  std::mt19937_64 rng(seed);
  double worst_l1 = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto inst = theory::random_instance(theory::InstanceSpec{}, rng);
    for (auto kind : {theory::FKind::tv, theory::FKind::js, theory::FKind::kl}) {
      const auto r = theory::verify(theory::Claim::lemma1, inst.model, inst.scheme, inst.pi_theta, inst.pi_expert, kind);
      worst_l1 = std::max(worst_l1, std::abs(r.lhs - r.rhs));
    }
  }
  out.check(worst_l1 <= 1e-10, "lemma1: max |lhs - rhs| over 50 instances x {tv, js, kl} = " + sci(worst_l1));

  std::uniform_int_distribution<int> size(2, 16);
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution drop(0.25);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = size(rng);
    std::vector<double> p(n), q(n);
    double sp = 0, sq = 0;
    for (int j = 0; j < n; ++j) {
      p[j] = drop(rng) ? 0.0 : e(rng);
      q[j] = drop(rng) ? 0.0 : e(rng);
      sp += p[j];
      sq += q[j];
    }
    if (sp == 0) p[0] = sp = 1;
    if (sq == 0) q[0] = sq = 1;
    for (int j = 0; j < n; ++j) {
      p[j] /= sp;
      q[j] /= sq;
    }
    const double tv = theory::f_divergence(theory::FKind::tv, p, q);
    const double js = theory::f_divergence(theory::FKind::js, p, q);
    violations += tv > std::sqrt(js);
  }
  out.check(violations == 0, "lemma4: " + std::to_string(violations) + " violations of TV <= sqrt(JS) in 1000 pairs");

  theory::InstanceSpec lifted;
  lifted.k = 2;
  double min_slack = 1e300;
  for (int i = 0; i < 50; ++i) {
    const auto inst = theory::random_instance(lifted, rng);
    for (auto kind : {theory::FKind::tv, theory::FKind::js, theory::FKind::kl}) {
      const auto r =
          theory::verify(theory::Claim::theorem3, inst.model, inst.scheme, inst.pi_theta, inst.pi_expert, kind);
      min_slack = std::min(min_slack, r.slack);
    }
  }
  out.check(min_slack >= -1e-10, "theorem3: min slack over 50 lifted-window instances = " + sci(min_slack));
  return out;
}

Outcome occupancy_oracle(std::uint64_t seed) {
  Outcome out;
  std::mt19937_64 rng(seed);
  theory::InstanceSpec spec;
  spec.structure = envs::Structure::random;
  spec.k = 2;
  spec.max_states = 8;
  spec.max_observations = 4;
  int agree = 0;
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto inst = theory::random_instance(spec, rng);
    const auto& m = inst.model;
    const auto occ = theory::occupancies(m, inst.scheme, inst.pi_theta, m.gamma);
    const double exact = theory::expectation(occ.rho_sa, [&](std::uint64_t k) { return m.R_sa(int(k >> 32), int(k & 0xffffffffu)); });
    const auto mc = theory::mc_occupancy(m, inst.scheme, inst.pi_theta, m.gamma, 1000000, rng,
                                         [&](int s, std::int64_t, int a) { return m.R_sa(s, a); });
    const double z = std::abs(mc.mean - exact) / mc.std_error;
    worst = std::max(worst, z);
    agree += z <= 3.0;
  }
  out.check(agree == 10, std::to_string(agree) + "/10 instances: exact E[R(s,a)] within 3 SE of 10^6-step Monte Carlo (max " +
                             fmt(worst, 3) + " SE)");
  return out;
}

// ---------------------------------------------------------------- criterion 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Metrics text with the wall-clock column removed.
std::string without_wall_clock(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == 7) continue;
      out << cells[i] << (i + 1 < cells.size() ? "," : "");
    }
    out << "\n";
  }
  return out.str();
}

Outcome infrastructure(const fs::path& work) {
  Outcome out;
  {
    // Frames encode (episode, step): a window is valid iff every frame
    // shares the episode id and steps run consecutively, padded at 0.
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> len(1, 12);
    replay::ReplayBuffer<double> buf(2, 1, 512, 3);
    int ep = 0, t = 0, remaining = len(rng);
    buf.start(std::vector<double>{0.0, 0.0});
    long bad = 0, scanned = 0;
    for (int i = 0; i < 100000; ++i) {
      ++t;
      const bool done = --remaining == 0;
      buf.push(std::vector<double>{double(ep), double(t)}, std::vector<double>{double(t)}, 0.0, done);
      if (done) {
        ++ep;
        t = 0;
        remaining = len(rng);
        buf.start(std::vector<double>{double(ep), 0.0});
      }
      if (i % 50 != 0 || buf.size() == 0) continue;
      const auto b = buf.sample(16, 3, rng);
      for (grad::Index r = 0; r < b.size(); ++r) {
        const double e = b.next(r, 4), tn = b.next(r, 5);
        for (int j = 0; j < 3; ++j) {
          bad += b.obs(r, 2 * j) != e || b.next(r, 2 * j) != e;
          bad += b.obs(r, 2 * j + 1) != std::max(0.0, tn - 3 + j);
          bad += b.next(r, 2 * j + 1) != std::max(0.0, tn - 2 + j);
        }
        ++scanned;
      }
    }
    out.check(bad == 0, "replay: " + std::to_string(scanned) + " sampled windows over 10^5 pushes, " +
                            std::to_string(bad) + " cross an episode boundary or skip a frame");
  }
  {
    std::mt19937_64 rng(11);
    std::normal_distribution<float> n(0.0f, 1.0f);
    replay::ExpertDataset ds;
    ds.env = "pointmass-px32";
    ds.obs_shape = {32, 32};
    ds.act_shape = {2};
    ds.has_actions = true;
    ds.has_rewards = true;
    for (int e = 0; e < 3; ++e) {
      replay::ExpertEpisode ep;
      for (int i = 0; i < 9 * 1024; ++i) ep.observations.push_back(n(rng));
      for (int i = 0; i < 16; ++i) ep.actions.push_back(n(rng));
      for (int i = 0; i < 8; ++i) ep.rewards.push_back(n(rng));
      ds.episodes.push_back(std::move(ep));
    }
    const fs::path a = work / "roundtrip_a.laifo", b = work / "roundtrip_b.laifo";
    replay::save_dataset(ds, a.string());
    const auto back = replay::load_dataset(a.string());
    replay::save_dataset(back, b.string());
    out.check(back == ds && slurp(a) == slurp(b), "dataset: save/load/save is bit-exact (" + std::to_string(slurp(a).size()) + " bytes)");
  }
  {
    Config cfg;
    cfg.frames = 1500;
    cfg.warmup = 300;
    cfg.hidden = 32;
    cfg.batch = 32;
    cfg.z_dim = 8;
    cfg.eval_interval = 500;
    cfg.eval_episodes = 2;
    cfg.seed = 4;
    auto expert = expertgen::train_expert<double>("pointmass-v", 0, cfg);
    const auto ds = expertgen::record(expert.bundle, expert.state_env, "pointmass-v", 3, false, 0);
    std::vector<std::string> texts;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path p = work / ("determinism_" + std::to_string(rep) + ".csv");
      imitate::MetricsWriter w(p.string());
      imitate::train<double>(Algo::laifo, "pointmass-v", &ds, cfg, [&](const imitate::TrainRow& r) { w.append(r); });
      texts.push_back(slurp(p));
    }
    out.check(without_wall_clock(texts[0]) == without_wall_clock(texts[1]) && !texts[0].empty(),
              "metrics: identical (seed, config) laifo runs write identical CSVs apart from wall_clock_s");
  }
  return out;
}

// ---------------------------------------------------------------- criteria 6-9

struct Learning {
  fs::path work;
  int seeds = 6;
  std::int64_t frames = 0;
  Config learner;
  double expert_score = 0.0;
  replay::ExpertDataset data_v;  // pointmass-v, with actions
  replay::ExpertDataset data_s;  // pointmass-s, with actions
  std::map<std::string, std::vector<imitate::TrainReport>> runs;

  void prepare(std::int64_t expert_frames) {
    Config ec;
    ec.hidden = 128;
    ec.batch = 128;
    ec.precision = imitate::Precision::f32;
    ec.seed = 0;
    const auto t0 = Clock::now();
    auto e = expertgen::train_expert<float>("pointmass-v", expert_frames, ec);
    data_v = expertgen::record(e.bundle, e.state_env, "pointmass-v", 100, true, 123);
    data_s = expertgen::record(e.bundle, e.state_env, "pointmass-s", 100, true, 123);
    replay::save_dataset(data_v, (work / "expert_v.laifo").string());
    replay::save_dataset(data_s, (work / "expert_s.laifo").string());
    expert_score = data_v.mean_return();
    std::cout << "  expert: eval score " << fmt(e.score) << ", recorded mean return " << fmt(expert_score) << " ("
              << fmt(seconds_since(t0), 3) << " s)" << std::endl;
  }

  const std::vector<imitate::TrainReport>& get(const std::string& key, Algo algo, int episodes, double weight = 1.0,
                                               double stop = std::numeric_limits<double>::infinity(),
                                               std::int64_t eval_interval = 0) {
    auto it = runs.find(key);
    if (it != runs.end()) return it->second;
    auto& reps = runs[key];
    replay::ExpertDataset ds = imitate::traits(algo).full_state ? data_s : data_v;
    ds.episodes.resize(episodes);
    for (int s = 0; s < seeds; ++s) {
      Config cfg = learner;
      cfg.seed = s;
      cfg.imitation_weight = weight;
      cfg.stop_return = stop;
      if (eval_interval > 0) cfg.eval_interval = eval_interval;
      const fs::path dir = work / key / ("seed" + std::to_string(s));
      fs::create_directories(dir);
      imitate::MetricsWriter w((dir / "metrics.csv").string());
      auto rep = imitate::train<float>(algo, "pointmass-v", &ds, cfg, [&](const imitate::TrainRow& r) { w.append(r); });
      std::cout << "  " << key << " seed " << s << ": final " << fmt(rep.final_return()) << ", frames to 75% "
                << rep.frames_to(0.75 * expert_score) << ", " << fmt(rep.rows.back().wall_clock_s, 3) << " s"
                << std::endl;
      reps.push_back(std::move(rep));
    }
    return reps;
  }

  std::vector<double> finals(const std::vector<imitate::TrainReport>& reps) const {
    std::vector<double> v;
    for (const auto& r : reps) v.push_back(r.final_return() / expert_score);
    return v;
  }
};

// Frames to the threshold with never-reaching runs ranked last.
double frames_or_inf(const imitate::TrainReport& r, double threshold) {
  const auto f = r.frames_to(threshold);
  return f < 0 ? std::numeric_limits<double>::infinity() : double(f);
}

Outcome desk_imitation(Learning& L) {
  Outcome out;
  for (auto [key, algo] : {std::pair{"laifo_100", Algo::laifo}, std::pair{"lail_100", Algo::lail}}) {
    const auto& reps = L.get(key, algo, 100);
    std::vector<double> f;
    double slowest = 0;
    for (const auto& r : reps) {
      f.push_back(frames_or_inf(r, 0.75 * L.expert_score));
      slowest = std::max(slowest, r.rows.back().wall_clock_s);
    }
    const double med = median(f);
    out.check(med <= 200000, std::string(key) + ": median frames to 75% of expert = " + fmt(med, 7) +
                                 " <= 200000 over " + std::to_string(L.seeds) + " seeds");
    out.check(slowest <= 3600, std::string(key) + ": slowest seed " + fmt(slowest, 4) + " s <= 3600 s");
  }
  return out;
}

Outcome episode_ablation(Learning& L) {
  Outcome out;
  const double m100 = median(L.finals(L.get("laifo_100", Algo::laifo, 100)));
  const double m1 = median(L.finals(L.get("laifo_1", Algo::laifo, 1)));
  out.check(std::abs(m1 - m100) <= 0.15 * m100, "laifo median final normalized return: 1 episode " + fmt(m1) +
                                                    " vs 100 episodes " + fmt(m100) + " (within 15%)");
  return out;
}

Outcome observability_ordering(Learning& L) {
  Outcome out;
  const double dac = median(L.finals(L.get("dac_100", Algo::dac, 100)));
  const double dacfo = median(L.finals(L.get("dacfo_100", Algo::dacfo, 100)));
  const double lail = median(L.finals(L.get("lail_100", Algo::lail, 100)));
  const double laifo = median(L.finals(L.get("laifo_100", Algo::laifo, 100)));
  out.check(dac >= dacfo - 0.1, "dac " + fmt(dac) + " >= dacfo " + fmt(dacfo) + " - 0.1");
  out.check(std::abs(lail - dac) <= 0.15, "|lail " + fmt(lail) + " - dac " + fmt(dac) + "| <= 0.15");
  out.check(std::abs(laifo - dacfo) <= 0.15, "|laifo " + fmt(laifo) + " - dacfo " + fmt(dacfo) + "| <= 0.15");
  return out;
}

Outcome rl_plus_videos(Learning& L) {
  Outcome out;
  const double threshold = 0.75 * L.expert_score;
  const auto& with = L.get("rlv_videos", Algo::rl_plus_videos, 100, 1.0, threshold, 2000);
  const auto& without = L.get("rlv_no_videos", Algo::rl_plus_videos, 100, 0.0, threshold, 2000);
  int wins = 0;
  std::ostringstream pairs;
  for (int s = 0; s < L.seeds; ++s) {
    const double a = frames_or_inf(with[s], threshold), b = frames_or_inf(without[s], threshold);
    wins += a < b;
    pairs << (s ? ", " : "") << fmt(a, 7) << " vs " << fmt(b, 7);
  }
  out.info("frames to return " + fmt(threshold) + " (videos vs none): " + pairs.str());
  out.check(wins >= 4, "videos strictly faster on " + std::to_string(wins) + "/" + std::to_string(L.seeds) +
                           " paired seeds (need >= 4)");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> criteria;
  std::string work_dir = (fs::temp_directory_path() / "laifo_acceptance").string();
  std::int64_t frames = 60000;
  std::int64_t expert_frames = 60000;
  int seeds = 6;
  app.add_option("--criteria", criteria, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--work-dir", work_dir, "scratch directory for datasets and run metrics");
  app.add_option("--frames", frames, "frame budget per learning run");
  app.add_option("--expert-frames", expert_frames, "frame budget for the expert");
  app.add_option("--seeds", seeds, "seeds per learning configuration");
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty()) criteria = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  fs::create_directories(work_dir);

  Learning L;
  L.work = work_dir;
  L.seeds = seeds;
  L.frames = frames;
  L.learner.frames = frames;
  L.learner.hidden = 128;
  L.learner.batch = 128;
  L.learner.precision = imitate::Precision::f32;
  L.learner.eval_interval = 5000;
  bool prepared = false;

  const std::map<int, std::string> names = {{1, "gradient correctness"},     {2, "theorem 1 and 2 verification"},
                                            {3, "corollary 1"},              {4, "lemma suite"},
                                            {5, "occupancy oracle agreement"}, {6, "desk-scale imitation"},
                                            {7, "expert-episode ablation"},  {8, "observability ordering"},
                                            {9, "rl plus expert videos"},    {10, "infrastructure invariants"}};
  bool all = true;
  for (int c : criteria) {
    if (!names.count(c)) {
      std::cerr << "unknown criterion " << c << "\n";
      return 2;
    }
    std::cout << "criterion " << c << " (" << names.at(c) << ")" << std::endl;
    if (c >= 6 && c <= 9 && !prepared) {
      L.prepare(expert_frames);
      prepared = true;
    }
    Outcome o;
    try {
      switch (c) {
        case 1: o = gradient_correctness(); break;
        case 2: o = theorem_two(2); break;
        case 3: o = corollary_one(3); break;
        case 4: o = lemma_suite(4); break;
        case 5: o = occupancy_oracle(5); break;
        case 6: o = desk_imitation(L); break;
        case 7: o = episode_ablation(L); break;
        case 8: o = observability_ordering(L); break;
        case 9: o = rl_plus_videos(L); break;
        case 10: o = infrastructure(work_dir); break;
      }
    } catch (const std::exception& e) {
      o.check(false, std::string("threw: ") + e.what());
    }
    for (const auto& n : o.notes) std::cout << n << "\n";
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c << ": " << names.at(c) << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
