// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynasc/lander.hpp"

using namespace dynasc;

namespace {

const SurfaceMap& test_surface() {
  static const SurfaceMap s = generate_surface(99, 40, 6000.0, 2000.0);
  return s;
}

const ReferenceBank& test_bank() {
  static const ReferenceBank b = build_reference_bank(test_surface(), 200.0);
  return b;
}

LanderState state_at(double x, double y, double z, double vz = 0.0, int fuel = 150) {
  LanderState s;
  s.position = {x, y, z};
  s.velocity = {0.0, 0.0, vz};
  s.fuel_steps = fuel;
  return s;
}

// Ships every pixel as one unquantized analog token; the deterministic awgn
// envelope makes the per-value noise variance exactly 1 / (16 ebn0).
CameraImage with_symbol_noise(const CameraImage& img, double ebn0, Rng& rng) {
  QuantizedPayload frame;
  frame.token_len = static_cast<int>(img.pixels.size());
  frame.keep_mask = {1};
  frame.raw = img.pixels;
  frame.quantized = false;
  ChannelConfig ch;
  ch.mode = ChannelMode::awgn;
  ch.ebn0 = ebn0;
  const FadingDraw draw = draw_fading(ch, rng);
  const QuantizedPayload noisy = transmit_symbols(frame, ch, draw, rng);
  CameraImage out = img;
  out.pixels = noisy.raw;
  for (double& p : out.pixels) p = std::clamp(p, 0.0, 1.0);
  return out;
}

}  // namespace

TEST_CASE("dynamics_step kinematics and fuel accounting") {
  LanderConfig cfg;

  SUBCASE("coast from rest over one second") {
    const LanderState next = dynamics_step(state_at(100.0, 100.0, 2000.0), LanderAction::kCoast,
                                           1.0, cfg);
    CHECK(next.velocity.z == -1.62);
    CHECK(next.position.z == 2000.0 - 1.62);
    CHECK(next.velocity.x == 0.0);
    CHECK(next.fuel_steps == 150);
  }

  SUBCASE("thrust matched to gravity leaves vertical speed unchanged") {
    LanderConfig hover = cfg;
    hover.thrust_accel = 1.62;
    const LanderState s = state_at(100.0, 100.0, 500.0, -3.0);
    const LanderState next = dynamics_step(s, LanderAction::kThrustZPos, 1.0, hover);
    CHECK(next.velocity.z == doctest::Approx(-3.0).epsilon(1e-15));
    CHECK(next.fuel_steps == 149);
  }

  SUBCASE("coasting speed is linear in time") {
    LanderState s = state_at(3000.0, 1000.0, 2000.0);
    for (int t = 1; t <= 40; ++t) {
      s = dynamics_step(s, LanderAction::kCoast, 1.0, cfg);
      CHECK(s.velocity.z == doctest::Approx(-1.62 * t).epsilon(1e-12));
    }
  }

  SUBCASE("free fall from 2000 m grounds on step 50 at 81 m/s") {
    LanderState s = state_at(3000.0, 1000.0, 2000.0);
    int steps = 0;
    while (s.position.z > 0.0) {
      s = dynamics_step(s, LanderAction::kCoast, 1.0, cfg);
      ++steps;
    }
    CHECK(steps == 50);
    CHECK(s.velocity.z == doctest::Approx(-81.0).epsilon(1e-12));
  }

  SUBCASE("lateral thrust and fuel depletion") {
    LanderState s = state_at(100.0, 100.0, 1000.0, 0.0, 1);
    s = dynamics_step(s, LanderAction::kThrustXPos, 1.0, cfg);
    CHECK(s.velocity.x == 3.24);
    CHECK(s.fuel_steps == 0);
    // the tank is dry: a thrust command behaves as coast and spends nothing
    const LanderState next = dynamics_step(s, LanderAction::kThrustXNeg, 1.0, cfg);
    CHECK(next.velocity.x == 3.24);
    CHECK(next.fuel_steps == 0);
    // coasting never touches the tank
    LanderState c = state_at(100.0, 100.0, 1000.0, 0.0, 7);
    c = dynamics_step(c, LanderAction::kCoast, 1.0, cfg);
    CHECK(c.fuel_steps == 7);
  }

  SUBCASE("config validation") {
    LanderConfig bad = cfg;
    bad.dt = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.max_steps = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
}

TEST_CASE("observe matches the reference bank") {
  const ReferenceBank& bank = test_bank();

  SUBCASE("noiseless view of a cell detects that cell at the PSNR cap") {
    const Cell probe{3, 4};
    const CameraImage& view = bank.views[probe.row * bank.cells_x + probe.col];
    const Observation z = observe(view, bank);
    CHECK(z.detected_cell == probe);
    CHECK(z.confidence_db == kPsnrCapDb);
  }

  SUBCASE("every reference view self-matches") {
    for (int i = 0; i < static_cast<int>(bank.views.size()); i += 17) {
      const Observation z = observe(bank.views[i], bank);
      CHECK(z.detected_cell.row * bank.cells_x + z.detected_cell.col == i);
    }
  }

  SUBCASE("exact ties resolve to the lowest cell index") {
    ReferenceBank tiny;
    tiny.cells_x = 3;
    tiny.cells_y = 1;
    tiny.footprint_m = 200.0;
    CameraImage a;
    a.width = 8;
    a.height = 8;
    a.pixels.assign(64, 0.25);
    CameraImage b = a;
    b.pixels[10] = 0.75;
    tiny.views = {a, b, a};  // views 0 and 2 identical
    const Observation z = observe(a, tiny);
    CHECK(z.detected_cell == Cell{0, 0});
    CHECK(z.confidence_db == kPsnrCapDb);
  }
}

TEST_CASE("detection accuracy is nonincreasing in symbol noise") {
  const SurfaceMap& surface = test_surface();
  const ReferenceBank& bank = test_bank();
  constexpr int kTrials = 500;
  const std::array<double, 3> ebn0 = {5.0, 0.05, 0.01};  // rising noise variance

  Rng cell_rng(2024);
  std::vector<int> truth(kTrials);
  for (int& t : truth) t = static_cast<int>(cell_rng.uniform_int(0, surface.cell_count() - 1));

  std::array<int, 3> correct = {0, 0, 0};
  for (std::size_t level = 0; level < ebn0.size(); ++level) {
    Rng rng(Rng::derive(9000, level));
    for (int t = 0; t < kTrials; ++t) {
      const CameraImage& sent = bank.views[truth[t]];
      const Observation z = observe(with_symbol_noise(sent, ebn0[level], rng), bank);
      const int detected = z.detected_cell.row * bank.cells_x + z.detected_cell.col;
      if (detected == truth[t]) ++correct[level];
    }
  }
  CHECK(correct[0] >= correct[1]);
  CHECK(correct[1] >= correct[2]);
  CHECK(correct[0] > 450);  // near-clean channel stays reliable
  CHECK(correct[2] < correct[0]);
}

TEST_CASE("belief arithmetic") {
  SUBCASE("entropy and argmax") {
    const Belief u = uniform_belief(300);
    CHECK(u.entropy() == doctest::Approx(std::log(300.0)).epsilon(1e-12));
    Belief point;
    point.probs = {0.0, 1.0, 0.0};
    CHECK(point.entropy() == 0.0);
    Belief tie;
    tie.probs = {0.2, 0.4, 0.4};
    CHECK(tie.argmax() == 1);
  }

  SUBCASE("identity confusion collapses to the detected cell") {
    const ConfusionMatrix id = ConfusionMatrix::identity(3, 2);
    CHECK(id.cells() == 6);
    Observation z;
    z.detected_cell = {2, 1};
    const Belief b = belief_update(uniform_belief(6), LanderAction::kCoast, z, id);
    CHECK(b.probs[5] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.entropy() == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("uniform confusion is uninformative") {
    ConfusionMatrix flat;
    flat.cells_x = 2;
    flat.cells_y = 2;
    flat.rows.assign(16, 0.25);
    Belief prior;
    prior.probs = {0.1, 0.2, 0.3, 0.4};
    Observation z;
    z.detected_cell = {1, 0};
    const Belief post = belief_update(prior, LanderAction::kCoast, z, flat);
    for (int c = 0; c < 4; ++c) CHECK(post.probs[c] == doctest::Approx(prior.probs[c]).epsilon(1e-12));
  }

  SUBCASE("two observations against a symmetric 0.8 confusion follow Bayes") {
    const int n = 6;
    ConfusionMatrix conf;
    conf.cells_x = 3;
    conf.cells_y = 2;
    conf.rows.assign(static_cast<std::size_t>(n) * n, 0.2 / (n - 1));
    for (int d = 0; d < n; ++d) conf.rows[static_cast<std::size_t>(d) * n + d] = 0.8;
    Observation z;
    z.detected_cell = {0, 1};  // index 3
    Belief b = uniform_belief(n);
    b = belief_update(b, LanderAction::kCoast, z, conf);
    b = belief_update(b, LanderAction::kCoast, z, conf);
    const double off = 0.2 / (n - 1);
    const double hand = 0.8 * 0.8 / (0.8 * 0.8 + (n - 1) * off * off);
    CHECK(b.probs[3] == doctest::Approx(hand).epsilon(1e-12));
    double total = 0.0;
    for (const double p : b.probs) total += p;
    CHECK(std::abs(total - 1.0) < 1e-9);
  }

  SUBCASE("degenerate all-zero product resets to uniform") {
    const ConfusionMatrix id = ConfusionMatrix::identity(2, 1);
    Belief prior;
    prior.probs = {1.0, 0.0};  // certain of cell 0
    Observation z;
    z.detected_cell = {1, 0};  // but cell 1 is detected
    bool degenerate = false;
    const Belief post = belief_update(prior, LanderAction::kCoast, z, id, &degenerate);
    CHECK(degenerate);
    CHECK(post.probs[0] == 0.5);
    CHECK(post.probs[1] == 0.5);
  }

  SUBCASE("updates stay normalized and nonnegative") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 12;
      ConfusionMatrix conf;
      conf.cells_x = 4;
      conf.cells_y = 3;
      conf.rows.resize(static_cast<std::size_t>(n) * n);
      for (int d = 0; d < n; ++d) {
        double total = 0.0;
        for (int c = 0; c < n; ++c) {
          const double v = rng.next_double();
          conf.rows[static_cast<std::size_t>(d) * n + c] = v;
          total += v;
        }
        for (int c = 0; c < n; ++c) conf.rows[static_cast<std::size_t>(d) * n + c] /= total;
      }
      Belief b;
      b.probs.resize(n);
      double total = 0.0;
      for (double& p : b.probs) total += (p = rng.next_double());
      for (double& p : b.probs) p /= total;
      const int d = static_cast<int>(rng.uniform_int(0, n - 1));
      Observation z;
      z.detected_cell = Cell{d % 4, d / 4};
      b = belief_update(b, LanderAction::kCoast, z, conf);
      double sum = 0.0;
      for (const double p : b.probs) {
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("reward shaping and terminal classification") {
  const SurfaceMap& surface = test_surface();
  const Cell target{10, 5};
  const auto [tx, ty] = surface.cell_center(target);
  RewardConfig rc;

  SUBCASE("stationary coast earns nothing") {
    const LanderState s = state_at(tx - 100.0, ty, 50.0);
    CHECK(reward(s, s, LanderAction::kCoast, surface, target, rc) == 0.0);
  }

  SUBCASE("ten meters of progress at w_d = 0.1 pays one unit") {
    const LanderState prev = state_at(tx + 30.0, ty, 40.0);  // distance 50
    const LanderState next = state_at(tx, ty, 40.0);         // distance 40
    CHECK(reward(prev, next, LanderAction::kCoast, surface, target, rc) == 1.0);
  }

  SUBCASE("pure descent pays the altitude progress") {
    const LanderState prev = state_at(tx, ty, 90.0, -3.0);
    const LanderState next = state_at(tx, ty, 60.0, -3.0);
    CHECK(reward(prev, next, LanderAction::kCoast, surface, target, rc) ==
          doctest::Approx(3.0).epsilon(1e-12));
  }

  SUBCASE("thrust costs w_u") {
    const LanderState s = state_at(tx, ty, 40.0);
    CHECK(reward(s, s, LanderAction::kThrustYNeg, surface, target, rc) == -0.05);
  }

  SUBCASE("crash terminal adds the penalty to the shaping term") {
    const LanderState prev = state_at(tx, ty, 30.0, -5.0);
    LanderState next = state_at(tx + 5.0, ty, -2.0, -5.0);
    const double shaping = 0.1 * (30.0 - std::sqrt(25.0 + 4.0));
    const double r = reward(prev, next, LanderAction::kCoast, surface, target, rc);
    CHECK(r == doctest::Approx(shaping - 100.0).epsilon(1e-12));
  }

  SUBCASE("soft on-target terminal adds the perfect bonus") {
    const LanderState prev = state_at(tx, ty, 10.0, -1.0);
    const LanderState next = state_at(tx, ty, 0.0, -1.0);
    const double r = reward(prev, next, LanderAction::kCoast, surface, target, rc);
    CHECK(r == doctest::Approx(0.1 * 10.0 + 100.0).epsilon(1e-12));
  }

  SUBCASE("soft off-target terminal adds the intact bonus") {
    const LanderState prev = state_at(tx + 250.0, ty, 10.0, -1.0);
    const LanderState next = state_at(tx + 250.0, ty, 0.0, -1.0);
    const double r = reward(prev, next, LanderAction::kCoast, surface, target, rc);
    CHECK(r == doctest::Approx(0.1 * (std::hypot(250.0, 10.0) - 250.0) + 20.0).epsilon(1e-12));
  }
}

TEST_CASE("classify_outcome") {
  const SurfaceMap& surface = test_surface();
  const Cell target{7, 3};
  const auto [tx, ty] = surface.cell_center(target);
  RewardConfig rc;

  CHECK(classify_outcome(state_at(tx + 10.0, ty - 20.0, 0.0, -0.5), surface, target, rc) ==
        LandingOutcome::kPerfect);
  CHECK(classify_outcome(state_at(tx + 250.0, ty, 0.0, -0.5), surface, target, rc) ==
        LandingOutcome::kImperfect);
  CHECK(classify_outcome(state_at(tx, ty, -1.0, -5.0), surface, target, rc) ==
        LandingOutcome::kFailure);
  // exactly at the crash threshold stays intact
  CHECK(classify_outcome(state_at(tx, ty, 0.0, -2.0), surface, target, rc) ==
        LandingOutcome::kPerfect);
  CHECK_THROWS_AS(classify_outcome(state_at(tx, ty, 10.0, -0.5), surface, target, rc),
                  std::logic_error);

  SUBCASE("positive radius overrides cell containment") {
    RewardConfig disc = rc;
    disc.perfect_radius_m = 50.0;
    CHECK(classify_outcome(state_at(tx + 30.0, ty, 0.0, -0.5), surface, target, disc) ==
          LandingOutcome::kPerfect);
    disc.perfect_radius_m = 20.0;
    CHECK(classify_outcome(state_at(tx + 30.0, ty, 0.0, -0.5), surface, target, disc) ==
          LandingOutcome::kImperfect);
  }

  SUBCASE("reward config validation") {
    RewardConfig bad = rc;
    bad.v_crash = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = rc;
    bad.perfect_radius_m = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
}

TEST_CASE("choose_action exploration and greedy invariances") {
  const SurfaceMap& surface = test_surface();
  const Belief b = uniform_belief(surface.cell_count());
  const LanderState x = state_at(3000.0, 1000.0, 500.0, -6.0);
  PolicyTable policy;
  const int key = policy_state_key(b, x, surface);

  SUBCASE("epsilon = 1 draws uniformly over the seven actions") {
    constexpr int kDraws = 100000;
    Rng rng(123);
    std::array<int, kActionCount> counts = {};
    for (int i = 0; i < kDraws; ++i) {
      ++counts[static_cast<int>(choose_action(b, x, surface, policy, 1.0, rng))];
    }
    const double p = 1.0 / kActionCount;
    const double tol = 3.0 * std::sqrt(p * (1.0 - p) / kDraws);
    for (const int c : counts) {
      CHECK(std::abs(static_cast<double>(c) / kDraws - p) < tol);
    }
  }

  SUBCASE("epsilon = 0 always picks a strictly dominant entry") {
    policy.row(key)[5] = 2.0;
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
      CHECK(choose_action(b, x, surface, policy, 0.0, rng) == LanderAction::kThrustZPos);
    }
  }

  SUBCASE("greedy choice is invariant to positive scaling and ties break low") {
    double* row = policy.row(key);
    const double vals[kActionCount] = {0.3, -1.2, 2.5, 2.5, 0.1, -0.4, 1.0};
    std::copy(vals, vals + kActionCount, row);
    Rng rng(7);
    const LanderAction before = choose_action(b, x, surface, policy, 0.0, rng);
    CHECK(static_cast<int>(before) == 2);  // tie between 2 and 3 resolves low
    for (int a = 0; a < kActionCount; ++a) row[a] *= 7.25;
    CHECK(choose_action(b, x, surface, policy, 0.0, rng) == before);
  }
}

TEST_CASE("q_update fixed points and chain convergence") {
  SUBCASE("zero learning rate is inert") {
    PolicyTable policy;
    policy.lr = 0.0;
    policy.row(4)[2] = 1.5;
    q_update(policy, 4, LanderAction::kThrustXNeg, 10.0, 9);
    CHECK(policy.row(4)[2] == 1.5);
  }

  SUBCASE("discount zero converges to the mean reward") {
    PolicyTable policy;
    policy.discount = 0.0;
    policy.lr = 0.1;
    for (int i = 0; i < 500; ++i) q_update(policy, 5, LanderAction::kCoast, 3.5, 5);
    CHECK(policy.row(5)[0] == doctest::Approx(3.5).epsilon(1e-9));
  }

  SUBCASE("three-state deterministic chain matches value iteration") {
    // s0 --a0/r=2--> s1 --a0/r=-1--> s2 --a0/r=10--> terminal, with
    // detour actions a1 looping back as below.
    struct Arc {
      int state;
      int action;
      double r;
      int next;  // -1 terminal
    };
    const std::vector<Arc> arcs = {
        {0, 0, 2.0, 1}, {0, 1, 0.5, 0}, {1, 0, -1.0, 2},
        {1, 1, 0.0, 0}, {2, 0, 10.0, -1}, {2, 1, 1.0, 1},
    };
    const double gamma = 0.9;

    // independent oracle: value iteration on the same arcs
    std::array<double, 3> v = {0.0, 0.0, 0.0};
    for (int it = 0; it < 10000; ++it) {
      std::array<double, 3> nv = {0.0, 0.0, 0.0};
      for (const Arc& a : arcs) {
        const double q = a.r + (a.next < 0 ? 0.0 : gamma * v[a.next]);
        nv[a.state] = std::max(nv[a.state], q);
      }
      double change = 0.0;
      for (int s = 0; s < 3; ++s) change = std::max(change, std::abs(nv[s] - v[s]));
      v = nv;
      if (change < 1e-15) break;
    }

    PolicyTable policy;
    policy.lr = 0.5;
    policy.discount = gamma;
    for (int sweep = 0; sweep < 4000; ++sweep) {
      for (const Arc& a : arcs) {
        q_update(policy, a.state, static_cast<LanderAction>(a.action), a.r, a.next);
      }
    }
    for (const Arc& a : arcs) {
      const double oracle = a.r + (a.next < 0 ? 0.0 : gamma * v[a.next]);
      CHECK(policy.row(a.state)[a.action] == doctest::Approx(oracle).epsilon(1e-6));
    }
  }
}

TEST_CASE("keep-ratio controller") {
  SUBCASE("zero gradient proxy gives exactly one half") {
    CHECK(delta_sigmoid(0.0, 1.0) == 0.5);
    PolicyTable policy;  // zero Q => zero spread => g = 0
    CHECK(delta_from_reward_gradient(policy, 17, 1.0) == 0.5);
  }

  SUBCASE("huge advantage spread clamps at delta_min") {
    PolicyTable policy;
    policy.row(0)[0] = 100.0;
    CHECK(delta_from_reward_gradient(policy, 0, 1.0) == kDeltaMin);
  }

  SUBCASE("sigmoid is strictly decreasing on [-5, 5]") {
    double prev = delta_sigmoid(-5.0, 1.0);
    for (double g = -4.75; g <= 5.0; g += 0.25) {
      const double d = delta_sigmoid(g, 1.0);
      CHECK(d < prev);
      prev = d;
    }
  }

  SUBCASE("nonpositive kappa is rejected") {
    PolicyTable policy;
    CHECK_THROWS_AS(delta_from_reward_gradient(policy, 0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(delta_from_reward_gradient(policy, 0, -2.0), std::invalid_argument);
  }

  SUBCASE("outputs always live in [delta_min, 1]") {
    PolicyTable policy;
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
      const int state = static_cast<int>(rng.uniform_int(0, PolicyTable::state_count() - 1));
      for (int a = 0; a < kActionCount; ++a) policy.row(state)[a] = rng.uniform(-50.0, 50.0);
      const double d = delta_from_reward_gradient(policy, state, 1.0);
      CHECK(d >= kDeltaMin);
      CHECK(d <= 1.0);
    }
  }
}

TEST_CASE("run_episode mechanics") {
  const SurfaceMap& surface = test_surface();
  const ReferenceBank& bank = test_bank();

  SUBCASE("an all-coast policy free-falls to a crash") {
    PolicyTable policy;  // zero Q, greedy tie -> coast
    EpisodeConfig cfg;
    PipelineConfig bypass;
    Rng rng(7);
    const EpisodeLog log = run_episode(surface, bank, policy, cfg, bypass, rng);
    CHECK(log.outcome == LandingOutcome::kFailure);
    CHECK(log.steps.size() == 50);  // discrete free fall from 2000 m
    for (const StepLog& s : log.steps) {
      CHECK(s.action == 0);
      CHECK(s.velocity.z == doctest::Approx(-1.62 * s.step).epsilon(1e-9));
    }
  }

  SUBCASE("identical seeds give bit-identical logs") {
    const CodecParams codec = [] {
      Rng init(404);
      return CodecParams::random_init(CodecDims{}, init);
    }();
    PipelineConfig pipe;
    pipe.kind = PipelineKind::kSemantic;
    pipe.codec = &codec;
    pipe.fixed_delta = 0.7;
    pipe.channel_enabled = true;
    pipe.channel.ebn0 = 4.0;
    EpisodeConfig cfg;

    PolicyTable p1, p2;
    Rng r1(99), r2(99);
    const EpisodeLog a = run_episode(surface, bank, p1, cfg, pipe, r1);
    const EpisodeLog b = run_episode(surface, bank, p2, cfg, pipe, r2);
    CHECK(a.total_reward == b.total_reward);
    CHECK(a.outcome == b.outcome);
    CHECK(a.target == b.target);
    REQUIRE(a.steps.size() == b.steps.size());
    std::ostringstream csv_a, csv_b;
    write_episode_csv(a, csv_a);
    write_episode_csv(b, csv_b);
    CHECK(csv_a.str() == csv_b.str());
    CHECK(csv_a.str().rfind("step,x,y,z,vx,vy,vz,action,reward,delta,detected_col,detected_row,"
                            "belief_entropy\n", 0) == 0);
    // one row per step, 13 comma-separated fields each
    const std::string body = csv_a.str();
    CHECK(static_cast<std::size_t>(std::count(body.begin(), body.end(), '\n')) ==
          a.steps.size() + 1);
  }

  SUBCASE("training episodes terminate and classify") {
    PolicyTable policy;
    EpisodeConfig cfg;
    cfg.train = true;
    cfg.epsilon = 0.5;
    PipelineConfig bypass;
    for (int e = 0; e < 25; ++e) {
      Rng rng(Rng::derive(3, e));
      const EpisodeLog log = run_episode(surface, bank, policy, cfg, bypass, rng);
      CHECK(log.steps.size() <= 300);
      CHECK(std::isfinite(log.total_reward));
      const int kind = static_cast<int>(log.outcome);
      CHECK(kind >= 0);
      CHECK(kind <= 2);
    }
  }

  SUBCASE("semantic episodes log controller ratios inside the clamp") {
    const CodecParams codec = [] {
      Rng init(405);
      return CodecParams::random_init(CodecDims{}, init);
    }();
    PipelineConfig pipe;
    pipe.kind = PipelineKind::kSemantic;
    pipe.codec = &codec;  // controller drives delta: fixed_delta stays 0
    PolicyTable policy;
    Rng fill(6);
    for (double& q : policy.q) q = fill.uniform(-1.0, 1.0);
    EpisodeConfig cfg;
    Rng rng(17);
    const EpisodeLog log = run_episode(surface, bank, policy, cfg, pipe, rng);
    bool saw_controlled = false;
    for (const StepLog& s : log.steps) {
      if (s.step < cfg.lander.free_fall_steps) {
        CHECK(s.delta == 1.0);
        CHECK(s.detected_cell == Cell{-1, -1});
      } else {
        saw_controlled = true;
        CHECK(s.delta >= kDeltaMin);
        CHECK(s.delta <= 1.0);
        CHECK(s.detected_cell.col >= 0);
      }
    }
    CHECK(saw_controlled);
  }
}

TEST_CASE("confusion calibration on a clean link is near-diagonal") {
  const SurfaceMap& surface = test_surface();
  const ReferenceBank& bank = test_bank();
  Rng rng(71);
  const ConfusionMatrix conf = calibrate_confusion(
      surface, bank, 600, rng, [](const CameraImage& sent, Rng&) { return sent; });
  CHECK(conf.cells() == surface.cell_count());

  double diag = 0.0;
  for (int d = 0; d < conf.cells(); ++d) {
    double total = 0.0;
    for (int c = 0; c < conf.cells(); ++c) {
      const double v = conf.row(d)[c];
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
    diag += conf.row(d)[d];
  }
  // clean-link detections concentrate probability on the true cell
  CHECK(diag / conf.cells() > 0.5);
}

TEST_CASE("variance-ratio ordering") {
  CHECK(prop1_rate_check(2.0, 1.0, 1.0));  // 1/3 < 1/2
  CHECK(prop1_rate_check(1.0 + 1e-12, 1.0, 0.5));

  Rng rng(13);
  for (int i = 0; i < 10000; ++i) {
    const double sigma2 = rng.uniform(1e-6, 10.0);
    const double sigma1 = sigma2 + rng.uniform(1e-9, 10.0);
    const double eps = rng.uniform(1e-6, 5.0);
    CHECK(prop1_rate_check(sigma1, sigma2, eps));
  }

  CHECK_THROWS_AS(prop1_rate_check(1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(prop1_rate_check(0.5, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(prop1_rate_check(2.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(prop1_rate_check(2.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("trained policy beats zero and raw transport tracks the oracle") {
  const SurfaceMap& surface = test_surface();
  const ReferenceBank& bank = test_bank();
  EpisodeConfig cfg;
  TrainPolicyConfig tcfg;
  tcfg.seed = 11;
  const PolicyTable trained = train_policy(surface, bank, cfg, tcfg);
  PipelineConfig bypass;

  SUBCASE("learning lifted expected reward far above the all-coast table") {
    RunningStat lifted, flat;
    const PolicyTable zero;
    for (int t = 0; t < 200; ++t) {
      PolicyTable p = trained;
      Rng rng(Rng::derive(555, t));
      lifted.push(run_episode(surface, bank, p, cfg, bypass, rng).total_reward);
      PolicyTable z = zero;
      Rng rng2(Rng::derive(555, t));
      flat.push(run_episode(surface, bank, z, cfg, bypass, rng2).total_reward);
    }
    CHECK(lifted.mean() > flat.mean() + 30.0);
  }

  SUBCASE("noiseless raw transport reproduces the oracle outcome mix") {
    // clean self-matching detections are exact, so identity is the true
    // observation likelihood here
    PipelineConfig raw;
    raw.kind = PipelineKind::kRaw;

    constexpr int kEpisodes = 500;
    std::array<int, 3> oracle = {0, 0, 0};
    std::array<int, 3> transported = {0, 0, 0};
    for (int t = 0; t < kEpisodes; ++t) {
      PolicyTable p1 = trained;
      Rng r1(Rng::derive(777, t));
      ++oracle[static_cast<int>(run_episode(surface, bank, p1, cfg, bypass, r1).outcome)];
      PolicyTable p2 = trained;
      Rng r2(Rng::derive(777, t));
      ++transported[static_cast<int>(run_episode(surface, bank, p2, cfg, raw, r2).outcome)];
    }
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(oracle[k] - transported[k]) <= kEpisodes / 50);  // within 2%
    }
  }
}
