// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dynasc/baseline.hpp"
#include "dynasc/channel.hpp"
#include "dynasc/codec.hpp"
#include "dynasc/numeric.hpp"
#include "dynasc/rng.hpp"
#include "dynasc/surface.hpp"

namespace dynasc {

// Discrete propulsion set: one module per axis direction, or coast.
enum class LanderAction {
  kCoast = 0,
  kThrustXPos,
  kThrustXNeg,
  kThrustYPos,
  kThrustYNeg,
  kThrustZPos,
  kThrustZNeg,
};
inline constexpr int kActionCount = 7;

struct LanderState {
  Vec3 position;
  Vec3 velocity;
  int fuel_steps = 0;  // thrust commands remaining; empty tank coasts
};

// Descent volume and integration constants. Thrust acceleration 3.24 m/s^2
// is twice lunar gravity so the vertical channel can be arrested.
struct LanderConfig {
  double dt = 1.0;
  double gravity = -1.62;
  double thrust_accel = 3.24;
  double start_altitude = 2000.0;
  double start_vz = 0.0;    // predetermined entry rate; free fall adds to it
  int free_fall_steps = 5;  // uncontrolled steps fixing the entry velocity
  int fuel_steps = 150;
  int max_steps = 300;
  double footprint_m = 200.0;

  void validate() const;
};

struct RewardConfig {
  double w_distance = 0.1;    // per meter of progress toward the target
  double w_thrust = 0.05;     // per non-coast command; prices the fuel budget
  double bonus_perfect = 100.0;
  double bonus_intact = 20.0;
  double penalty_crash = -100.0;
  double v_crash = 2.0;
  // 0 selects target-cell containment; positive overrides with a circle of
  // this radius around the cell center.
  double perfect_radius_m = 0.0;

  void validate() const;
};

struct Observation {
  Cell detected_cell;
  double confidence_db = 0.0;  // best-match PSNR
};

struct Belief {
  std::vector<double> probs;

  // Shannon entropy in nats; 0 for a point mass.
  double entropy() const;
  // Highest-probability cell index; ties prefer the lower index.
  int argmax() const;
};

Belief uniform_belief(int cells);

// Row-stochastic: rows[detected * cells + c] estimates p(true cell = c |
// detected). Rows that were never observed during calibration fall back to
// uniform.
struct ConfusionMatrix {
  int cells_x = 0;
  int cells_y = 0;
  std::vector<double> rows;

  static ConfusionMatrix identity(int cells_x, int cells_y);
  int cells() const { return cells_x * cells_y; }
  const double* row(int detected) const {
    return rows.data() + static_cast<std::size_t>(detected) * cells();
  }
  const double* row(const Cell& detected) const {
    return row(detected.row * cells_x + detected.col);
  }
};

// One rendered nadir view per ground cell, taken above the cell center at
// the operational footprint. The observation extractor matches against
// these.
struct ReferenceBank {
  int cells_x = 0;
  int cells_y = 0;
  double footprint_m = 0.0;
  std::vector<CameraImage> views;
};

ReferenceBank build_reference_bank(const SurfaceMap& surface, double footprint_m);

// Semi-implicit Euler: v += (g + a(u)) dt, then p += v dt. Thrust only
// fires with fuel remaining and spends one fuel step when it does.
LanderState dynamics_step(const LanderState& x, LanderAction u, double dt,
                          const LanderConfig& cfg);

// detected_cell = argmax over cells of PSNR(received, reference view);
// ties prefer the lower cell index.
Observation observe(const CameraImage& received, const ReferenceBank& bank);

// b'(c) proportional to confusion[z][c] * b(c), renormalized. A degenerate
// all-zero product resets to uniform; *degenerate reports that when
// non-null. The action is unused while the surface target is static but
// kept for the transition signature.
Belief belief_update(const Belief& b, LanderAction u, const Observation& z,
                     const ConfusionMatrix& confusion, bool* degenerate = nullptr);

// Empirical confusion per (pipeline, channel) operating point: renders
// center-framed views of uniformly drawn cells, pushes them through the
// supplied transmit function, and row-normalizes detection counts. The
// render matches the per-step survey of run_episode, so every off-diagonal
// count is codec or channel induced.
template <typename TransmitFn>
ConfusionMatrix calibrate_confusion(const SurfaceMap& surface, const ReferenceBank& bank,
                                    int transmissions, Rng& rng, TransmitFn&& transmit);

enum class LandingOutcome { kPerfect, kImperfect, kFailure };

// Contract: touchdown reached (z <= 0); throws std::logic_error otherwise.
// failure iff |v_z| > v_crash; perfect iff the touchdown point lies in the
// target cell (or radius, see RewardConfig); imperfect otherwise.
LandingOutcome classify_outcome(const LanderState& touchdown, const SurfaceMap& surface,
                                const Cell& target, const RewardConfig& cfg);

// Shaping w_d * (3D distance to the target-cell ground center, previous
// minus next) - w_u [u != coast]; on touchdown adds the terminal bonus for
// the classified outcome.
double reward(const LanderState& prev, const LanderState& next, LanderAction u,
              const SurfaceMap& surface, const Cell& target, const RewardConfig& cfg);

// Tabular policy over a QMDP-style key: belief-argmax cell offset from the
// sub-lander cell (5 bins per axis: far/near negative, on target, near/far
// positive), 8 altitude bands, 8 vertical-speed bands. Offset magnitude
// beyond two cells is deliberately dropped: with no lateral velocity in the
// key a position-only policy cannot damp an approach anyway, and the coarse
// grid concentrates the training data the vertical ladder needs.
// The spread statistic feeds the keep-ratio controller.
struct PolicyTable {
  double lr = 0.1;
  double discount = 0.99;
  std::vector<double> q;        // state_count() * kActionCount
  RunningStat spread_stats;     // running scale of max-mean Q spread

  PolicyTable();
  static int state_count() { return 5 * 5 * 8 * 8; }
  double* row(int state) { return q.data() + static_cast<std::size_t>(state) * kActionCount; }
  const double* row(int state) const {
    return q.data() + static_cast<std::size_t>(state) * kActionCount;
  }
};

// Offset bins {<=-2,-1,0,+1,>=+2} cells each axis; altitude band edges
// 10/50/150/300/600/1000/1500 m; v_z bands: hover-or-climb (> -1 m/s), then
// descent edges -2.5/-4/-6.5/-10/-26/-45 m/s (the last split keeps
// recoverable plummet distinct from doomed).
int policy_state_key(const Belief& belief, const LanderState& x, const SurfaceMap& surface);

// Epsilon-greedy over the keyed Q row; greedy ties prefer the lower action
// index.
LanderAction choose_action(const Belief& belief, const LanderState& x, const SurfaceMap& surface,
                           const PolicyTable& policy, double epsilon, Rng& rng);

// Q(s,u) += lr (r + discount max_u' Q(s',u') - Q(s,u)); next_state < 0
// marks a terminal transition and bootstraps 0.
void q_update(PolicyTable& policy, int state, LanderAction u, double r, int next_state);

// Keep-ratio controller map: 1 / (1 + e^{kappa g}) clamped to
// [delta_min, 1].
double delta_sigmoid(double g, double kappa);

// Gradient proxy g = (max_u Q - mean_u Q) / (running spread std + 1e-9),
// with the spread statistic updated online. kappa <= 0 throws.
double delta_from_reward_gradient(PolicyTable& policy, int state, double kappa,
                                  double delta_min = 0.3);

inline constexpr double kDeltaMin = 0.3;

// What travels between lander and relay each step.
enum class PipelineKind {
  kBypass,    // no communication: belief pinned to the true target
  kRaw,       // frame forwarded unchanged (identity codec)
  kSemantic,  // learned codec at the controller's delta_t
  kBaseline,  // block-transform codec at fixed rate
};

struct PipelineConfig {
  PipelineKind kind = PipelineKind::kBypass;
  const CodecParams* codec = nullptr;  // kSemantic
  double fixed_delta = 0.0;            // kSemantic: > 0 overrides the controller
  bool quantize = true;
  int dct_q_bits = 4;                  // kBaseline
  bool channel_enabled = false;
  ChannelConfig channel;
  const ConfusionMatrix* confusion = nullptr;  // null = identity
};

struct EpisodeConfig {
  LanderConfig lander;
  RewardConfig reward;
  double kappa = 1.0;
  double delta_min = kDeltaMin;
  double epsilon = 0.0;
  bool train = false;
};

struct StepLog {
  int step = 0;
  Vec3 position;          // state the action was chosen in
  Vec3 velocity;
  int action = 0;
  double reward = 0.0;
  double delta = 1.0;
  Cell detected_cell{-1, -1};  // -1,-1 when no frame was received
  double belief_entropy = 0.0;
};

struct EpisodeLog {
  std::vector<StepLog> steps;
  LandingOutcome outcome = LandingOutcome::kFailure;
  double total_reward = 0.0;
  Cell target;
  int belief_resets = 0;
};

// One descent: free-fall entry, then per step render a center-framed
// survey view of the designated zone (the process the confusion matrix is
// calibrated on) -> encode at delta_t -> channel -> decode -> observe ->
// belief update -> action -> dynamics -> reward (-> Q backup when
// cfg.train). The target cell is drawn uniformly per episode. Episodes
// that exhaust max_steps aloft classify as failure.
EpisodeLog run_episode(const SurfaceMap& surface, const ReferenceBank& bank, PolicyTable& policy,
                       const EpisodeConfig& cfg, const PipelineConfig& pipe, Rng& rng);

// step,x,y,z,vx,vy,vz,action,reward,delta,detected_col,detected_row,
// belief_entropy rows after a header line; %.17g doubles so logs round-trip
// bit-exactly.
void write_episode_csv(const EpisodeLog& log, std::ostream& out);

struct TrainPolicyConfig {
  int episodes = 20000;
  // Learning rate anneals lr -> lr_end across the run: high early so returns
  // land fast, low late so the table consolidates instead of chasing the
  // most recent episodes.
  double lr = 0.5;
  double lr_end = 0.05;
  double discount = 0.99;
  double eps_start = 0.5;
  double eps_end = 0.03;
  int eps_decay_episodes = 10000;
  // Untried entries sit at zero, above the negative value of wandering, so
  // greedy play keeps probing fresh branches until real returns fill in.
  double q_init = 0.0;
  // Guided exploration: with probability beta the behavior action comes from
  // a scripted reflex pilot (brake floors per altitude band plus scheduled
  // approach burns) instead of the epsilon-greedy table. Updates stay pure
  // off-policy Q-learning on the experienced transitions; behavior never
  // reads the table it is writing. beta anneals from the start weight to the
  // end weight by guided_fraction of the run and holds there. Both weights
  // default to 1: the coarse state key aliases unlike situations, which
  // leaves per-row action gaps far below the bootstrap noise, so any greedy
  // self-play share feeds back argmax jitter as behavior and erodes the
  // table (measured: a 0.15 self-play share costs double-digit percent of
  // landed episodes). With demonstrations only, visited actions earn their
  // real return while untried ones rest at the init below it, and the
  // greedy table reproduces the pilot wherever it has data.
  double guided_start_weight = 1.0;
  double guided_end_weight = 1.0;
  double guided_fraction = 0.6;
  // Exploring starts mix in all run long: altitude anywhere above the floor,
  // entry rate drawn on the 1.62 m/s lattice up to past the recoverable
  // limit, control from the first step, so braking rows off the nominal
  // corridor are seeded and doomed rows learn their true worth.
  double exploring_start_prob = 0.5;
  double exploring_start_floor = 10.0;
  // Replay each episode's transitions newest-first after it ends: one pass
  // carries the touchdown value the full length of the descent chain
  // instead of one state per episode.
  int replay_passes = 1;
  std::uint64_t seed = 1;
};

// Tabular Q-learning under the bypass pipeline (exact target knowledge);
// the learned table is then evaluated under full communication.
PolicyTable train_policy(const SurfaceMap& surface, const ReferenceBank& bank,
                         const EpisodeConfig& cfg, const TrainPolicyConfig& tcfg);

struct RewardComparePoint {
  double ebn0 = 0.0;
  double semantic_mean = 0.0, semantic_se = 0.0;
  double classic_mean = 0.0, classic_se = 0.0;
};

// Monte Carlo expected episode reward for the semantic and classic
// pipelines at one operating point, common random numbers across the two.
RewardComparePoint compare_expected_reward(const SurfaceMap& surface, const ReferenceBank& bank,
                                           const PolicyTable& policy, const EpisodeConfig& cfg,
                                           const PipelineConfig& semantic,
                                           const PipelineConfig& classic, int trials,
                                           std::uint64_t seed);

// The same comparison swept over an average-SNR grid (linear E_b/N_0
// values applied to both pipelines' channels).
std::vector<RewardComparePoint> expected_reward_table(
    const SurfaceMap& surface, const ReferenceBank& bank, const PolicyTable& policy,
    const EpisodeConfig& cfg, const PipelineConfig& semantic, const PipelineConfig& classic,
    const std::vector<double>& ebn0_grid, int trials, std::uint64_t seed);

// Truth of eps^2/(sigma1 + eps^2) < eps^2/(sigma2 + eps^2); requires
// sigma1 > sigma2 > 0 and eps > 0 (invalid_argument otherwise).
bool prop1_rate_check(double sigma1, double sigma2, double eps);

// --- template definition ---

template <typename TransmitFn>
ConfusionMatrix calibrate_confusion(const SurfaceMap& surface, const ReferenceBank& bank,
                                    int transmissions, Rng& rng, TransmitFn&& transmit) {
  const int cells = surface.cell_count();
  std::vector<double> counts(static_cast<std::size_t>(cells) * cells, 0.0);
  for (int i = 0; i < transmissions; ++i) {
    const int truth = static_cast<int>(rng.uniform_int(0, cells - 1));
    const Cell cell = surface.cell_from_index(truth);
    const auto [cx, cy] = surface.cell_center(cell);
    const CameraImage sent = render_observation(surface, Vec3{cx, cy, 1000.0}, bank.footprint_m);
    const CameraImage received = transmit(sent, rng);
    const Observation z = observe(received, bank);
    const int detected = z.detected_cell.row * surface.cells_x + z.detected_cell.col;
    counts[static_cast<std::size_t>(detected) * cells + truth] += 1.0;
  }
  ConfusionMatrix confusion;
  confusion.cells_x = surface.cells_x;
  confusion.cells_y = surface.cells_y;
  confusion.rows.assign(static_cast<std::size_t>(cells) * cells, 0.0);
  for (int z = 0; z < cells; ++z) {
    double total = 0.0;
    for (int c = 0; c < cells; ++c) total += counts[static_cast<std::size_t>(z) * cells + c];
    for (int c = 0; c < cells; ++c) {
      confusion.rows[static_cast<std::size_t>(z) * cells + c] =
          total > 0.0 ? counts[static_cast<std::size_t>(z) * cells + c] / total
                      : 1.0 / static_cast<double>(cells);
    }
  }
  return confusion;
}

}  // namespace dynasc
