#pragma once

#include <optional>

#include "cmdpbench/learners/sops.hpp"
#include "cmdpbench/simplex_ogd.hpp"

namespace cmdpbench {

// Stops once the accumulated negative violation clears both subroutines'
// regret bounds plus the estimation uncertainty:
//   -max_i S_i(t) >= 2 C_P sqrt(t ln t) + 8L sqrt(2t ln(1/delta)) + 2 C_D sqrt(t).
inline double cvops_stopping_threshold(long t, double c_p, double c_d, double L, double delta) {
  double td = static_cast<double>(t);
  double lnt = t > 1 ? std::log(td) : 0.0;
  return 2.0 * c_p * std::sqrt(td * lnt) + 8.0 * L * std::sqrt(2.0 * td * std::log(1.0 / delta)) +
         2.0 * c_d * std::sqrt(td);
}

inline bool cvops_stopping_condition(std::span<const double> S, long t, double c_p, double c_d,
                                     double L, double delta) {
  double worst = -std::numeric_limits<double>::infinity();
  for (double s : S) worst = std::max(worst, s);
  return -worst >= cvops_stopping_threshold(t, c_p, c_d, L, delta);
}

// rho_hat = -(1/t) max_i R_i(t) - (2L/t) sqrt(2 t ln(1/delta)).
inline double estimate_slater(std::span<const double> R, long t, double L, double delta) {
  double worst = -std::numeric_limits<double>::infinity();
  for (double r : R) worst = std::max(worst, r);
  double td = static_cast<double>(t);
  return -worst / td - (2.0 * L / td) * std::sqrt(2.0 * td * std::log(1.0 / delta));
}

// Uniform mixture over the policies played during estimation.
inline MixturePolicy build_mixture_policy(const std::vector<Policy>& played) {
  if (played.empty()) throw std::invalid_argument("build_mixture_policy: no policies");
  MixturePolicy mix;
  mix.components = played;
  mix.weights.assign(played.size(), 1.0 / static_cast<double>(played.size()));
  return mix;
}

// Default regret constants for the two subroutines.
inline double default_cp(const LayeredStateSpace& sp, long T, double delta) {
  double L = sp.horizon();
  double X = sp.num_states(), A = sp.num_actions();
  return 10.0 * L * X * std::sqrt(A * std::log(static_cast<double>(T) * X * A / delta));
}

inline double default_cd(double L, int m) { return L * std::sqrt(2.0 * m); }

struct CvopsParams {
  double c_p = 0.0;  // 0: use default_cp
  double c_d = 0.0;  // 0: use default_cd
  double c_p_delta = 10.0;  // failure-probability multiplier of the primal bound (analysis only)
  int uob_refresh = 25;
};

// Anytime adversarial-MDP regret minimizer: the unconstrained SV-OPS pipeline
// wrapped in doubling epochs of length 2^j. Fed losses lie in
// [-alpha_max/L, 1] and are affinely rescaled to [0,1] before estimation.
class AnytimePrimal {
 public:
  AnytimePrimal(SpacePtr space, long T, double delta, double loss_shift,
                OracleConfidence oracle = {})
      : space_(space),
        delta_(delta),
        loss_shift_(loss_shift),
        core_(space, {}, 0, T, delta, epoch_rate_(0), epoch_rate_(0),
              OracleConfidence{oracle.kernel, nullptr}) {}

  const Policy& policy() const { return core_.policy(); }
  int epoch() const { return epoch_; }
  double loss_shift() const { return loss_shift_; }
  double gamma() const { return core_.gamma(); }

  // raw per-step losses as (pair, value in [-shift, 1]); t is the global
  // episode index within the estimation phase. Epoch j covers episodes
  // [2^j, 2^{j+1}); the iterate resets so that each boundary episode is
  // played from the fresh uniform occupancy.
  void feed(long t, const Trajectory& traj, const std::vector<std::pair<int, double>>& raw) {
    std::vector<std::pair<int, double>> rescaled;
    rescaled.reserve(raw.size());
    for (auto& [pair, v] : raw)
      rescaled.push_back({pair, (v + loss_shift_) / (1.0 + loss_shift_)});
    std::vector<double> u = upper_occupancy_bound(core_.policy(), core_.confidence());
    core_.step(u, traj, rescaled, false);
    if (t + 1 == 2 * epoch_start_) {
      ++epoch_;
      epoch_start_ *= 2;
      core_.reset_iterate(epoch_rate_(epoch_), epoch_rate_(epoch_));
    }
  }

  const SvopsCore& core() const { return core_; }
  SvopsCore& core() { return core_; }

  nlohmann::json save_state() const {
    return {{"epoch", epoch_}, {"epoch_start", epoch_start_}, {"core", core_.save_state()}};
  }

  void load_state(const nlohmann::json& j) {
    epoch_ = j.at("epoch").get<int>();
    epoch_start_ = j.at("epoch_start").get<long>();
    core_.load_state(j.at("core"));
  }

 private:
  double epoch_rate_(int j) const {
    double len = std::pow(2.0, j);
    double L = space_->horizon();
    double xa = static_cast<double>(space_->num_states()) * space_->num_actions();
    return std::sqrt(L * std::log(L * xa / delta_) / (len * xa));
  }

  SpacePtr space_;
  double delta_;
  double loss_shift_;
  int epoch_ = 0;
  long epoch_start_ = 1;
  SvopsCore core_;
};

// Constant-violation optimistic policy search: a primal/dual estimation phase
// that learns a strictly feasible policy and its margin, then a nested S-OPS
// run with beta_i = alpha_i - rho_hat and pi_diamond = the uniform mixture of
// the played policies. The phase transitions at most once; if the stopping
// condition never fires the estimation runs to T and no transition is
// reported.
class CvopsLearner {
 public:
  enum class Phase { Estimating, Running };

  CvopsLearner(SpacePtr space, std::vector<double> alpha, long T, double delta, double eta,
               double gamma, CvopsParams params = {}, OracleConfidence oracle = {})
      : space_(space),
        alpha_(std::move(alpha)),
        T_(T),
        delta_(delta),
        eta_(eta),
        gamma_(gamma),
        params_(params),
        oracle_(oracle),
        primal_(space, T, delta, max_alpha_() / space->horizon(), oracle),
        phi_(alpha_.size(), 1.0 / static_cast<double>(alpha_.size())),
        S_(alpha_.size(), 0.0),
        R_(alpha_.size(), 0.0) {
    if (params_.c_p <= 0.0) params_.c_p = default_cp(*space_, T_, delta_);
    if (params_.c_d <= 0.0) params_.c_d = default_cd(space_->horizon(), static_cast<int>(alpha_.size()));
    g_max_ = dual_gradient_bound(space_->horizon(), alpha_);
  }

  Phase phase() const { return phase_; }
  long transition_episode() const { return t_bar_; }  // -1 before any transition
  double rho_hat() const { return rho_hat_; }
  double lambda() const { return nested_ ? nested_->lambda() : 0.0; }
  const std::vector<double>& phi() const { return phi_; }
  const CvopsParams& params() const { return params_; }

  AnyPolicy policy() const {
    if (phase_ == Phase::Running) return nested_->policy();
    return primal_.policy();
  }

  StepDiagnostics step(const Trajectory& traj) {
    if (phase_ == Phase::Running) return nested_->step(traj);

    ++t_;
    const auto& sp = *space_;
    int m = static_cast<int>(alpha_.size());
    double L = sp.horizon();
    played_.push_back(primal_.policy());

    // Per-step losses for the primal (steps k = 1..L-1) and the per-episode
    // violation vector for the dual.
    std::vector<std::pair<int, double>> raw;
    std::vector<double> dual_loss(m, 0.0);
    for (std::size_t k = 1; k < traj.steps.size(); ++k) {
      const auto& step = traj.steps[k];
      double weighted = 0.0;
      for (int i = 0; i < m; ++i) {
        double v = step.costs[i] - alpha_[i] / L;
        weighted += phi_[i] * v;
        dual_loss[i] -= v;
        S_[i] += v;
      }
      raw.push_back({sp.pair_id(step.x, step.a), weighted});
    }
    for (int i = 0; i < m; ++i) {
      double total = 0.0;
      for (std::size_t k = 1; k < traj.steps.size(); ++k) total += traj.steps[k].costs[i];
      R_[i] += total - alpha_[i];
    }

    primal_.feed(t_, traj, raw);
    phi_ = simplex_ogd_step(phi_, dual_loss, ogd_step_size(t_, g_max_));

    StepDiagnostics diag;
    diag.lambda = 0.0;
    if (cvops_stopping_condition(S_, t_, params_.c_p, params_.c_d, L, delta_)) {
      t_bar_ = t_;
      rho_hat_ = estimate_slater(R_, t_bar_, L, delta_);
      if (rho_hat_ <= 0.0)
        throw SolverFailure(traj.t, "degenerate Slater estimate rho_hat <= 0");
      std::vector<double> beta(alpha_);
      for (double& b : beta) b -= rho_hat_;
      pi_diamond_ = build_mixture_policy(played_);
      nested_.emplace(space_, alpha_, beta, AnyPolicy(*pi_diamond_), T_, delta_, eta_, gamma_,
                      oracle_, params_.uob_refresh);
      phase_ = Phase::Running;
    }
    return diag;
  }

  const std::optional<SopsLearner>& nested() const { return nested_; }
  const AnytimePrimal& primal() const { return primal_; }
  const std::vector<Policy>& played() const { return played_; }
  const std::optional<MixturePolicy>& pi_diamond() const { return pi_diamond_; }
  std::span<const double> violation_sums() const { return S_; }
  std::span<const double> threshold_sums() const { return R_; }
  long episodes_seen() const { return t_; }

  nlohmann::json save_state() const {
    nlohmann::json j{{"phase", phase_ == Phase::Running ? "running" : "estimating"},
                     {"t", t_},
                     {"t_bar", t_bar_},
                     {"rho_hat", rho_hat_},
                     {"S", S_},
                     {"R", R_},
                     {"phi", phi_},
                     {"primal", primal_.save_state()}};
    nlohmann::json played = nlohmann::json::array();
    for (const auto& p : played_) played.push_back(policy_to_json(p));
    j["played"] = played;
    if (pi_diamond_) j["pi_diamond"] = mixture_to_json(*pi_diamond_);
    if (nested_) j["nested"] = nested_->save_state();
    return j;
  }

  void load_state(const nlohmann::json& j) {
    t_ = j.at("t").get<long>();
    t_bar_ = j.at("t_bar").get<long>();
    rho_hat_ = j.at("rho_hat").get<double>();
    S_ = j.at("S").get<std::vector<double>>();
    R_ = j.at("R").get<std::vector<double>>();
    phi_ = j.at("phi").get<std::vector<double>>();
    primal_.load_state(j.at("primal"));
    played_.clear();
    for (const auto& p : j.at("played")) played_.push_back(policy_from_json(space_, p));
    if (j.contains("pi_diamond")) pi_diamond_ = mixture_from_json(space_, j.at("pi_diamond"));
    if (j.at("phase").get<std::string>() == "running") {
      std::vector<double> beta(alpha_);
      for (double& b : beta) b -= rho_hat_;
      nested_.emplace(space_, alpha_, beta, AnyPolicy(*pi_diamond_), T_, delta_, eta_, gamma_,
                      oracle_, params_.uob_refresh);
      nested_->load_state(j.at("nested"));
      phase_ = Phase::Running;
    } else {
      phase_ = Phase::Estimating;
    }
  }

 private:
  double max_alpha_() const {
    double m = 0.0;
    for (double a : alpha_) m = std::max(m, a);
    return m;
  }

  SpacePtr space_;
  std::vector<double> alpha_;
  long T_;
  double delta_;
  double eta_;
  double gamma_;
  CvopsParams params_;
  OracleConfidence oracle_;
  Phase phase_ = Phase::Estimating;
  AnytimePrimal primal_;
  std::vector<double> phi_;
  std::vector<double> S_;  // sum_tau sum_{k=1..L-1} (g - alpha_i/L)
  std::vector<double> R_;  // sum_tau (sum_{k=1..L-1} g - alpha_i)
  std::vector<Policy> played_;
  double g_max_ = 1.0;
  long t_ = 0;
  long t_bar_ = -1;
  double rho_hat_ = 0.0;
  std::optional<MixturePolicy> pi_diamond_;
  std::optional<SopsLearner> nested_;
};

}  // namespace cmdpbench
