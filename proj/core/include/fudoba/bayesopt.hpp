// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "fudoba/evaluator.hpp"
#include "fudoba/fusion.hpp"

namespace fudoba {

/// Maps a config to [0,1]^(2M): (l_1..l_M, alpha_1..alpha_M). Projection
/// dimensions are placed on a log2 scale between the smallest and largest
/// allowed choice; alphas are used as is.
class ThetaEncoding {
 public:
  explicit ThetaEncoding(SearchSpace space);

  Eigen::VectorXd encode(const FusionConfig& config) const;
  Eigen::Index dim() const { return static_cast<Eigen::Index>(2 * space_.modalities.size()); }
  const SearchSpace& space() const { return space_; }
  /// "l_<modality>" then "alpha_<modality>", matching encode's layout.
  std::vector<std::string> coordinate_names() const;

 private:
  SearchSpace space_;
  double log_l_min_ = 0.0;
  double log_l_span_ = 0.0;
};

struct KernelParams {
  double variance = 1.0;      ///< σ_f²
  double length_scale = 1.0;  ///< ℓ, isotropic
  double noise = 1e-4;        ///< σ_n²
  double jitter = 1e-8;

  void validate() const;
};

/// Matérn ν=5/2: σ_f²·(1 + √5·r/ℓ + 5r²/(3ℓ²))·exp(−√5·r/ℓ), r = |a − b|.
double matern_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& p);
double matern_from_distance(double r, const KernelParams& p);

struct GpFitOptions {
  KernelParams kernel;
  /// Candidate length scales; empty selects the default 16-point log grid
  /// on [0.05, 2].
  std::vector<double> length_scale_grid;
  int max_jitter_escalations = 3;
};

/// 16 log-spaced points from 0.05 to 2.0.
std::vector<double> default_length_scale_grid();

struct Prediction {
  double mean = 0.0;
  double sigma = 0.0;
};

/// Zero-mean GP on centred scores with a Matérn-5/2 kernel. Holds the
/// Cholesky factor of K + (noise + jitter)·I.
class GaussianProcess {
 public:
  /// Fits with the length scale in options.kernel (no grid search).
  static GaussianProcess fit_fixed(std::vector<Eigen::VectorXd> inputs, std::vector<double> targets,
                                   const GpFitOptions& options = {});
  /// Picks the length scale on the grid with the highest log marginal
  /// likelihood (first one on ties).
  static GaussianProcess fit(std::vector<Eigen::VectorXd> inputs, std::vector<double> targets,
                             const GpFitOptions& options = {});

  Prediction predict(const Eigen::VectorXd& x) const;

  double log_marginal_likelihood() const { return log_marginal_likelihood_; }
  const KernelParams& kernel() const { return kernel_; }
  /// Jitter actually used after any escalation.
  double effective_jitter() const { return kernel_.jitter; }
  double target_mean() const { return target_mean_; }
  std::size_t size() const { return inputs_.size(); }
  const std::vector<Eigen::VectorXd>& inputs() const { return inputs_; }
  const std::vector<double>& targets() const { return targets_; }

 private:
  GaussianProcess() = default;

  std::vector<Eigen::VectorXd> inputs_;
  std::vector<double> targets_;
  KernelParams kernel_;
  double target_mean_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  Eigen::VectorXd alpha_;  ///< (K + σ²I)⁻¹ (y − mean)
  double log_marginal_likelihood_ = 0.0;
};

inline constexpr double kEiEpsilon = 1e-9;

struct AcquisitionParams {
  double f_star = 0.0;
  double epsilon = kEiEpsilon;
};

/// (μ − f*)·Φ(Z) + σ·φ(Z) with Z = (μ − f*)/(σ + ε); never negative.
double expected_improvement(double mu, double sigma, const AcquisitionParams& acq);

struct ProposalOptions {
  /// Spaces larger than this are searched on a seeded uniform subsample of
  /// this many candidates.
  std::size_t max_candidates = 50000;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Unevaluated config with the largest EI (ties: smallest encoded vector,
/// compared lexicographically). `evaluated` holds config indices from
/// SearchSpace::index_of. Throws kSpaceExhausted when nothing remains.
FusionConfig propose_next(const GaussianProcess& gp, const ThetaEncoding& encoding,
                          const std::set<std::size_t>& evaluated, double f_star,
                          const ProposalOptions& options = {});

enum class ProposalSource { kRandomInit, kEi };

struct TrialRecord {
  int trial_index = 0;
  FusionConfig config;
  std::vector<double> fold_scores;
  double mean_f1 = 0.0;
  ProposalSource proposal_source = ProposalSource::kRandomInit;
  double elapsed_seconds = 0.0;
  bool truncated = false;
  std::string error;  ///< empty unless the trial failed
};

/// One trace line. Wall-clock time is omitted so traces are reproducible;
/// it goes to the timing sidecar instead.
nlohmann::ordered_json to_json(const TrialRecord& record, double best_so_far);
TrialRecord trial_record_from_json(const nlohmann::ordered_json& j);

/// Writes `path` (JSON lines) and `<path>.timing.jsonl`.
void save_trace(const std::vector<TrialRecord>& trace, const std::filesystem::path& path);
/// Reads a trace; timings are merged in when the sidecar exists.
std::vector<TrialRecord> load_trace(const std::filesystem::path& path);
std::filesystem::path timing_path(const std::filesystem::path& trace_path);

struct ObjectiveOutcome {
  std::vector<double> fold_scores;
  double mean_f1 = 0.0;
  bool truncated = false;
};

using Objective = std::function<ObjectiveOutcome(const FusionConfig&)>;

struct BoOptions {
  int budget = 50;
  int n_init = 5;
  std::uint64_t seed = 0;
  GpFitOptions gp;
  std::size_t max_candidates = 50000;
  int threads = 1;
  /// Called after each new trial; lets callers stream the trace to disk.
  std::function<void(const TrialRecord&)> on_trial;

  void validate() const;
};

struct BoResult {
  TrialRecord best;
  std::vector<TrialRecord> trace;
  bool space_exhausted = false;
};

/// Sequential BO: n_init seeded uniform draws without replacement, then
/// GP fit + EI argmax per trial, until `budget` records exist (counting any
/// `resume` records) or the space runs out. A throwing objective produces a
/// record with mean_f1 = 0 and the error message.
BoResult run_bo(const Objective& objective, const SearchSpace& space, const BoOptions& options,
                std::vector<TrialRecord> resume = {});

struct FusionBoResult {
  BoResult search;
  FusedDataset best_fused;
  EvalResult best_eval;  ///< includes the refit on all rows
};

/// run_bo with the fusion + CV objective; re-evaluates the best config at
/// the end for its full-data model.
FusionBoResult run_fusion_bo(std::span<const EmbeddingMatrix> matrices,
                             const LabeledDataset& labels, const SearchSpace& space,
                             const BoOptions& options, const CVConfig& cv,
                             const NormWeights& weights = {},
                             std::vector<TrialRecord> resume = {});

std::string_view to_string(ProposalSource source);

}  // namespace fudoba
