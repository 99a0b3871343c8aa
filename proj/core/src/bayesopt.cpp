// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include "fudoba/bayesopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "fudoba/error.hpp"
#include "fudoba/io_util.hpp"
#include "fudoba/parallel.hpp"
#include "fudoba/random.hpp"

namespace fudoba {
namespace {

const double kSqrt5 = std::sqrt(5.0);

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

bool lexicographically_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace

ThetaEncoding::ThetaEncoding(SearchSpace space) : space_(std::move(space)) {
  space_.validate();
  log_l_min_ = std::log2(static_cast<double>(space_.l_choices.front()));
  log_l_span_ = std::log2(static_cast<double>(space_.l_choices.back())) - log_l_min_;
}

Eigen::VectorXd ThetaEncoding::encode(const FusionConfig& config) const {
  const std::size_t m_count = space_.modalities.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(2 * m_count));
  for (std::size_t m = 0; m < m_count; ++m) {
    const auto* e = config.find(space_.modalities[m]);
    if (!e) {
      throw Error(ErrorCode::kInvalidArgument,
                  "config lacks modality '" + space_.modalities[m] + "'");
    }
    const double l_coord =
        log_l_span_ > 0.0 ? (std::log2(static_cast<double>(e->l)) - log_l_min_) / log_l_span_ : 0.0;
    out[static_cast<Eigen::Index>(m)] = l_coord;
    out[static_cast<Eigen::Index>(m_count + m)] = e->alpha;
  }
  return out;
}

std::vector<std::string> ThetaEncoding::coordinate_names() const {
  std::vector<std::string> names;
  for (const auto& m : space_.modalities) names.push_back("l_" + m);
  for (const auto& m : space_.modalities) names.push_back("alpha_" + m);
  return names;
}

void KernelParams::validate() const {
  if (!(variance > 0.0) || !(length_scale > 0.0) || !(noise >= 0.0) || !(jitter > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "kernel parameters out of range");
  }
}

double matern_from_distance(double r, const KernelParams& p) {
  const double s = kSqrt5 * r / p.length_scale;
  return p.variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double matern_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& p) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "kernel inputs");
  return matern_from_distance((a - b).norm(), p);
}

std::vector<double> default_length_scale_grid() {
  std::vector<double> grid(16);
  const double lo = std::log(0.05);
  const double hi = std::log(2.0);
  for (int i = 0; i < 16; ++i) grid[static_cast<std::size_t>(i)] = std::exp(lo + (hi - lo) * i / 15.0);
  return grid;
}

GaussianProcess GaussianProcess::fit_fixed(std::vector<Eigen::VectorXd> inputs,
                                           std::vector<double> targets,
                                           const GpFitOptions& options) {
  options.kernel.validate();
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw Error(ErrorCode::kInsufficientData, "GP needs matching, non-empty inputs and targets");
  }
  const auto n = static_cast<Eigen::Index>(inputs.size());

  GaussianProcess gp;
  gp.kernel_ = options.kernel;
  double sum = 0.0;
  for (double t : targets) sum += t;
  gp.target_mean_ = sum / static_cast<double>(n);

  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = gp.kernel_.variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      k(i, j) = k(j, i) = matern_kernel(inputs[static_cast<std::size_t>(i)],
                                        inputs[static_cast<std::size_t>(j)], gp.kernel_);
    }
  }
  bool ok = false;
  for (int attempt = 0; attempt <= options.max_jitter_escalations; ++attempt) {
    Eigen::MatrixXd reg = k;
    reg.diagonal().array() += gp.kernel_.noise + gp.kernel_.jitter;
    gp.factor_.compute(reg);
    if (gp.factor_.info() == Eigen::Success) {
      ok = true;
      break;
    }
    gp.kernel_.jitter *= 10.0;
  }
  if (!ok) {
    throw Error(ErrorCode::kFactorizationFailure, "kernel matrix is not positive definite");
  }

  Eigen::VectorXd centred(n);
  for (Eigen::Index i = 0; i < n; ++i) centred[i] = targets[static_cast<std::size_t>(i)] - gp.target_mean_;
  gp.alpha_ = gp.factor_.solve(centred);

  const Eigen::MatrixXd l = gp.factor_.matrixL();
  double log_det_half = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det_half += std::log(l(i, i));
  gp.log_marginal_likelihood_ = -0.5 * centred.dot(gp.alpha_) - log_det_half -
                                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  gp.inputs_ = std::move(inputs);
  gp.targets_ = std::move(targets);
  return gp;
}

GaussianProcess GaussianProcess::fit(std::vector<Eigen::VectorXd> inputs,
                                     std::vector<double> targets, const GpFitOptions& options) {
  const auto grid =
      options.length_scale_grid.empty() ? default_length_scale_grid() : options.length_scale_grid;
  std::optional<GaussianProcess> best;
  std::optional<Error> last_error;
  for (double ell : grid) {
    GpFitOptions trial = options;
    trial.kernel.length_scale = ell;
    try {
      auto gp = fit_fixed(inputs, targets, trial);
      if (!best || gp.log_marginal_likelihood() > best->log_marginal_likelihood()) {
        best = std::move(gp);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kFactorizationFailure) throw;
      last_error = e;
    }
  }
  if (!best) throw *last_error;
  return std::move(*best);
}

Prediction GaussianProcess::predict(const Eigen::VectorXd& x) const {
  const auto n = static_cast<Eigen::Index>(inputs_.size());
  Eigen::VectorXd k_star(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k_star[i] = matern_kernel(x, inputs_[static_cast<std::size_t>(i)], kernel_);
  }
  Prediction p;
  p.mean = target_mean_ + k_star.dot(alpha_);
  const Eigen::VectorXd v = factor_.matrixL().solve(k_star);
  const double var = kernel_.variance - v.squaredNorm();
  p.sigma = var > 0.0 ? std::sqrt(var) : 0.0;
  return p;
}

double expected_improvement(double mu, double sigma, const AcquisitionParams& acq) {
  if (sigma < 0.0) sigma = 0.0;
  const double gain = mu - acq.f_star;
  if (sigma <= acq.epsilon && gain <= 0.0) return 0.0;
  const double z = gain / (sigma + acq.epsilon);
  const double ei = gain * normal_cdf(z) + sigma * normal_pdf(z);
  return ei > 0.0 ? ei : 0.0;
}

FusionConfig propose_next(const GaussianProcess& gp, const ThetaEncoding& encoding,
                          const std::set<std::size_t>& evaluated, double f_star,
                          const ProposalOptions& options) {
  const SearchSpace& space = encoding.space();
  const std::size_t total = space.size();

  std::vector<std::size_t> candidates;
  if (total <= options.max_candidates) {
    candidates.reserve(total - std::min(total, evaluated.size()));
    for (std::size_t i = 0; i < total; ++i) {
      if (!evaluated.contains(i)) candidates.push_back(i);
    }
  } else {
    Rng rng(options.seed);
    std::unordered_set<std::size_t> picked;
    while (picked.size() < options.max_candidates) picked.insert(uniform_below(rng, total));
    for (auto i : picked) {
      if (!evaluated.contains(i)) candidates.push_back(i);
    }
    std::sort(candidates.begin(), candidates.end());
    if (candidates.empty() && evaluated.size() < total) {
      // Subsample landed only on evaluated points; fall back to a scan.
      for (std::size_t i = 0; i < total && candidates.empty(); ++i) {
        if (!evaluated.contains(i)) candidates.push_back(i);
      }
    }
  }
  if (candidates.empty()) throw Error(ErrorCode::kSpaceExhausted, "every config was evaluated");

  const AcquisitionParams acq{f_star, kEiEpsilon};
  std::vector<double> ei(candidates.size());
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (candidates.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, options.threads, [&](std::size_t c) {
    const std::size_t end = std::min(candidates.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const auto pred = gp.predict(encoding.encode(space.config_at(candidates[i])));
      ei[i] = expected_improvement(pred.mean, pred.sigma, acq);
    }
  });

  std::size_t best = 0;
  Eigen::VectorXd best_code = encoding.encode(space.config_at(candidates[0]));
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (ei[i] < ei[best]) continue;
    Eigen::VectorXd code = encoding.encode(space.config_at(candidates[i]));
    if (ei[i] > ei[best] || lexicographically_less(code, best_code)) {
      best = i;
      best_code = std::move(code);
    }
  }
  return space.config_at(candidates[best]);
}

std::string_view to_string(ProposalSource source) {
  return source == ProposalSource::kEi ? "ei" : "random_init";
}

nlohmann::ordered_json to_json(const TrialRecord& record, double best_so_far) {
  nlohmann::ordered_json j;
  j["trial_index"] = record.trial_index;
  j["config"] = to_json(record.config);
  j["fold_scores"] = record.fold_scores;
  j["mean_f1"] = record.mean_f1;
  j["best_so_far"] = best_so_far;
  j["proposal_source"] = to_string(record.proposal_source);
  j["truncated"] = record.truncated;
  if (!record.error.empty()) j["error"] = record.error;
  return j;
}

TrialRecord trial_record_from_json(const nlohmann::ordered_json& j) {
  TrialRecord r;
  try {
    r.trial_index = j.at("trial_index").get<int>();
    r.config = fusion_config_from_json(j.at("config"));
    r.fold_scores = j.at("fold_scores").get<std::vector<double>>();
    r.mean_f1 = j.at("mean_f1").get<double>();
    const auto source = j.at("proposal_source").get<std::string>();
    if (source == "ei") {
      r.proposal_source = ProposalSource::kEi;
    } else if (source == "random_init") {
      r.proposal_source = ProposalSource::kRandomInit;
    } else {
      throw Error(ErrorCode::kParse, "unknown proposal_source '" + source + "'");
    }
    r.truncated = j.value("truncated", false);
    r.error = j.value("error", std::string{});
    r.elapsed_seconds = j.value("elapsed_seconds", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("trace record: ") + e.what());
  }
  return r;
}

std::filesystem::path timing_path(const std::filesystem::path& trace_path) {
  auto p = trace_path;
  p += ".timing.jsonl";
  return p;
}

void save_trace(const std::vector<TrialRecord>& trace, const std::filesystem::path& path) {
  std::string lines;
  std::string timing;
  double best = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    best = i == 0 ? trace[i].mean_f1 : std::max(best, trace[i].mean_f1);
    lines += to_json(trace[i], best).dump() + "\n";
    nlohmann::ordered_json t;
    t["trial_index"] = trace[i].trial_index;
    t["elapsed_seconds"] = trace[i].elapsed_seconds;
    timing += t.dump() + "\n";
  }
  write_file_atomic(path, lines);
  write_file_atomic(timing_path(path), timing);
}

std::vector<TrialRecord> load_trace(const std::filesystem::path& path) {
  std::vector<TrialRecord> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(trial_record_from_json(nlohmann::ordered_json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
    }
  }
  const auto tpath = timing_path(path);
  if (std::filesystem::exists(tpath)) {
    std::istringstream tin(read_file(tpath));
    std::map<int, double> seconds;
    while (std::getline(tin, line)) {
      if (trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;
      seconds[j.value("trial_index", -1)] = j.value("elapsed_seconds", 0.0);
    }
    for (auto& r : out) {
      if (auto it = seconds.find(r.trial_index); it != seconds.end()) r.elapsed_seconds = it->second;
    }
  }
  return out;
}

void BoOptions::validate() const {
  if (n_init < 1 || budget < n_init) {
    throw Error(ErrorCode::kInvalidArgument, "need budget >= n_init >= 1");
  }
}

BoResult run_bo(const Objective& objective, const SearchSpace& space, const BoOptions& options,
                std::vector<TrialRecord> resume) {
  options.validate();
  const ThetaEncoding encoding(space);
  const std::size_t total = space.size();

  BoResult result;
  result.trace = std::move(resume);
  std::set<std::size_t> evaluated;
  for (const auto& r : result.trace) {
    if (auto idx = space.index_of(r.config)) evaluated.insert(*idx);
  }

  auto evaluate = [&](const FusionConfig& config, ProposalSource source) {
    TrialRecord rec;
    rec.trial_index = result.trace.empty() ? 0 : result.trace.back().trial_index + 1;
    rec.config = config;
    rec.proposal_source = source;
    const auto start = std::chrono::steady_clock::now();
    try {
      auto outcome = objective(config);
      rec.fold_scores = std::move(outcome.fold_scores);
      rec.mean_f1 = outcome.mean_f1;
      rec.truncated = outcome.truncated;
    } catch (const std::exception& e) {
      spdlog::warn("trial {} failed: {}", rec.trial_index, e.what());
      rec.fold_scores.clear();
      rec.mean_f1 = 0.0;
      rec.error = e.what();
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    rec.elapsed_seconds = elapsed.count();
    evaluated.insert(*space.index_of(config));
    result.trace.push_back(rec);
    if (options.on_trial) options.on_trial(result.trace.back());
  };

  const auto budget = static_cast<std::size_t>(options.budget);
  const auto n_init = static_cast<std::size_t>(options.n_init);

  // The init stream is drawn from the seed alone, so a resumed run skips the
  // draws an earlier run already evaluated and continues the same sequence.
  Rng init_rng(derive_seed(options.seed, "init"));
  std::set<std::size_t> drawn;
  while (result.trace.size() < std::min(n_init, budget) && evaluated.size() < total) {
    const auto idx = static_cast<std::size_t>(uniform_below(init_rng, total));
    if (!drawn.insert(idx).second || evaluated.contains(idx)) continue;
    evaluate(space.config_at(idx), ProposalSource::kRandomInit);
  }

  while (result.trace.size() < budget) {
    if (evaluated.size() >= total) {
      result.space_exhausted = true;
      spdlog::info("search space exhausted after {} trials", result.trace.size());
      break;
    }
    std::vector<Eigen::VectorXd> inputs;
    std::vector<double> targets;
    std::set<std::size_t> seen;
    double f_star = -std::numeric_limits<double>::infinity();
    for (const auto& r : result.trace) {
      auto idx = space.index_of(r.config);
      if (!idx || !seen.insert(*idx).second) continue;
      inputs.push_back(encoding.encode(r.config));
      targets.push_back(r.mean_f1);
      f_star = std::max(f_star, r.mean_f1);
    }
    ProposalOptions proposal;
    proposal.max_candidates = options.max_candidates;
    proposal.seed = derive_seed(options.seed, "subsample") + result.trace.size();
    proposal.threads = options.threads;
    FusionConfig next;
    if (inputs.empty()) {
      Rng rng(proposal.seed);
      std::size_t idx = uniform_below(rng, total);
      while (evaluated.contains(idx)) idx = (idx + 1) % total;
      next = space.config_at(idx);
    } else {
      const auto gp = GaussianProcess::fit(std::move(inputs), std::move(targets), options.gp);
      next = propose_next(gp, encoding, evaluated, f_star, proposal);
    }
    evaluate(next, ProposalSource::kEi);
  }
  if (!result.trace.empty()) {
    result.best = *std::max_element(result.trace.begin(), result.trace.end(),
                                    [](const TrialRecord& a, const TrialRecord& b) {
                                      return a.mean_f1 < b.mean_f1;
                                    });
  }
  return result;
}

FusionBoResult run_fusion_bo(std::span<const EmbeddingMatrix> matrices,
                             const LabeledDataset& labels, const SearchSpace& space,
                             const BoOptions& options, const CVConfig& cv,
                             const NormWeights& weights, std::vector<TrialRecord> resume) {
  space.validate();
  if (space.modalities.size() != matrices.size()) {
    throw Error(ErrorCode::kInvalidArgument, "search space and inputs name different modalities");
  }
  for (std::size_t m = 0; m < matrices.size(); ++m) {
    if (matrices[m].modality_name != space.modalities[m]) {
      throw Error(ErrorCode::kInvalidArgument, "modality order differs between space and inputs");
    }
  }
  const ProjectionCache cache(matrices, labels, space.l_choices.back(), weights);
  CVConfig fold_cv = cv;
  fold_cv.threads = options.threads;

  Objective objective = [&](const FusionConfig& config) {
    const auto fused = cache.fuse(config);
    const auto eval = evaluate_objective(fused, fold_cv);
    return ObjectiveOutcome{eval.fold_scores, eval.mean_f1, eval.truncated};
  };

  FusionBoResult out;
  out.search = run_bo(objective, space, options, std::move(resume));
  out.best_fused = cache.fuse(out.search.best.config);
  out.best_eval = evaluate_objective(out.best_fused, fold_cv);
  return out;
}

}  // namespace fudoba
