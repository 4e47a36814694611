#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wdiff/denoiser.hpp"
#include "wdiff/diffusion.hpp"
#include "wdiff/transform.hpp"

namespace wdiff {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 64;
  std::vector<double> level_weights;  // empty: 1 per detail level, approx_weight last
  double approx_weight = 2.0;
  double lambda_energy = 0.0;  // the energy term is opt-in
  double lr_base = 4e-5;
  double lr_max = 1e-3;
  double lr_final = 4e-9;
  double warmup_fraction = 0.3;
  double weight_decay = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<double> weights_for(std::size_t level_count) const;
};

// sum_l w_l * mean((eps_l - eps_hat_l)^2)
double recon_loss(const Pyramid& eps_true, const Pyramid& eps_pred, const std::vector<double>& weights);

// sum_l |E_l - E_hat_l| / (N d_l D), E = sum of squares of the level.
double energy_loss(const Pyramid& c0_true, const Pyramid& c0_pred);

double total_loss(const Pyramid& eps_true, const Pyramid& eps_pred, const Pyramid& c0_true, const Pyramid& c0_implied,
                  const TrainConfig& cfg);

// One-cycle schedule: linear warm-up to lr_max over the first p*E epochs,
// then cosine decay to lr_final at E. Accepts fractional epochs.
double lr_at_epoch(double epoch, const TrainConfig& cfg);

struct AdamState {
  std::map<std::string, Eigen::VectorXd> m;
  std::map<std::string, Eigen::VectorXd> v;
  std::int64_t step = 0;
};

// Decoupled weight decay, then the bias-corrected Adam update. Parameters
// missing from `grads` are treated as having zero gradient.
void adamw_step(DenoiserParams& params, const std::map<std::string, Eigen::VectorXd>& grads, AdamState& state,
                double lr, const TrainConfig& cfg);

struct LossRecord {
  int step = 0;
  int epoch = 0;
  double lr = 0.0;
  double recon = 0.0;
  double energy = 0.0;
  double total = 0.0;
};

struct TrainResult {
  DenoiserParams params;
  AdamState optimizer;
  std::vector<LossRecord> history;
};

// Called after every optimizer step.
using TrainObserver = std::function<void(const LossRecord&)>;

// `data` is the normalized training batch (N, T, D).
TrainResult train(const TimeSeriesBatch& data, const DenoiserConfig& model, const TrainConfig& cfg,
                  const WaveletConfig& wavelet, const ScheduleConfig& schedule, const TrainObserver& observer = {});

// Loss history as CSV: step,epoch,lr,recon,energy,total.
std::string loss_history_csv(const std::vector<LossRecord>& history);

}  // namespace wdiff
