#pragma once

#include <vector>

#include <torch/torch.h>

namespace weargen::diff {

/// Linear-beta DDPM schedule. alpha_bars[t] = prod_{i<=t} (1 - betas[i]).
struct DiffusionSchedule {
  int T = 0;
  std::vector<double> betas;
  std::vector<double> alpha_bars;

  double alpha_bar(int t) const;
};

DiffusionSchedule make_schedule(int T, double beta_min, double beta_max);

/// sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps.
torch::Tensor q_sample(const torch::Tensor& x0, int t, const torch::Tensor& eps, const DiffusionSchedule& sched);

/// Batched form: `t` is an int64 tensor with one timestep per leading-dim row.
torch::Tensor q_sample(const torch::Tensor& x0, const torch::Tensor& t, const torch::Tensor& eps,
                       const DiffusionSchedule& sched);

/// Sentinel for the step after the last timestep (alpha_bar = 1).
inline constexpr int kFinalStep = -1;

/// Deterministic (eta = 0) DDIM update from t to t_prev. t_prev may be kFinalStep.
torch::Tensor ddim_step(const torch::Tensor& x_t, const torch::Tensor& eps_pred, int t, int t_prev,
                        const DiffusionSchedule& sched);

/// x0 estimate implied by a noise prediction at timestep t.
torch::Tensor predict_x0(const torch::Tensor& x_t, const torch::Tensor& eps_pred, int t,
                         const DiffusionSchedule& sched);

/// Descending, evenly spaced timesteps for a `steps`-step sampler over sched.T.
std::vector<int> ddim_timesteps(int T, int steps);

/// eps_uncond + scale * (eps_cond - eps_uncond).
torch::Tensor guided_eps(const torch::Tensor& eps_cond, const torch::Tensor& eps_uncond, double scale);

/// Sinusoidal embedding of integer timesteps, shape [N, dim]. dim must be even.
torch::Tensor timestep_embedding(const torch::Tensor& t, int dim);

}  // namespace weargen::diff
