#include "weargen/diffusion.hpp"

#include <cmath>
#include <string>

#include "weargen/errors.hpp"

namespace weargen::diff {

double DiffusionSchedule::alpha_bar(int t) const {
  if (t == kFinalStep) return 1.0;
  if (t < 0 || t >= T) throw InvalidArgument("timestep " + std::to_string(t) + " outside [0, T)");
  return alpha_bars[static_cast<std::size_t>(t)];
}

DiffusionSchedule make_schedule(int T, double beta_min, double beta_max) {
  if (T < 1) throw InvalidArgument("make_schedule: T must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw InvalidArgument("make_schedule: require 0 < beta_min <= beta_max < 1");
  }
  DiffusionSchedule s;
  s.T = T;
  s.betas.resize(static_cast<std::size_t>(T));
  s.alpha_bars.resize(static_cast<std::size_t>(T));
  double prod = 1.0;
  for (int i = 0; i < T; ++i) {
    const double beta = T == 1 ? beta_min : beta_min + (beta_max - beta_min) * i / (T - 1);
    s.betas[static_cast<std::size_t>(i)] = beta;
    prod *= 1.0 - beta;
    s.alpha_bars[static_cast<std::size_t>(i)] = prod;
  }
  return s;
}

torch::Tensor q_sample(const torch::Tensor& x0, int t, const torch::Tensor& eps, const DiffusionSchedule& sched) {
  if (t < 0 || t >= sched.T) throw InvalidArgument("q_sample: timestep out of range");
  const double ab = sched.alpha_bars[static_cast<std::size_t>(t)];
  return x0 * std::sqrt(ab) + eps * std::sqrt(1.0 - ab);
}

torch::Tensor q_sample(const torch::Tensor& x0, const torch::Tensor& t, const torch::Tensor& eps,
                       const DiffusionSchedule& sched) {
  if (t.dim() != 1 || t.size(0) != x0.size(0)) throw InvalidArgument("q_sample: one timestep per row expected");
  if (t.numel() > 0 && (t.min().item<int64_t>() < 0 || t.max().item<int64_t>() >= sched.T)) {
    throw InvalidArgument("q_sample: timestep out of range");
  }
  auto table = torch::tensor(sched.alpha_bars, torch::kFloat64);
  auto ab = table.index_select(0, t.to(torch::kLong)).to(x0.scalar_type());
  std::vector<int64_t> shape(static_cast<std::size_t>(x0.dim()), 1);
  shape[0] = x0.size(0);
  ab = ab.view(shape);
  return ab.sqrt() * x0 + (1.0 - ab).sqrt() * eps;
}

torch::Tensor predict_x0(const torch::Tensor& x_t, const torch::Tensor& eps_pred, int t,
                         const DiffusionSchedule& sched) {
  const double ab = sched.alpha_bar(t);
  if (!(ab > 0.0)) throw NumericGuard("ddim: alpha_bar is zero at t=" + std::to_string(t));
  return (x_t - eps_pred * std::sqrt(1.0 - ab)) / std::sqrt(ab);
}

torch::Tensor ddim_step(const torch::Tensor& x_t, const torch::Tensor& eps_pred, int t, int t_prev,
                        const DiffusionSchedule& sched) {
  if (t == kFinalStep || (t_prev != kFinalStep && t_prev >= t)) {
    throw InvalidArgument("ddim_step: require t > t_prev");
  }
  const auto x0 = predict_x0(x_t, eps_pred, t, sched);
  const double ab_prev = sched.alpha_bar(t_prev);
  if (ab_prev == 1.0) return x0;
  return x0 * std::sqrt(ab_prev) + eps_pred * std::sqrt(1.0 - ab_prev);
}

std::vector<int> ddim_timesteps(int T, int steps) {
  if (T < 1 || steps < 1) throw InvalidArgument("ddim_timesteps: T and steps must be >= 1");
  if (steps > T) steps = T;
  std::vector<int> ts;
  ts.reserve(static_cast<std::size_t>(steps));
  for (int i = steps - 1; i >= 0; --i) {
    // Spread so that the first sampled step is T-1 and the last is 0.
    ts.push_back(steps == 1 ? T - 1 : static_cast<int>(std::lround(static_cast<double>(i) * (T - 1) / (steps - 1))));
  }
  return ts;
}

torch::Tensor guided_eps(const torch::Tensor& eps_cond, const torch::Tensor& eps_uncond, double scale) {
  if (scale < 0.0) throw InvalidArgument("cfg scale must be non-negative");
  if (scale == 1.0) return eps_cond;
  return eps_uncond + (eps_cond - eps_uncond) * scale;
}

torch::Tensor timestep_embedding(const torch::Tensor& t, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw InvalidArgument("timestep_embedding: dim must be positive and even");
  const int half = dim / 2;
  auto freqs = torch::exp(-std::log(10000.0) * torch::arange(half, torch::kFloat32) / static_cast<double>(half));
  auto args = t.to(torch::kFloat32).unsqueeze(1) * freqs.unsqueeze(0);
  return torch::cat({torch::cos(args), torch::sin(args)}, 1);
}

}  // namespace weargen::diff
