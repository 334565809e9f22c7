#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace weargen::nets {

/// conv3x3-BN-ReLU twice.
struct DoubleConvImpl : torch::nn::Module {
  DoubleConvImpl(int in, int out);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(DoubleConv);

/// Plain encoder-decoder with skip connections. `depth` pooling stages; the
/// decoder climbs back `depth - skip_top` stages, so the output stride is
/// 2^skip_top.
struct UNetImpl : torch::nn::Module {
  UNetImpl(int in_channels, int out_channels, int base, int depth = 4, int skip_top = 0);
  torch::Tensor forward(const torch::Tensor& x);

  int depth;
  int skip_top;
  DoubleConv inc{nullptr};
  std::vector<DoubleConv> downs;
  std::vector<DoubleConv> ups;
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(UNet);

/// Loss trace of one training run.
struct TrainLog {
  std::vector<double> losses;
  /// Mean of the first / last `window` recorded losses.
  double initial(std::size_t window = 50) const;
  double final(std::size_t window = 50) const;
};

/// Called every `every` iterations with (iteration, smoothed loss).
using ProgressFn = std::function<void(int, double)>;

/// Seeds torch's global generator. Every trainer calls this before building
/// its model so weights are a function of the seed alone.
void seed_everything(std::uint64_t seed);

}  // namespace weargen::nets
