#include "weargen/nets.hpp"

#include <algorithm>
#include <numeric>

#include "weargen/errors.hpp"

namespace weargen::nets {

namespace nn = torch::nn;

DoubleConvImpl::DoubleConvImpl(int in, int out) {
  body = register_module(
      "body", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1).bias(false)), nn::BatchNorm2d(out),
                             nn::ReLU(), nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1).bias(false)),
                             nn::BatchNorm2d(out), nn::ReLU()));
}

torch::Tensor DoubleConvImpl::forward(const torch::Tensor& x) { return body->forward(x); }

UNetImpl::UNetImpl(int in_channels, int out_channels, int base, int depth_, int skip_top_)
    : depth(depth_), skip_top(skip_top_) {
  if (depth < 1 || skip_top < 0 || skip_top >= depth) throw InvalidArgument("UNet: bad depth/skip_top");
  std::vector<int> ch = {base};
  for (int i = 1; i <= depth; ++i) ch.push_back(base * (1 << std::min(i, 3)));
  inc = register_module("inc", DoubleConv(in_channels, ch[0]));
  for (int i = 0; i < depth; ++i) {
    downs.push_back(register_module("down" + std::to_string(i), DoubleConv(ch[i], ch[i + 1])));
  }
  // Decoder stage i goes from level depth-i to depth-i-1.
  int cur = ch[depth];
  for (int i = 0; i < depth - skip_top; ++i) {
    const int skip = ch[depth - i - 1];
    ups.push_back(register_module("up" + std::to_string(i), DoubleConv(cur + skip, skip)));
    cur = skip;
  }
  head = register_module("head", nn::Conv2d(nn::Conv2dOptions(cur, out_channels, 1)));
}

torch::Tensor UNetImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> feats = {inc->forward(x)};
  for (auto& d : downs) feats.push_back(d->forward(torch::max_pool2d(feats.back(), 2)));
  torch::Tensor h = feats.back();
  for (std::size_t i = 0; i < ups.size(); ++i) {
    const auto& skip = feats[feats.size() - 2 - i];
    h = torch::upsample_nearest2d(h, std::vector<int64_t>{skip.size(2), skip.size(3)});
    h = ups[i]->forward(torch::cat({h, skip}, 1));
  }
  return head->forward(h);
}

double TrainLog::initial(std::size_t window) const {
  if (losses.empty()) return 0.0;
  const auto n = std::min(window, losses.size());
  return std::accumulate(losses.begin(), losses.begin() + static_cast<std::ptrdiff_t>(n), 0.0) / static_cast<double>(n);
}

double TrainLog::final(std::size_t window) const {
  if (losses.empty()) return 0.0;
  const auto n = std::min(window, losses.size());
  return std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(n), losses.end(), 0.0) / static_cast<double>(n);
}

void seed_everything(std::uint64_t seed) { torch::manual_seed(seed); }

}  // namespace weargen::nets
