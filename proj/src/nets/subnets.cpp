#include "knowsam/nets/subnets.hpp"

namespace knowsam {
namespace {

using torch::nn::BatchNorm2d;
using torch::nn::Conv2d;
using torch::nn::Conv2dOptions;
using torch::nn::ConvTranspose2d;
using torch::nn::ConvTranspose2dOptions;
using torch::nn::LeakyReLU;
using torch::nn::LeakyReLUOptions;
using torch::nn::MaxPool2d;
using torch::nn::MaxPool2dOptions;
using torch::nn::ReLU;
using torch::nn::Sequential;

Sequential double_conv(int64_t in, int64_t out) {
  return Sequential(Conv2d(Conv2dOptions(in, out, 3).padding(1)), BatchNorm2d(out), ReLU(),
                    Conv2d(Conv2dOptions(out, out, 3).padding(1)), BatchNorm2d(out), ReLU());
}

struct ResBlockImpl : torch::nn::Module {
  explicit ResBlockImpl(int64_t ch) {
    conv1 = register_module("conv1", Conv2d(Conv2dOptions(ch, ch, 3).padding(1)));
    bn1 = register_module("bn1", BatchNorm2d(ch));
    conv2 = register_module("conv2", Conv2d(Conv2dOptions(ch, ch, 3).padding(1)));
    bn2 = register_module("bn2", BatchNorm2d(ch));
    act = register_module("act", LeakyReLU(LeakyReLUOptions().negative_slope(0.1)));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto h = act(bn1(conv1(x)));
    h = bn2(conv2(h));
    return act(x + h);
  }
  Conv2d conv1{nullptr}, conv2{nullptr};
  BatchNorm2d bn1{nullptr}, bn2{nullptr};
  LeakyReLU act{nullptr};
};
TORCH_MODULE(ResBlock);

// Encoder-decoder with concatenative skips.
struct UNet2dImpl : SubnetBase {
  explicit UNet2dImpl(SubnetConfig cfg) : SubnetBase(cfg) {
    int64_t w = cfg.base_width;
    enc.push_back(double_conv(cfg.in_channels, w));
    for (int64_t i = 0; i < cfg.depth; ++i) {
      enc.push_back(double_conv(w, 2 * w));
      w *= 2;
    }
    for (int64_t i = 0; i < cfg.depth; ++i) {
      ups.push_back(ConvTranspose2d(ConvTranspose2dOptions(w, w / 2, 2).stride(2)));
      dec.push_back(double_conv(w, w / 2));
      w /= 2;
    }
    for (size_t i = 0; i < enc.size(); ++i) register_module("enc" + std::to_string(i), enc[i]);
    for (size_t i = 0; i < ups.size(); ++i) {
      register_module("up" + std::to_string(i), ups[i]);
      register_module("dec" + std::to_string(i), dec[i]);
    }
    pool = register_module("pool", MaxPool2d(MaxPool2dOptions(2)));
    head = register_module("head", Conv2d(Conv2dOptions(w, cfg.num_classes, 1)));
  }

  torch::Tensor forward(const torch::Tensor& x) override {
    std::vector<torch::Tensor> skips;
    auto h = x;
    for (size_t i = 0; i < enc.size(); ++i) {
      if (i > 0) h = pool(h);
      h = enc[i]->forward(h);
      if (i + 1 < enc.size()) skips.push_back(h);
    }
    for (size_t i = 0; i < ups.size(); ++i) {
      h = ups[i]->forward(h);
      h = dec[i]->forward(torch::cat({skips[skips.size() - 1 - i], h}, 1));
    }
    return head(h);
  }

  std::vector<Sequential> enc;
  std::vector<ConvTranspose2d> ups;
  std::vector<Sequential> dec;
  MaxPool2d pool{nullptr};
  Conv2d head{nullptr};
};

// Encoder-decoder with additive residual skips and strided-conv resampling.
struct VNet2dImpl : SubnetBase {
  explicit VNet2dImpl(SubnetConfig cfg) : SubnetBase(cfg) {
    int64_t w = cfg.base_width;
    stem = register_module(
        "stem", Sequential(Conv2d(Conv2dOptions(cfg.in_channels, w, 3).padding(1)),
                           BatchNorm2d(w), LeakyReLU(LeakyReLUOptions().negative_slope(0.1))));
    enc_blocks.push_back(ResBlock(w));
    for (int64_t i = 0; i < cfg.depth; ++i) {
      downs.push_back(Sequential(Conv2d(Conv2dOptions(w, 2 * w, 2).stride(2)), BatchNorm2d(2 * w),
                                 LeakyReLU(LeakyReLUOptions().negative_slope(0.1))));
      w *= 2;
      enc_blocks.push_back(ResBlock(w));
    }
    for (int64_t i = 0; i < cfg.depth; ++i) {
      ups.push_back(Sequential(ConvTranspose2d(ConvTranspose2dOptions(w, w / 2, 2).stride(2)),
                               BatchNorm2d(w / 2),
                               LeakyReLU(LeakyReLUOptions().negative_slope(0.1))));
      w /= 2;
      dec_blocks.push_back(ResBlock(w));
    }
    for (size_t i = 0; i < enc_blocks.size(); ++i) {
      register_module("enc" + std::to_string(i), enc_blocks[i]);
    }
    for (size_t i = 0; i < downs.size(); ++i) register_module("down" + std::to_string(i), downs[i]);
    for (size_t i = 0; i < ups.size(); ++i) {
      register_module("up" + std::to_string(i), ups[i]);
      register_module("decb" + std::to_string(i), dec_blocks[i]);
    }
    head = register_module("head", Conv2d(Conv2dOptions(w, cfg.num_classes, 1)));
  }

  torch::Tensor forward(const torch::Tensor& x) override {
    std::vector<torch::Tensor> skips;
    auto h = enc_blocks[0]->forward(stem->forward(x));
    for (size_t i = 0; i < downs.size(); ++i) {
      skips.push_back(h);
      h = enc_blocks[i + 1]->forward(downs[i]->forward(h));
    }
    for (size_t i = 0; i < ups.size(); ++i) {
      h = ups[i]->forward(h);
      h = dec_blocks[i]->forward(h + skips[skips.size() - 1 - i]);
    }
    return head(h);
  }

  Sequential stem{nullptr};
  std::vector<ResBlock> enc_blocks;
  std::vector<Sequential> downs;
  std::vector<Sequential> ups;
  std::vector<ResBlock> dec_blocks;
  Conv2d head{nullptr};
};

}  // namespace

std::shared_ptr<SubnetBase> make_subnet(const SubnetConfig& config) {
  TORCH_CHECK(config.depth >= 1, "subnet depth must be >= 1");
  TORCH_CHECK(config.base_width >= 1, "subnet base_width must be >= 1");
  if (config.variant == SubnetVariant::kSkipConcat) {
    return std::make_shared<UNet2dImpl>(config);
  }
  return std::make_shared<VNet2dImpl>(config);
}

std::pair<LogitMap, ProbabilityMap> subnet_forward(SubnetBase& net, const torch::Tensor& x) {
  TORCH_CHECK(x.dim() == 3 || x.dim() == 4, "subnet_forward expects [C,H,W] or [B,C,H,W]");
  const auto xb = x.dim() == 3 ? x.unsqueeze(0) : x;
  const int64_t div = int64_t{1} << net.config.depth;
  TORCH_CHECK(xb.size(-2) % div == 0 && xb.size(-1) % div == 0, "input ", xb.size(-2), "x",
              xb.size(-1), " not divisible by the subnet's downsampling factor ", div);
  auto logits = net.forward(xb);
  if (x.dim() == 3) logits = logits.squeeze(0);
  auto lm = LogitMap::make(logits);
  auto pm = ProbabilityMap::make(logits.softmax(-3));
  return {std::move(lm), std::move(pm)};
}

}  // namespace knowsam
