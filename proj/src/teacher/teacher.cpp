#include "knowsam/teacher/teacher.hpp"

#include <cmath>

#include "knowsam/losses/losses.hpp"

namespace knowsam {
namespace {

using torch::nn::Conv2d;
using torch::nn::Conv2dOptions;
using torch::nn::ConvTranspose2d;
using torch::nn::ConvTranspose2dOptions;
using torch::nn::GELU;
using torch::nn::GroupNorm;
using torch::nn::GroupNormOptions;
using torch::nn::LayerNorm;
using torch::nn::LayerNormOptions;
using torch::nn::Linear;
using torch::nn::Sequential;

int64_t norm_groups(int64_t channels) {
  for (int64_t g = std::min<int64_t>(8, channels); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

GroupNorm gn(int64_t ch) { return GroupNorm(GroupNormOptions(norm_groups(ch), ch)); }

// conv3-GN-GELU-conv3-GN residual block (no running statistics, so a frozen
// encoder stays bit-identical in train mode).
struct ConvStageImpl : torch::nn::Module {
  explicit ConvStageImpl(int64_t ch) {
    conv1 = register_module("conv1", Conv2d(Conv2dOptions(ch, ch, 3).padding(1)));
    n1 = register_module("n1", gn(ch));
    conv2 = register_module("conv2", Conv2d(Conv2dOptions(ch, ch, 3).padding(1)));
    n2 = register_module("n2", gn(ch));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto h = torch::gelu(n1(conv1(x)));
    h = n2(conv2(h));
    return torch::gelu(x + h);
  }
  Conv2d conv1{nullptr}, conv2{nullptr};
  GroupNorm n1{nullptr}, n2{nullptr};
};
TORCH_MODULE(ConvStage);

// Bottleneck residual adapter (1x1 convs on feature maps).
struct ConvAdapterImpl : torch::nn::Module {
  explicit ConvAdapterImpl(int64_t ch) {
    down = register_module("down", Conv2d(Conv2dOptions(ch, std::max<int64_t>(ch / 4, 1), 1)));
    up = register_module("up", Conv2d(Conv2dOptions(std::max<int64_t>(ch / 4, 1), ch, 1)));
  }
  torch::Tensor forward(const torch::Tensor& x) { return x + up(torch::gelu(down(x))); }
  Conv2d down{nullptr}, up{nullptr};
};
TORCH_MODULE(ConvAdapter);

// Token-wise bottleneck adapter for decoder layers ([B,T,D] input).
struct TokenAdapterImpl : torch::nn::Module {
  explicit TokenAdapterImpl(int64_t dim) {
    down = register_module("down", Linear(dim, std::max<int64_t>(dim / 4, 1)));
    up = register_module("up", Linear(std::max<int64_t>(dim / 4, 1), dim));
  }
  torch::Tensor forward(const torch::Tensor& x) { return x + up(torch::gelu(down(x))); }
  Linear down{nullptr}, up{nullptr};
};
TORCH_MODULE(TokenAdapter);

// One decoder layer: image tokens cross-attend to the prompt tokens (single
// head, no token positions, so the layer is permutation-invariant in the
// prompts), then a token MLP, then an adapter.
struct CrossAttnLayerImpl : torch::nn::Module {
  explicit CrossAttnLayerImpl(int64_t dim) : scale(1.0 / std::sqrt(static_cast<double>(dim))) {
    norm_x = register_module("norm_x", LayerNorm(LayerNormOptions({dim})));
    norm_p = register_module("norm_p", LayerNorm(LayerNormOptions({dim})));
    norm_m = register_module("norm_m", LayerNorm(LayerNormOptions({dim})));
    wq = register_module("wq", Linear(dim, dim));
    wk = register_module("wk", Linear(dim, dim));
    wv = register_module("wv", Linear(dim, dim));
    mlp = register_module("mlp", Sequential(Linear(dim, 2 * dim), GELU(), Linear(2 * dim, dim)));
    adapter = register_module("adapter", TokenAdapter(dim));
  }

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& prompts) {
    const auto q = wq(norm_x(x));                  // [B,T,D]
    const auto k = wk(norm_p(prompts));            // [B,N,D]
    const auto v = wv(norm_p(prompts));
    const auto attn = (torch::matmul(q, k.transpose(1, 2)) * scale).softmax(-1);
    auto h = x + torch::matmul(attn, v);
    h = h + mlp->forward(norm_m(h));
    return adapter(h);
  }

  double scale;
  LayerNorm norm_x{nullptr}, norm_p{nullptr}, norm_m{nullptr};
  Linear wq{nullptr}, wk{nullptr}, wv{nullptr};
  Sequential mlp{nullptr};
  TokenAdapter adapter{nullptr};
};
TORCH_MODULE(CrossAttnLayer);

}  // namespace

PromptEmbedding PromptEmbedding::make(torch::Tensor p) {
  TORCH_CHECK(p.dim() == 3, "PromptEmbedding expects [B,N_b,L], got dim=", p.dim());
  TORCH_CHECK(p.size(1) >= 1, "PromptEmbedding needs N_b >= 1");
  TORCH_CHECK(p.isfinite().all().item<bool>(), "PromptEmbedding has non-finite values");
  return PromptEmbedding{std::move(p)};
}

PromptDecoderImpl::PromptDecoderImpl(int64_t embed_dim_, int64_t num_prompts_)
    : embed_dim(embed_dim_), num_prompts(num_prompts_) {
  blocks = register_module(
      "blocks", Sequential(Conv2d(Conv2dOptions(embed_dim, embed_dim, 3).padding(1)),
                           gn(embed_dim), GELU(),
                           Conv2d(Conv2dOptions(embed_dim, embed_dim, 3).padding(1)),
                           gn(embed_dim), GELU()));
  proj = register_module("proj", Linear(embed_dim, num_prompts * embed_dim));
}

PromptEmbedding PromptDecoderImpl::forward(const TeacherEmbedding& z) {
  TORCH_CHECK(z.z.dim() == 4, "prompt decoder expects [B,D,H',W']");
  TORCH_CHECK(z.dim() == embed_dim, "embedding dim ", z.dim(), " != configured ", embed_dim);
  auto h = blocks->forward(z.z);
  h = torch::adaptive_avg_pool2d(h, {1, 1}).flatten(1);  // [B,D]
  auto p = proj(h).reshape({z.batch(), num_prompts, embed_dim});
  return PromptEmbedding::make(std::move(p));
}

TeacherImpl::TeacherImpl(TeacherConfig cfg_) : cfg(std::move(cfg_)) {
  TORCH_CHECK(cfg.stride >= 2 && (cfg.stride & (cfg.stride - 1)) == 0,
              "teacher stride must be a power of two >= 2, got ", cfg.stride);
  const int64_t d = cfg.embed_dim;
  patchify_ = register_module(
      "patchify", Sequential(Conv2d(Conv2dOptions(cfg.in_channels, d, cfg.stride).stride(cfg.stride)),
                             gn(d), GELU()));
  enc_stages_ = register_module("enc_stages", torch::nn::ModuleList(ConvStage(d), ConvStage(d)));
  enc_adapters_ = register_module(
      "enc_adapters", torch::nn::ModuleList(ConvAdapter(d), ConvAdapter(d), ConvAdapter(d)));
  mask_proj_ = register_module("mask_proj", Conv2d(Conv2dOptions(cfg.num_classes, d, 1)));
  dec_layers_ = register_module("dec_layers", torch::nn::ModuleList());
  for (int64_t i = 0; i < cfg.decoder_layers; ++i) dec_layers_->push_back(CrossAttnLayer(d));

  auto up = Sequential();
  int64_t ch = d;
  for (int64_t s = cfg.stride; s > 1; s /= 2) {
    const int64_t next = std::max<int64_t>(ch / 2, 8);
    up->push_back(ConvTranspose2d(ConvTranspose2dOptions(ch, next, 2).stride(2)));
    up->push_back(gn(next));
    up->push_back(GELU());
    ch = next;
  }
  up->push_back(Conv2d(Conv2dOptions(ch, cfg.num_classes, 1)));
  upsample_ = register_module("upsample", up);

  freeze_encoder();
}

void TeacherImpl::freeze_encoder() {
  for (auto& named : patchify_->named_parameters()) {
    named.value().set_requires_grad(false);
    frozen_names_.push_back("patchify." + named.key());
  }
  for (auto& named : enc_stages_->named_parameters()) {
    named.value().set_requires_grad(false);
    frozen_names_.push_back("enc_stages." + named.key());
  }
}

TeacherEmbedding TeacherImpl::encode(const torch::Tensor& x) {
  TORCH_CHECK(x.dim() == 3 || x.dim() == 4, "teacher encode expects [C,H,W] or [B,C,H,W]");
  auto xb = x.dim() == 3 ? x.unsqueeze(0) : x;
  TORCH_CHECK(xb.size(-2) % cfg.stride == 0 && xb.size(-1) % cfg.stride == 0,
              "input not divisible by teacher stride ", cfg.stride);
  auto h = patchify_->forward(xb);
  h = enc_adapters_[0]->as<ConvAdapterImpl>()->forward(h);
  h = enc_stages_[0]->as<ConvStageImpl>()->forward(h);
  h = enc_adapters_[1]->as<ConvAdapterImpl>()->forward(h);
  h = enc_stages_[1]->as<ConvStageImpl>()->forward(h);
  h = enc_adapters_[2]->as<ConvAdapterImpl>()->forward(h);
  return TeacherEmbedding{h};
}

std::pair<LogitMap, ProbabilityMap> TeacherImpl::decode(const TeacherEmbedding& z,
                                                        const PromptEmbedding& prompts,
                                                        const ProbabilityMap& mask_prompt) {
  TORCH_CHECK(prompts.dim() == cfg.embed_dim, "prompt dim L=", prompts.dim(),
              " must equal embed dim D=", cfg.embed_dim);
  TORCH_CHECK(prompts.p.size(0) == z.batch(), "prompt batch != embedding batch");
  const int64_t hp = z.z.size(2), wp = z.z.size(3);

  auto mask = mask_prompt.probs.detach();  // teacher losses must not reach the prompt source
  if (mask.dim() == 3) mask = mask.unsqueeze(0);
  TORCH_CHECK(mask.size(0) == z.batch() && mask.size(1) == cfg.num_classes,
              "mask prompt batch/classes mismatch");
  TORCH_CHECK(mask.size(2) == hp * cfg.stride && mask.size(3) == wp * cfg.stride,
              "mask prompt ", mask.size(2), "x", mask.size(3),
              " does not downsample to the embedding grid ", hp, "x", wp);
  const auto mask_small = torch::adaptive_avg_pool2d(mask, {hp, wp});

  auto x2d = z.z + mask_proj_(mask_small);
  auto tokens = x2d.flatten(2).transpose(1, 2);  // [B,H'W',D]
  for (auto& layer : *dec_layers_) {
    tokens = layer->as<CrossAttnLayerImpl>()->forward(tokens, prompts.p);
  }
  auto feat = tokens.transpose(1, 2).reshape({z.batch(), cfg.embed_dim, hp, wp});
  auto logits = upsample_->forward(feat);
  if (mask_prompt.probs.dim() == 3) logits = logits.squeeze(0);
  auto lm = LogitMap::make(logits);
  auto pm = ProbabilityMap::make(logits.softmax(-3));
  return {std::move(lm), std::move(pm)};
}

std::pair<LogitMap, ProbabilityMap> TeacherImpl::decode_unconditional(const TeacherEmbedding& z) {
  const auto opts = z.z.options();
  auto zero_prompts = PromptEmbedding::make(
      torch::zeros({z.batch(), cfg.num_prompts, cfg.embed_dim}, opts));
  auto uniform = ProbabilityMap::make(
      torch::full({z.batch(), cfg.num_classes, z.z.size(2) * cfg.stride, z.z.size(3) * cfg.stride},
                  1.0 / static_cast<double>(cfg.num_classes), opts));
  return decode(z, zero_prompts, uniform);
}

std::vector<torch::Tensor> TeacherImpl::trainable_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& p : parameters()) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

nlohmann::json TeacherImpl::sidecar() const {
  nlohmann::json j;
  j["variant"] = cfg.variant;
  j["embed_dim"] = cfg.embed_dim;
  j["stride"] = cfg.stride;
  j["num_prompts"] = cfg.num_prompts;
  j["prompt_dim"] = cfg.embed_dim;
  j["num_classes"] = cfg.num_classes;
  j["decoder_layers"] = cfg.decoder_layers;
  j["frozen"] = frozen_names_;
  return j;
}

Teacher make_teacher(const TeacherConfig& cfg) { return Teacher(cfg); }

torch::Tensor sam_loss(const ProbabilityMap& y_s, const LabelMask& y) {
  return seg_loss(y_s, y);
}

}  // namespace knowsam
