#include "knowsam/train/trainer.hpp"

#include <cmath>
#include <fstream>

#include "knowsam/distill/distill.hpp"
#include "knowsam/train/synthetic.hpp"
#include "knowsam/ugda/ugda.hpp"

namespace knowsam {
namespace {

std::vector<torch::Tensor> subnet_side_parameters(const TrainState& s) {
  auto params = s.subnet_a->parameters();
  for (auto& p : s.subnet_b->parameters()) params.push_back(p);
  for (auto& p : s.ham->parameters()) params.push_back(p);
  return params;
}

std::vector<torch::Tensor> teacher_side_parameters(const TrainState& s) {
  auto params = s.teacher->trainable_parameters();
  for (auto& p : s.prompt_decoder->parameters()) params.push_back(p);
  return params;
}

void set_sgd_lr(torch::optim::SGD& opt, double lr) {
  for (auto& group : opt.param_groups()) {
    static_cast<torch::optim::SGDOptions&>(group.options()).lr(lr);
  }
}

ProbabilityMap slice_front(const ProbabilityMap& p, int64_t n) {
  return ProbabilityMap::make(p.probs.narrow(0, 0, n));
}

void check_finite(const LossReport& report) {
  const double vals[] = {report.sup, report.fuse,   report.mutual, report.entropy,
                         report.kd,  report.sam,    report.mix,    report.total};
  for (const double v : vals) {
    if (!std::isfinite(v)) {
      throw TrainingHalted("non-finite loss at iteration " + std::to_string(report.iteration) +
                               ": " + report.csv_row(),
                           report);
    }
  }
}

}  // namespace

bool TrainState::uses_unlabeled() const {
  const auto& t = config.toggles;
  return t.use_ugda || t.use_sam_distill || t.use_entropy_loss || t.use_mutual_loss;
}

void TrainState::set_train_mode(bool train) {
  subnet_a->train(train);
  subnet_b->train(train);
  ham->train(train);
  if (teacher) teacher->train(train);
  if (prompt_decoder) prompt_decoder->train(train);
}

TrainState make_train_state(const ExperimentConfig& config, std::optional<DatasetSplit> dataset) {
  config.validate();
  if (config.deterministic) at::set_num_threads(1);
  torch::manual_seed(config.seed);

  TrainState s;
  s.config = config;
  if (dataset.has_value()) {
    s.data = std::move(*dataset);
  } else if (!config.dataset_root.empty()) {
    s.data = load_dataset_dir(config.dataset_root);
  } else {
    auto spec = config.synthetic;
    spec.size = config.image_size;
    s.data = generate_synthetic_dataset(spec, config.labeled_fraction, config.seed);
  }

  SubnetConfig base{SubnetVariant::kSkipConcat, config.in_channels, config.num_classes,
                    config.subnets.base_width, config.subnets.depth};
  s.subnet_a = make_subnet(base);
  base.variant = SubnetVariant::kResidual;
  s.subnet_b = make_subnet(base);
  s.ham = Ham(config.num_classes, config.subnets.base_width, config.toggles.ham_view_entropy,
              config.toggles.ham_view_dissim);

  TeacherConfig tc;
  tc.in_channels = config.in_channels;
  tc.num_classes = config.num_classes;
  tc.embed_dim = config.teacher.embed_dim;
  tc.stride = config.teacher.stride;
  tc.num_prompts = config.teacher.num_prompts;
  tc.decoder_layers = config.teacher.decoder_layers;
  s.teacher = make_teacher(tc);
  s.prompt_decoder = PromptDecoder(tc.embed_dim, tc.num_prompts);

  s.subnet_opt = std::make_unique<torch::optim::SGD>(
      subnet_side_parameters(s), torch::optim::SGDOptions(config.optim.sgd_lr)
                                     .momentum(config.optim.sgd_momentum)
                                     .weight_decay(config.optim.sgd_weight_decay));
  s.teacher_opt = std::make_unique<torch::optim::Adam>(
      teacher_side_parameters(s), torch::optim::AdamOptions(config.optim.adam_lr));

  s.batch_rng.seed(config.seed * 0x9e3779b97f4a7c15ull + 1);
  s.augment_rng.seed(config.seed * 0xbf58476d1ce4e5b9ull + 2);
  return s;
}

TrainBatch next_batch(TrainState& state) {
  const auto& cfg = state.config;
  const int64_t bs = cfg.schedule.batch_size;
  const bool semi = state.uses_unlabeled() && state.data.unlabeled_count() > 0;
  const int64_t n_lab = semi ? std::max<int64_t>(1, bs / 2) : bs;
  const int64_t n_unl = semi ? bs - n_lab : 0;
  const bool augment = cfg.toggles.use_ugda;

  TrainBatch batch;
  std::vector<torch::Tensor> lx, ly, ux;
  for (int64_t i = 0; i < n_lab; ++i) {
    const auto& src = state.data.labeled()[state.batch_rng() % state.data.labeled_count()];
    LabeledSample sample = src;
    if (augment) {
      auto [img, msk] = weak_augment(src.image, src.mask, state.augment_rng(), cfg.augment);
      sample = {std::move(img), std::move(msk)};
    }
    lx.push_back(sample.image.pixels);
    ly.push_back(sample.mask.classes);
    batch.labeled.push_back(std::move(sample));
  }
  for (int64_t i = 0; i < n_unl; ++i) {
    const auto& src = state.data.unlabeled()[state.batch_rng() % state.data.unlabeled_count()];
    Image img = augment ? strong_augment(src, state.augment_rng(), cfg.augment).image : src;
    ux.push_back(img.pixels);
    batch.unlabeled.push_back(std::move(img));
  }
  batch.labeled_x = torch::stack(lx);
  batch.labeled_y = torch::stack(ly);
  if (!ux.empty()) batch.unlabeled_x = torch::stack(ux);
  return batch;
}

LossReport train_step(TrainState& state, const TrainBatch& batch) {
  const auto& cfg = state.config;
  const auto& tgl = cfg.toggles;
  state.set_train_mode(true);

  const int64_t n_lab = batch.labeled_x.size(0);
  const int64_t n_unl = batch.unlabeled_x.defined() ? batch.unlabeled_x.size(0) : 0;
  auto x_all = n_unl > 0 ? torch::cat({batch.labeled_x, batch.unlabeled_x}) : batch.labeled_x;
  const auto y_lab = LabelMask::make(batch.labeled_y, cfg.num_classes);

  auto [logits_a, p_a] = subnet_forward(*state.subnet_a, x_all);
  auto [logits_b, p_b] = subnet_forward(*state.subnet_b, x_all);
  const auto bundle = make_uncertainty_bundle(p_a, p_b);
  auto y_f = state.ham->forward(bundle, p_a, p_b);

  LossTerms terms;
  terms.fuse = fuse_loss(slice_front(y_f, n_lab), y_lab);
  terms.sup = seg_loss(slice_front(p_a, n_lab), y_lab) +
              seg_loss(slice_front(p_b, n_lab), y_lab) + terms.fuse;
  if (tgl.use_entropy_loss) terms.entropy = entropy_loss(p_a, p_b);
  if (tgl.use_mutual_loss) terms.mutual = mutual_loss(p_a, p_b);

  ProbabilityMap teacher_probs;  // defined only when the teacher runs
  if (tgl.use_sam_distill) {
    const auto z = state.teacher->encode(x_all);
    const auto prompts = state.prompt_decoder->forward(z);
    auto [logits_s, p_s] = state.teacher->decode(z, prompts, y_f);
    terms.sam = sam_loss(slice_front(p_s, n_lab), y_lab);
    const double T = cfg.schedule.temperature;
    terms.kd = kd_loss(temp_softmax(logits_a, T), temp_softmax(logits_b, T),
                       temp_softmax(logits_s, T), cfg.distill.t_squared_scale);
    teacher_probs = std::move(p_s);
  }

  if (tgl.use_ugda && n_unl > 0) {
    const auto pseudo_src =
        (tgl.use_sam_distill ? teacher_probs.probs : y_f.probs).detach();
    const auto uncertainty = entropy_map(y_f).detach();
    std::vector<torch::Tensor> mx, my;
    for (int64_t i = 0; i < n_lab; ++i) {
      const int64_t u = i % n_unl;
      const auto grid = patch_uncertainty(uncertainty[n_lab + u]);
      const auto patches = select_topk_patches(grid, cfg.augment.paste_topk);
      const auto pseudo = LabelMask::make(pseudo_src[n_lab + u].argmax(0), cfg.num_classes);
      const auto dir = (cfg.augment.bidirectional_paste && (i % 2 == 1))
                           ? PasteDirection::kUnlabeledToLabeled
                           : PasteDirection::kLabeledToUnlabeled;
      auto mixed = copy_paste_mix(batch.labeled[i], batch.unlabeled[u], pseudo, patches, dir);
      mx.push_back(mixed.image.pixels);
      my.push_back(mixed.target.classes);
    }
    const auto mix_x = torch::stack(mx);
    const auto mix_y = LabelMask::make(torch::stack(my), cfg.num_classes);
    auto [la_m, pa_m] = subnet_forward(*state.subnet_a, mix_x);
    auto [lb_m, pb_m] = subnet_forward(*state.subnet_b, mix_x);
    terms.mix = seg_loss(pa_m, mix_y) + seg_loss(pb_m, mix_y);
  }

  auto [total, report] = total_loss(terms, cfg.schedule, tgl, state.iteration);
  check_finite(report);

  state.subnet_opt->zero_grad();
  state.teacher_opt->zero_grad();
  auto objective = tgl.use_sam_distill ? total + terms.sam.to(torch::kDouble) : total;
  objective.backward();

  // poly schedule on the subnet side
  const double frac = std::min(1.0, static_cast<double>(state.iteration) /
                                        static_cast<double>(cfg.schedule.t_max));
  set_sgd_lr(*state.subnet_opt, cfg.optim.sgd_lr * std::pow(1.0 - frac, cfg.optim.poly_power));
  state.subnet_opt->step();
  if (tgl.use_sam_distill) state.teacher_opt->step();

  state.iteration += 1;
  return report;
}

std::pair<LabelMask, ProbabilityMap> infer(TrainState& state, const Image& image) {
  torch::NoGradGuard no_grad;
  state.set_train_mode(false);
  const auto x = image.pixels.unsqueeze(0);
  auto [la, pa] = subnet_forward(*state.subnet_a, x);
  auto [lb, pb] = subnet_forward(*state.subnet_b, x);
  const auto bundle = make_uncertainty_bundle(pa, pb);
  auto y_f = state.ham->forward(bundle, pa, pb);
  auto probs = ProbabilityMap::make(y_f.probs.squeeze(0));
  auto mask = LabelMask::make(probs.probs.argmax(0), state.config.num_classes);
  return {std::move(mask), std::move(probs)};
}

MetricReport evaluate_sample(TrainState& state, const Image& image, const LabelMask& gt) {
  auto [pred, probs] = infer(state, image);
  return evaluate_pair(pred, gt);
}

std::vector<MetricReport> evaluate_set(TrainState& state,
                                       const std::vector<LabeledSample>& set) {
  std::vector<MetricReport> out;
  out.reserve(set.size());
  for (const auto& s : set) out.push_back(evaluate_sample(state, s.image, s.mask));
  return out;
}

std::vector<LabeledSample> make_synthetic_test_set(const ExperimentConfig& config,
                                                   int64_t count) {
  auto spec = config.synthetic;
  spec.size = config.image_size;
  spec.count = count;
  // fully labeled split on an independent seed stream
  auto split = generate_synthetic_dataset(spec, 1.0, config.seed + 0x5eedu + 7777);
  return split.labeled();
}

RunResult run_training(const ExperimentConfig& config, const std::filesystem::path& run_dir,
                       std::optional<DatasetSplit> train_set,
                       const std::vector<LabeledSample>* test_set) {
  std::filesystem::create_directories(run_dir);
  auto state = make_train_state(config, std::move(train_set));

  std::ofstream csv(run_dir / "losses.csv");
  csv << LossReport::csv_header() << "\n";
  for (int64_t t = 0; t < config.iterations; ++t) {
    auto batch = next_batch(state);
    const auto report = train_step(state, batch);
    csv << report.csv_row() << "\n";
  }
  csv.close();

  std::vector<LabeledSample> local_test;
  if (!test_set) {
    local_test = make_synthetic_test_set(config, std::min<int64_t>(64, config.synthetic.count));
    test_set = &local_test;
  }
  const auto reports = evaluate_set(state, *test_set);
  auto aggregate = aggregate_reports(reports);

  save_checkpoint(state, run_dir);
  {
    std::ofstream mf(run_dir / "metrics.json");
    mf << aggregate.dump(2) << "\n";
    std::ofstream pc(run_dir / "per_sample.csv");
    pc << "index,dice,iou,hd95,asd\n";
    for (size_t i = 0; i < reports.size(); ++i) {
      pc << i << ',' << reports[i].mean_dice() << ',' << reports[i].mean_iou() << ','
         << reports[i].mean_hd95() << ',' << reports[i].mean_asd() << "\n";
    }
  }

  RunResult result;
  result.run_dir = run_dir;
  result.metrics = aggregate;
  result.mean_dice = aggregate["dice"]["mean"].get<double>();
  return result;
}

}  // namespace knowsam
