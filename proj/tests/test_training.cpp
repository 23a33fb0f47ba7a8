#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "segstream/dataset.hpp"
#include "segstream/training.hpp"

using namespace segstream;

namespace {

std::filesystem::path work_dir(const std::string& leaf) {
  auto dir = std::filesystem::temp_directory_path() / "segstream_training_test" / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ModelConfig task_config(const ContextCueSpec& spec) {
  ModelConfig c;
  c.input_dim = spec.feature_dim();
  c.encoder_layers = 1;
  c.encoder_units = 8;
  c.prediction_layers = 1;
  c.prediction_units = 8;
  c.joint_units = 8;
  c.vocab_size = spec.vocab_size();
  return c;
}

ContextCueSpec small_task() {
  ContextCueSpec spec;
  spec.prefix_len_min = 5;
  spec.prefix_len_max = 10;
  spec.segment_syms_min = 2;
  spec.segment_syms_max = 4;
  spec.rng_seed = 7;
  return spec;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST_CASE("learning rate schedule piecewise values") {
  LrSchedule s;
  s.peak_lr = 1e-3;
  s.warmup_steps = 10;
  s.hold_steps = 5;
  s.decay_rate = 0.999;
  CHECK(s.lr(5) == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(s.lr(10) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(s.lr(12) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(s.lr(15) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(s.lr(20) == doctest::Approx(1e-3 * std::pow(0.999, 5)).epsilon(1e-12));
}

TEST_CASE("adam: zero gradients leave parameters untouched") {
  ModelConfig config;
  config.input_dim = 3;
  config.encoder_units = 4;
  config.prediction_units = 4;
  config.joint_units = 4;
  config.vocab_size = 3;
  auto state = make_train_state(config, 9);
  auto before = state.params;
  auto zero = ModelParams<float>::zeros(config);
  LrSchedule sched;
  adam_step(state, zero, sched);
  CHECK(state.step == 1);
  bool unchanged = true;
  state.params.for_each_tensor([&](const std::string& name, const auto& ta) {
    before.for_each_tensor([&](const std::string& nb, const auto& tb) {
      if (nb != name) return;
      if ((ta - tb).cwiseAbs().maxCoeff() != 0.0f) unchanged = false;
    });
  });
  CHECK(unchanged);
}

TEST_CASE("adam: unit gradient first step moves everything by ~lr(1)") {
  ModelConfig config;
  config.input_dim = 2;
  config.encoder_units = 2;
  config.prediction_units = 2;
  config.joint_units = 2;
  config.vocab_size = 2;
  auto state = make_train_state(config, 4);
  auto before = state.params;
  auto ones = ModelParams<float>::zeros(config);
  ones.for_each_tensor([](const std::string&, auto& t) { t.setConstant(1.0f); });
  LrSchedule sched;
  sched.peak_lr = 1e-2;
  sched.warmup_steps = 0;
  adam_step(state, ones, sched);
  state.params.for_each_tensor([&](const std::string& name, const auto& ta) {
    before.for_each_tensor([&](const std::string& nb, const auto& tb) {
      if (nb != name) return;
      for (Eigen::Index i = 0; i < ta.rows(); ++i) {
        for (Eigen::Index j = 0; j < ta.cols(); ++j) {
          CHECK(std::abs((tb(i, j) - ta(i, j)) - 1e-2f) < 1e-6f);
        }
      }
    });
  });
}

TEST_CASE("adam rejects non-finite gradients naming the tensor") {
  ModelConfig config;
  config.input_dim = 2;
  config.encoder_units = 2;
  config.prediction_units = 2;
  config.joint_units = 2;
  config.vocab_size = 2;
  auto state = make_train_state(config, 4);
  auto bad = ModelParams<float>::zeros(config);
  bad.joint_w(0, 0) = std::numeric_limits<float>::quiet_NaN();
  LrSchedule sched;
  CHECK_THROWS_WITH_AS(adam_step(state, bad, sched), doctest::Contains("joint.w"),
                       std::runtime_error);
}

TEST_CASE("training is deterministic: same seed, bit-identical checkpoints") {
  auto spec = small_task();
  auto records = generate_context_task(spec, 8);
  auto config = task_config(spec);

  TrainOptions options;
  options.mode = TrainMode::full_utterance;
  options.batch_size = 2;
  options.total_steps = 5;
  options.checkpoint_every = 5;
  options.threads = 2;

  LrSchedule sched;
  sched.warmup_steps = 2;
  sched.hold_steps = 2;

  options.checkpoint_dir = work_dir("det_a");
  auto state_a = make_train_state(config, 11);
  auto res_a = train(records, records, state_a, sched, options);

  options.checkpoint_dir = work_dir("det_b");
  auto state_b = make_train_state(config, 11);
  auto res_b = train(records, records, state_b, sched, options);

  REQUIRE(!res_a.checkpoints.empty());
  CHECK(file_bytes(res_a.checkpoints.back().path) == file_bytes(res_b.checkpoints.back().path));

  // Thread count must not change the arithmetic either.
  options.checkpoint_dir = work_dir("det_c");
  options.threads = 1;
  auto state_c = make_train_state(config, 11);
  auto res_c = train(records, records, state_c, sched, options);
  CHECK(file_bytes(res_a.checkpoints.back().path) == file_bytes(res_c.checkpoints.back().path));
}

TEST_CASE("single full-span segment: one step of either mode matches") {
  ContextCueSpec spec = small_task();
  auto base = generate_context_task(spec, 1);
  // Collapse to a single labeled segment spanning all frames.
  UtteranceRecord r = base[0];
  SegmentRecord whole;
  whole.t_start = 0;
  whole.t_end = r.n_frames() - 1;
  whole.labels = *r.segments[1].labels;
  r.segments = {whole};
  r.validate();

  auto config = task_config(spec);
  LrSchedule sched;
  TrainOptions options;
  options.batch_size = 1;
  options.total_steps = 1;
  options.checkpoint_every = 0;
  options.threads = 1;

  options.mode = TrainMode::segmented;
  auto state_seg = make_train_state(config, 3);
  train({r}, {}, state_seg, sched, options);

  options.mode = TrainMode::full_utterance;
  auto state_full = make_train_state(config, 3);
  train({r}, {}, state_full, sched, options);

  double worst = 0.0;
  state_seg.params.for_each_tensor([&](const std::string& name, const auto& ta) {
    state_full.params.for_each_tensor([&](const std::string& nb, const auto& tb) {
      if (nb != name) return;
      worst = std::max(worst, static_cast<double>((ta - tb).cwiseAbs().maxCoeff()));
    });
  });
  CHECK(worst < 1e-10);
}

TEST_CASE("train input validation") {
  auto spec = small_task();
  auto config = task_config(spec);
  auto state = make_train_state(config, 1);
  LrSchedule sched;
  TrainOptions options;
  CHECK_THROWS_AS(train({}, {}, state, sched, options), std::invalid_argument);

  auto records = generate_context_task(spec, 1);
  records[0].segments[1].labels.reset();  // no labeled segment left
  CHECK_THROWS_AS(train(records, {}, state, sched, options), std::invalid_argument);
}

TEST_CASE("dataset_loss is thread-count invariant") {
  auto spec = small_task();
  auto records = generate_context_task(spec, 6);
  auto params = init_params<float>(task_config(spec), 21);
  const double a = dataset_loss(params, records, TrainMode::full_utterance, 1);
  const double b = dataset_loss(params, records, TrainMode::full_utterance, 2);
  CHECK(a == b);
}

TEST_CASE("training with SpecAugment enabled stays deterministic in both modes") {
  auto spec = small_task();
  auto records = generate_context_task(spec, 6);
  auto config = task_config(spec);
  LrSchedule sched;

  TrainOptions options;
  options.batch_size = 2;
  options.total_steps = 3;
  options.checkpoint_every = 0;
  options.threads = 2;
  AugmentPolicy policy;
  policy.n_freq_masks = 1;
  policy.max_freq_width = 2;
  policy.time_mask_rate = 0.02;
  options.augment = policy;

  for (TrainMode mode : {TrainMode::segmented, TrainMode::full_utterance}) {
    options.mode = mode;
    auto state_a = make_train_state(config, 31);
    train(records, {}, state_a, sched, options);
    auto state_b = make_train_state(config, 31);
    train(records, {}, state_b, sched, options);

    bool identical = true;
    state_a.params.for_each_tensor([&](const std::string& name, const auto& ta) {
      state_b.params.for_each_tensor([&](const std::string& nb, const auto& tb) {
        if (nb != name) return;
        if ((ta - tb).cwiseAbs().maxCoeff() != 0.0f) identical = false;
      });
    });
    CHECK(identical);

    // Masking changed the arithmetic relative to the clean run.
    auto clean_opts = options;
    clean_opts.augment.reset();
    auto state_c = make_train_state(config, 31);
    train(records, {}, state_c, sched, clean_opts);
    bool differs = false;
    state_a.params.for_each_tensor([&](const std::string& name, const auto& ta) {
      state_c.params.for_each_tensor([&](const std::string& nb, const auto& tb) {
        if (nb != name) return;
        if ((ta - tb).cwiseAbs().maxCoeff() != 0.0f) differs = true;
      });
    });
    CHECK(differs);
  }
}

TEST_CASE("resume continues from a checkpoint step") {
  auto spec = small_task();
  auto records = generate_context_task(spec, 4);
  auto config = task_config(spec);
  LrSchedule sched;

  TrainOptions options;
  options.batch_size = 2;
  options.total_steps = 3;
  options.checkpoint_every = 3;
  options.checkpoint_dir = work_dir("resume");
  options.threads = 1;

  auto state = make_train_state(config, 13);
  auto first = train(records, records, state, sched, options);
  REQUIRE(!first.checkpoints.empty());

  auto ckpt = load_checkpoint(first.checkpoints.back().path);
  CHECK(ckpt.step == 3);

  TrainState resumed;
  resumed.params = ckpt.params;
  resumed.m = ModelParams<float>::zeros(config);
  resumed.v = ModelParams<float>::zeros(config);
  resumed.step = ckpt.step;
  resumed.seed = 13;
  options.total_steps = 6;
  auto second = train(records, records, resumed, sched, options);
  CHECK(resumed.step == 6);
  CHECK(second.steps_run == 3);
}
