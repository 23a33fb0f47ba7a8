#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "segstream/decode.hpp"
#include "segstream/rng.hpp"
#include "segstream/rnnt_loss.hpp"

using namespace segstream;

namespace {

ModelConfig tiny_config(int vocab = 4) {
  ModelConfig c;
  c.input_dim = 3;
  c.encoder_layers = 1;
  c.encoder_units = 4;
  c.prediction_layers = 1;
  c.prediction_units = 4;
  c.joint_units = 4;
  c.vocab_size = vocab;
  return c;
}

MatrixD random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  MatrixD m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, scale);
  return m;
}

// Exhaustive rescoring: every label sequence up to max_len, scored by the
// full lattice likelihood through the same model. Oracle for beam top-1.
std::pair<std::vector<int>, double> exhaustive_best(const ModelParams<double>& params,
                                                    const MatrixD& h_slice, int max_len) {
  std::vector<int> best_labels;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<int> current;
  std::function<void()> visit = [&] {
    auto pred = predict_labels(params, current);
    auto jnt = joint(params, h_slice, pred.outputs());
    const double score = -rnnt_loss<double>(jnt.logits, current).loss;
    if (score > best_score || (score == best_score && current < best_labels)) {
      best_score = score;
      best_labels = current;
    }
    if (static_cast<int>(current.size()) == max_len) return;
    for (int k = 1; k < params.config.vocab_size; ++k) {
      current.push_back(k);
      visit();
      current.pop_back();
    }
  };
  visit();
  return {best_labels, best_score};
}

}  // namespace

TEST_CASE("prediction_step matches predict_labels row by row") {
  auto params = init_params<double>(tiny_config(), 3);
  std::vector<int> labels = {1, 3, 2};
  auto batch = predict_labels(params, labels).outputs().eval();

  // The streaming path evaluates the same recurrence with a different
  // summation order than the batched GEMM, so compare to round-off.
  std::vector<LstmState<double>> states;
  VectorD g = prediction_step(params, kBlankId, states);
  CHECK((g.transpose() - batch.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  for (size_t j = 0; j < labels.size(); ++j) {
    g = prediction_step(params, labels[j], states);
    CHECK((g.transpose() - batch.row(static_cast<int>(j) + 1)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("greedy with an all-blank model emits nothing") {
  auto params = ModelParams<double>::zeros(tiny_config());
  Rng rng(1);
  auto h = random_matrix(5, 4, rng);
  CHECK(greedy_decode(params, h).empty());
}

TEST_CASE("greedy output never contains blank") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto params = init_params<double>(tiny_config(), rng.next_u64());
    auto h = random_matrix(6, 4, rng, 2.0);
    for (int y : greedy_decode(params, h)) CHECK(y != kBlankId);
  }
}

TEST_CASE("beam width 1 equals greedy") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto params = init_params<double>(tiny_config(), rng.next_u64());
    auto h = random_matrix(5, 4, rng, 1.5);
    auto hyps = beam_decode(params, h, 1);
    REQUIRE(hyps.size() == 1);
    CHECK(hyps[0].labels == greedy_decode(params, h));
  }
}

TEST_CASE("wider beams never lower the top score") {
  Rng rng(4);
  for (int trial = 0; trial < 15; ++trial) {
    auto params = init_params<double>(tiny_config(), rng.next_u64());
    auto h = random_matrix(4, 4, rng);
    double prev = -std::numeric_limits<double>::infinity();
    for (int width : {1, 2, 4, 8, 16}) {
      const auto hyps = beam_decode(params, h, width);
      REQUIRE(!hyps.empty());
      CHECK(hyps[0].log_score >= prev - 1e-12);
      prev = hyps[0].log_score;
    }
  }
}

TEST_CASE("beam top-1 equals the exhaustive rescoring argmax on tiny instances") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    auto config = tiny_config(static_cast<int>(rng.uniform_int(2, 4)));
    auto params = init_params<double>(config, rng.next_u64());
    const int n_frames = static_cast<int>(rng.uniform_int(1, 3));
    auto h = random_matrix(n_frames, config.encoder_units, rng);

    auto [oracle_labels, oracle_score] = exhaustive_best(params, h, 5);
    auto hyps = beam_decode(params, h, 1024, 1);
    REQUIRE(!hyps.empty());
    CHECK(hyps[0].labels == oracle_labels);
    CHECK(hyps[0].log_score == doctest::Approx(oracle_score).epsilon(1e-9));
  }
}

TEST_CASE("decode_utterance: slices, independence and causality") {
  ContextCueSpec spec;
  spec.prefix_len_min = 4;
  spec.prefix_len_max = 6;
  spec.segment_syms_min = 2;
  spec.segment_syms_max = 2;
  spec.rng_seed = 6;
  auto records = generate_context_task(spec, 1);
  auto& record = records[0];

  ModelConfig config = tiny_config(spec.vocab_size());
  config.input_dim = spec.feature_dim();
  auto params = init_params<float>(config, 99);

  // Full-span single segment equals decoding the segment features alone.
  UtteranceRecord whole = record;
  SegmentRecord span;
  span.t_start = 0;
  span.t_end = whole.n_frames() - 1;
  span.labels = *record.segments[1].labels;
  whole.segments = {span};
  auto via_utt = decode_utterance(params, whole, 4);
  auto h = encode(params, MatrixF(whole.features).cast<float>().eval());
  auto direct = beam_decode(params, h.outputs().eval(), 4);
  REQUIRE(via_utt.size() == 1);
  CHECK(via_utt[0].labels == direct[0].labels);

  // Later frames cannot influence an earlier segment's decode.
  UtteranceRecord longer = record;
  const int old_rows = longer.n_frames();
  longer.features.conservativeResize(old_rows + 10, longer.features.cols());
  longer.features.bottomRows(10).setRandom();
  SegmentRecord tail;
  tail.t_start = old_rows;
  tail.t_end = old_rows + 9;
  tail.labels = std::vector<int>{1};
  longer.segments.push_back(tail);

  auto base = decode_utterance(params, record, 4, TrainMode::full_utterance, {1});
  auto with_tail = decode_utterance(params, longer, 4, TrainMode::full_utterance, {1});
  CHECK(base[0].labels == with_tail[0].labels);
  CHECK(base[0].log_score == with_tail[0].log_score);
}

TEST_CASE("edit distance unit costs") {
  auto same = edit_distance({1, 2, 3}, {1, 2, 3});
  CHECK(same.total() == 0);

  auto del = edit_distance({1, 2, 3}, {1, 3});
  CHECK(del.deletions == 1);
  CHECK(del.total() == 1);

  auto swap2 = edit_distance({1, 2}, {2, 1});
  CHECK(swap2.total() == 2);

  auto ins_only = edit_distance({}, {4, 5});
  CHECK(ins_only.insertions == 2);
  CHECK(ins_only.total() == 2);

  auto flags = align_errors({1, 2, 3}, {1, 9, 3});
  REQUIRE(flags.size() == 3);
  CHECK(!flags[0]);
  CHECK(flags[1]);
  CHECK(!flags[2]);
}

TEST_CASE("compare_systems: identical systems and exact halving") {
  ContextCueSpec spec;
  spec.prefix_len_min = 4;
  spec.prefix_len_max = 4;
  spec.segment_syms_min = 4;
  spec.segment_syms_max = 4;
  spec.rng_seed = 12;
  auto records = generate_context_task(spec, 4);
  records[0].conditions = {"clean"};
  records[1].conditions = {"clean"};
  records[2].conditions = {"background_speech"};
  records[3].conditions = {"background_speech"};

  // Fabricated hypotheses: baseline gets 2 errors per utterance, the new
  // system 1; identical systems first.
  auto fabricate = [&](int wrong_tokens) {
    std::vector<SegmentDecode> results;
    for (const auto& r : records) {
      SegmentDecode d;
      d.utt_id = r.id;
      d.segment_index = 1;
      d.labels = *r.segments[1].labels;
      for (int k = 0; k < wrong_tokens; ++k) {
        d.labels[k] = d.labels[k] == 1 ? 2 : 1;  // force substitution errors
      }
      results.push_back(d);
    }
    return results;
  };

  auto base = fabricate(2);
  auto identical = compare_systems(records, base, base);
  CHECK(identical.overall.nwer_base == doctest::Approx(1.0));
  CHECK(identical.overall.werr == doctest::Approx(0.0));
  for (const auto& row : identical.rows) CHECK(row.werr == doctest::Approx(0.0));

  auto halved = compare_systems(records, base, fabricate(1));
  CHECK(halved.overall.werr == doctest::Approx(0.5));
  CHECK(halved.overall.nwer_new == doctest::Approx(0.5));

  std::ostringstream os;
  print_eval_report(os, halved);
  CHECK(os.str().find("row condition=overall") != std::string::npos);
  CHECK(os.str().find("clean") != std::string::npos);
}
