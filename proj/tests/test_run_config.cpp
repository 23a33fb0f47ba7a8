#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "segstream/run_config.hpp"

using namespace segstream;

namespace {

std::filesystem::path write_config(const std::string& name, const std::string& text) {
  auto dir = std::filesystem::temp_directory_path() / "segstream_config_test";
  std::filesystem::create_directories(dir);
  auto path = dir / name;
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("defaults run the reference experiment") {
  RunConfig c;
  CHECK(c.mode == TrainMode::full_utterance);
  CHECK(c.batch_size == 16);
  CHECK(c.total_steps == 3000);
  auto model = c.resolved_model();
  CHECK(model.input_dim == c.task.feature_dim());
  CHECK(model.vocab_size == c.task.vocab_size());
}

TEST_CASE("values parse and override defaults") {
  auto path = write_config("good.cfg",
                           "# comment\n"
                           "[model]\n"
                           "encoder_units = 32\n"
                           "\n"
                           "[train]\n"
                           "mode = segmented\n"
                           "peak_lr = 0.001\n"
                           "augment = true\n"
                           "[task]\n"
                           "noise_std = 0.1  # trailing comment\n");
  auto c = load_run_config(path);
  CHECK(c.model.encoder_units == 32);
  CHECK(c.mode == TrainMode::segmented);
  CHECK(c.schedule.peak_lr == doctest::Approx(1e-3));
  CHECK(c.augment_enabled);
  CHECK(c.task.noise_std == doctest::Approx(0.1));
  // Untouched fields keep defaults.
  CHECK(c.model.prediction_units == 64);
}

TEST_CASE("unknown keys and sections are hard errors") {
  auto bad_key = write_config("bad_key.cfg", "[train]\nbatch_sze = 4\n");
  CHECK_THROWS_WITH_AS(load_run_config(bad_key), doctest::Contains("unknown key"),
                       std::runtime_error);

  auto bad_section = write_config("bad_section.cfg", "[trian]\nbatch_size = 4\n");
  CHECK_THROWS_WITH_AS(load_run_config(bad_section), doctest::Contains("unknown section"),
                       std::runtime_error);

  auto no_section = write_config("no_section.cfg", "batch_size = 4\n");
  CHECK_THROWS_AS(load_run_config(no_section), std::runtime_error);

  auto bad_value = write_config("bad_value.cfg", "[train]\nbatch_size = four\n");
  CHECK_THROWS_AS(load_run_config(bad_value), std::runtime_error);

  auto bad_mode = write_config("bad_mode.cfg", "[train]\nmode = both\n");
  CHECK_THROWS_WITH_AS(load_run_config(bad_mode), doctest::Contains("mode"),
                       std::runtime_error);
}

TEST_CASE("dump round-trips through the parser") {
  RunConfig c;
  c.model.encoder_units = 24;
  c.mode = TrainMode::segmented;
  c.schedule.decay_rate = 0.99;
  c.task.n_symbols = 6;
  c.n_utterances = 77;
  auto path = write_config("dump.cfg", dump_run_config(c));
  auto loaded = load_run_config(path);
  CHECK(loaded.model.encoder_units == 24);
  CHECK(loaded.mode == TrainMode::segmented);
  CHECK(loaded.schedule.decay_rate == doctest::Approx(0.99));
  CHECK(loaded.task.n_symbols == 6);
  CHECK(loaded.n_utterances == 77);
}
