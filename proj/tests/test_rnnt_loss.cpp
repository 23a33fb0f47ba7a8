#include <cmath>
#include <vector>

#include "doctest.h"
#include "segstream/rng.hpp"
#include "segstream/rnnt_loss.hpp"

using namespace segstream;

namespace {

Tensor3<double> random_logits(int n_frames, int n_pos, int vocab, Rng& rng, double scale = 1.0) {
  Tensor3<double> z(n_frames, n_pos, vocab);
  for (auto& x : z.data) x = rng.normal(0.0, scale);
  return z;
}

std::vector<int> random_labels(int n_labels, int vocab, Rng& rng) {
  std::vector<int> y(n_labels);
  for (auto& v : y) v = static_cast<int>(rng.uniform_int(1, vocab - 1));
  return y;
}

// Closed form for uniform logits: all V^(T+U) per-transition factors are 1/V
// and there are C(T+U-1, U) monotonic paths.
double uniform_logits_loss(int n_frames, int n_labels, int vocab) {
  double log_paths = std::lgamma(n_frames + n_labels) - std::lgamma(n_labels + 1) -
                     std::lgamma(n_frames);
  return -(log_paths - (n_frames + n_labels) * std::log(static_cast<double>(vocab)));
}

}  // namespace

TEST_CASE("single blank emission under uniform softmax") {
  Tensor3<double> logits(1, 1, 3);
  auto res = rnnt_loss<double>(logits, {});
  CHECK(res.loss == doctest::Approx(-std::log(1.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("two-frame one-label uniform instance matches the path count") {
  Tensor3<double> logits(2, 2, 3);
  std::vector<int> labels = {1};
  auto res = rnnt_loss<double>(logits, labels);
  CHECK(res.loss == doctest::Approx(-std::log(2.0 / 27.0)).epsilon(1e-12));
  CHECK(rnnt_loss_bruteforce<double>(logits, labels) ==
        doctest::Approx(res.loss).epsilon(1e-12));
}

TEST_CASE("bruteforce on U=0 reduces to the all-blank path") {
  Rng rng(7);
  auto logits = random_logits(5, 1, 4, rng);
  auto lat = rnnt_lattice<double>(logits, {});
  double expected = 0.0;
  for (int t = 0; t < 5; ++t) expected -= lat.log_probs(t, 0, kBlankId);
  CHECK(rnnt_loss_bruteforce<double>(logits, {}) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bruteforce matches the combinatorial closed form on uniform logits") {
  for (int n_frames : {1, 2, 4}) {
    for (int n_labels : {0, 1, 3}) {
      for (int vocab : {2, 5}) {
        if (n_labels > 0 && vocab < 2) continue;
        Tensor3<double> logits(n_frames, n_labels + 1, vocab);
        std::vector<int> labels(n_labels, 1);
        CHECK(rnnt_loss_bruteforce<double>(logits, labels) ==
              doctest::Approx(uniform_logits_loss(n_frames, n_labels, vocab)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("lattice loss agrees with enumeration on random small instances") {
  Rng rng(1234);
  for (int trial = 0; trial < 500; ++trial) {
    int n_frames = static_cast<int>(rng.uniform_int(1, 5));
    int n_labels = static_cast<int>(rng.uniform_int(0, 4));
    int vocab = static_cast<int>(rng.uniform_int(2, 5));
    auto logits = random_logits(n_frames, n_labels + 1, vocab, rng, 2.0);
    auto labels = random_labels(n_labels, vocab, rng);
    double lattice = rnnt_loss<double>(logits, labels).loss;
    double brute = rnnt_loss_bruteforce<double>(logits, labels);
    CHECK(std::abs(lattice - brute) < 1e-10);
  }
}

TEST_CASE("alpha/beta cuts all reproduce the total log-likelihood") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    int n_frames = static_cast<int>(rng.uniform_int(2, 6));
    int n_labels = static_cast<int>(rng.uniform_int(1, 4));
    int vocab = static_cast<int>(rng.uniform_int(2, 6));
    auto logits = random_logits(n_frames, n_labels + 1, vocab, rng);
    auto labels = random_labels(n_labels, vocab, rng);
    auto lat = rnnt_lattice<double>(logits, labels);

    // Summing alpha(t,u) + beta(t,u) over any anti-diagonal t + u = c covers
    // every path exactly once.
    for (int cut = 0; cut <= (n_frames - 1) + n_labels; ++cut) {
      double acc = neg_inf<double>();
      for (int u = 0; u <= n_labels; ++u) {
        int t = cut - u;
        if (t < 0 || t >= n_frames) continue;
        acc = log_add_exp(acc, lat.alpha(t, u) + lat.beta(t, u));
      }
      CHECK(std::abs(acc - lat.log_like) < 1e-8);
    }
  }
}

TEST_CASE("empty label sequence is legal and all-blank") {
  Rng rng(3);
  auto logits = random_logits(4, 1, 3, rng);
  CHECK_NOTHROW(rnnt_loss<double>(logits, {}));
}

TEST_CASE("impossible label blows the loss up") {
  Tensor3<double> logits(3, 2, 4);
  // Label 2 forced to ~zero probability everywhere.
  for (int t = 0; t < 3; ++t)
    for (int u = 0; u < 2; ++u) logits(t, u, 2) = -1e9;
  std::vector<int> labels = {2};
  CHECK(rnnt_loss<double>(logits, labels).loss > 100.0);
}

TEST_CASE("gradient rows sum to zero and match finite differences") {
  auto report = loss_grad_check(4, 3, 4, 2024);
  CHECK(report.max_rel_err < 1e-6);
  CHECK(report.max_row_sum < 1e-10);

  // Zero-logit instance.
  auto zero_report = loss_grad_check(1, 0, 3, 0);
  CHECK(zero_report.max_rel_err < 1e-6);

  // Deterministic given the seed.
  auto again = loss_grad_check(4, 3, 4, 2024);
  CHECK(report.max_rel_err == again.max_rel_err);
  CHECK(report.max_row_sum == again.max_row_sum);
}

TEST_CASE("input validation") {
  Tensor3<double> logits(2, 2, 3);
  std::vector<int> blank_label = {0};
  CHECK_THROWS_AS(rnnt_loss<double>(logits, blank_label), std::invalid_argument);
  std::vector<int> oob_label = {3};
  CHECK_THROWS_AS(rnnt_loss<double>(logits, oob_label), std::invalid_argument);
  std::vector<int> mismatch = {1, 2};
  CHECK_THROWS_AS(rnnt_loss<double>(logits, mismatch), std::invalid_argument);

  Tensor3<double> big(10, 4, 3);
  std::vector<int> three = {1, 1, 1};
  CHECK_THROWS_AS(rnnt_loss_bruteforce<double>(big, three), std::invalid_argument);
}
