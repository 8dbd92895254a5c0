// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shadowint/align/alignment.hpp"

using namespace shadowint;
using Soft = SoftAlignment<double>;

namespace {

Soft uniform_soft(int n, int m) { return {Eigen::MatrixXd::Constant(n, m, 1.0 / n)}; }

}  // namespace

TEST_CASE("soft_alignment: single source row is all ones") {
  std::mt19937_64 rng(1);
  const auto soft = soft_alignment(oracle::random_matrix(rng, 1, 4), oracle::random_matrix(rng, 6, 4), 1.0);
  CHECK((soft.probs.array() == 1.0).all());
}

TEST_CASE("soft_alignment: orthonormal rows peak on the matching index") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
  const auto soft = soft_alignment(eye, eye, 1.0);
  for (int j = 0; j < 4; ++j) {
    Eigen::Index arg;
    soft.probs.col(j).maxCoeff(&arg);
    CHECK(arg == j);
  }
}

TEST_CASE("soft_alignment: random 4x3 matches a scalar softmax recomputation") {
  std::mt19937_64 rng(7);
  const auto src = oracle::random_matrix(rng, 4, 5);
  const auto trg = oracle::random_matrix(rng, 3, 5);
  const double temperature = 2.5;
  const auto soft = soft_alignment(src, trg, temperature);
  CHECK_NOTHROW(soft.validate(1e-6));
  for (int j = 0; j < 3; ++j) {
    double denom = 0.0;
    std::vector<double> num(4);
    for (int i = 0; i < 4; ++i) {
      double d = 0.0;
      for (int k = 0; k < 5; ++k) d += (src(i, k) - trg(j, k)) * (src(i, k) - trg(j, k));
      num[i] = std::exp(-d / temperature);
      denom += num[i];
    }
    for (int i = 0; i < 4; ++i) CHECK(soft.probs(i, j) == doctest::Approx(num[i] / denom).epsilon(1e-12));
  }
}

TEST_CASE("soft_alignment: columns stay stochastic and argmax is temperature invariant") {
  std::mt19937_64 rng(3);
  const auto src = oracle::random_matrix(rng, 5, 3);
  const auto trg = oracle::random_matrix(rng, 8, 3);
  const auto reference = soft_alignment(src, trg, 1.0);
  for (double temperature : {1e-3, 0.1, 1.0, 10.0, 1e3}) {
    const auto soft = soft_alignment(src, trg, temperature);
    CHECK_NOTHROW(soft.validate(1e-6));
    for (int j = 0; j < 8; ++j) {
      Eigen::Index a, b;
      soft.probs.col(j).maxCoeff(&a);
      reference.probs.col(j).maxCoeff(&b);
      CHECK(a == b);
    }
  }
  const auto sharp = soft_alignment(src, trg, 1e-4);
  CHECK(sharp.probs.colwise().maxCoeff().minCoeff() > 0.999);
}

TEST_CASE("soft_alignment: rejects non-finite input and bad temperature") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 2);
  x(0, 0) = std::nan("");
  CHECK_THROWS_AS(soft_alignment(x, Eigen::MatrixXd::Zero(3, 2)), ValidationError);
  CHECK_THROWS_AS(soft_alignment(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 2), 0.0), ValidationError);
}

TEST_CASE("forward_sum: 2x3 uniform case is ln 4") {
  CHECK(forward_sum_loss(uniform_soft(2, 3)) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(forward_sum_loss(uniform_soft(2, 3)) == doctest::Approx(1.3863).epsilon(1e-4));
}

TEST_CASE("forward_sum: single source row has zero loss") {
  CHECK(forward_sum_loss(Soft{Eigen::MatrixXd::Ones(1, 5)}) == 0.0);
}

TEST_CASE("forward_sum: matches brute-force enumeration on random matrices") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4);
    const int m = n + static_cast<int>(rng() % (8 - n));
    const Soft soft{oracle::random_column_stochastic(rng, n, m)};
    const double expected = -std::log(oracle::total_path_probability(soft.probs));
    CHECK(std::abs(forward_sum_loss(soft) - expected) < 1e-6);
  }
}

TEST_CASE("forward_sum: infeasible shapes raise a typed error") {
  CHECK_THROWS_AS(forward_sum_loss(uniform_soft(4, 3)), InfeasibleAlignmentError);
  CHECK_THROWS_AS(viterbi_hard(uniform_soft(4, 3)), InfeasibleAlignmentError);
}

TEST_CASE("forward_sum: logit gradient matches central differences") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd logits = oracle::random_matrix(rng, 3, 5);
    const auto analytic = forward_sum_from_logits(logits).occupancy;
    const auto numeric = oracle::numeric_gradient(
        [](const Eigen::MatrixXd& x) { return forward_sum(log_softmax_columns(x), false).loss; }, logits);
    CHECK(oracle::relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("viterbi: worked 2x3 example") {
  Eigen::MatrixXd p(2, 3);
  p << 0.9, 0.2, 0.1, 0.1, 0.8, 0.9;
  const Soft soft{p};
  const auto hard = viterbi_hard(soft);
  CHECK(hard.assign == std::vector<int>{0, 1, 1});
  CHECK(hard.durations == std::vector<int>{1, 2});
  CHECK(std::exp(path_log_probability(soft.log_probs(), hard)) == doctest::Approx(0.648).epsilon(1e-12));
}

TEST_CASE("viterbi: equal lengths force the diagonal") {
  std::mt19937_64 rng(2);
  const Soft soft{oracle::random_column_stochastic(rng, 5, 5)};
  CHECK(viterbi_hard(soft).assign == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("viterbi: ties prefer staying on the current source") {
  // The first backtrace decision (frame 3) is tied and stays on source 2.
  const auto hard = viterbi_hard(uniform_soft(2, 3));
  CHECK(hard.assign == std::vector<int>{0, 1, 1});
}

TEST_CASE("viterbi: path probability equals the enumeration maximum and is valid") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4);
    const int m = n + static_cast<int>(rng() % (9 - n));
    const Soft soft{oracle::random_column_stochastic(rng, n, m)};
    const auto hard = viterbi_hard(soft);
    CHECK_NOTHROW(hard.validate(n));
    const double prob = std::exp(path_log_probability(soft.log_probs(), hard));
    CHECK(prob == doctest::Approx(oracle::max_path_probability(soft.probs)).epsilon(1e-9));
  }
}

TEST_CASE("binarization_loss: examples and dominance over forward sum") {
  // One-hot soft along the hard path.
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(2, 3);
  onehot(0, 0) = onehot(1, 1) = onehot(1, 2) = 1.0;
  const Soft perfect{onehot};
  const auto hard = viterbi_hard(perfect);
  CHECK(binarization_loss(hard, perfect) == 0.0);
  CHECK(alignment_loss(perfect, hard) == 0.0);

  const auto two = HardAlignment::from_assign({0, 0}, 1);
  CHECK(binarization_loss(two, Soft{Eigen::MatrixXd::Constant(1, 2, 0.5)}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  const Soft uniform = uniform_soft(2, 3);
  const auto uh = viterbi_hard(uniform);
  CHECK(alignment_loss(uniform, uh) == doctest::Approx(std::log(4.0) + 3 * std::log(2.0)).epsilon(1e-12));
  CHECK(alignment_loss(uniform, uh) == doctest::Approx(3.4657).epsilon(1e-4));

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 5);
    const int m = n + static_cast<int>(rng() % 6);
    const Soft soft{oracle::random_column_stochastic(rng, n, m)};
    const auto h = viterbi_hard(soft);
    const double fs = forward_sum_loss(soft);
    const double bin = binarization_loss(h, soft);
    CHECK(bin >= fs - 1e-12);
    CHECK(alignment_loss(soft, h) == fs + bin);
  }
  CHECK_THROWS_AS(binarization_loss(two, uniform), ValidationError);
}

TEST_CASE("focus_rate: boundaries and worked example") {
  std::mt19937_64 rng(4);
  const Soft soft{oracle::random_column_stochastic(rng, 4, 6)};
  const auto none = focus_rate(soft, -std::numeric_limits<double>::infinity());
  CHECK(std::count(none.begin(), none.end(), 1) == 0);

  const Soft identity{Eigen::MatrixXd::Identity(3, 3)};
  const auto focused = focus_rate(identity, -0.01);
  CHECK(std::count(focused.begin(), focused.end(), 1) == 0);

  Eigen::MatrixXd p(3, 3);
  p << 0.8, 0.35, 0.1,
       0.1, 0.3, 0.2,
       0.1, 0.35, 0.7;
  CHECK(focus_rate(Soft{p}, std::log(0.5)) == Marks{0, 1, 0});
}

TEST_CASE("focus_rate: monotone in tau") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Soft soft{oracle::random_column_stochastic(rng, 6, 9)};
    Marks previous(6, 0);
    for (double tau = -5.0; tau <= 0.5; tau += 0.25) {
      const auto s = focus_rate(soft, tau);
      for (int i = 0; i < 6; ++i) CHECK(s[i] >= previous[i]);
      previous = s;
    }
  }
}
