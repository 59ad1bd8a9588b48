#include "fcnlp/losses.hpp"
#include "test_util.hpp"

using namespace fcnlp;
using testutil::error_code;

TEST_CASE("cross-entropy by hand, with clamping and reductions") {
  Tape tape;
  Matrix p(3, 2);
  p << 0.8, 0.2, 0.3, 0.7, 1.0, 0.0;
  const Var probs = tape.constant(p);
  const std::vector<Target> t = {{0, Label::Real, Split::Seen}, {1, Label::Fake, Split::Unseen}};
  const double expected = -std::log(0.8) - std::log(0.7);
  CHECK(std::abs(cross_entropy(probs, t, Reduction::Sum).value()(0, 0) - expected) <= 1e-15);
  CHECK(std::abs(cross_entropy(probs, t, Reduction::Mean).value()(0, 0) - expected / 2) <= 1e-15);
  const std::vector<Target> zero = {{2, Label::Fake, Split::Seen}};
  CHECK(std::abs(cross_entropy(probs, zero, Reduction::Sum).value()(0, 0) - 12.0 * std::log(10.0)) <= 1e-12);
  CHECK(cross_entropy(probs, {}, Reduction::Sum).value()(0, 0) == 0.0);
  const std::vector<Target> missing = {{0, Label::Unlabeled, Split::Seen}};
  CHECK(error_code([&] { cross_entropy(probs, missing, Reduction::Sum); }) == Errc::MissingLabel);
  CHECK(error_code([&] { cross_entropy(tape.constant(Matrix::Ones(2, 3)), t, Reduction::Sum); }) ==
        Errc::ShapeMismatch);
}

TEST_CASE("cross-entropy matches the oracle") {
  std::mt19937_64 rng(3);
  const oracle::Mat raw = oracle::random_mat(20, 2, rng, 0.01, 1.0);
  oracle::Mat p = raw;
  for (auto& r : p) {
    const double s = r[0] + r[1];
    r[0] /= s;
    r[1] /= s;
  }
  std::vector<Target> t;
  std::vector<std::pair<std::uint32_t, int>> ot;
  for (std::uint32_t i = 0; i < 20; i += 3) {
    t.push_back({i, i % 2 ? Label::Fake : Label::Real, Split::Seen});
    ot.emplace_back(i, int(i % 2));
  }
  Tape tape;
  CHECK(std::abs(cross_entropy(tape.constant(testutil::to_matrix(p)), t, Reduction::Sum).value()(0, 0) -
                 oracle::cross_entropy(p, ot)) <= 1e-12);
}

TEST_CASE("label read counter tallies by split") {
  Tape tape;
  const Var probs = tape.constant(Matrix::Constant(4, 2, 0.5));
  const std::vector<Target> t = {{0, Label::Real, Split::Seen},
                                 {1, Label::Fake, Split::Seen},
                                 {2, Label::Fake, Split::Unseen},
                                 {3, Label::Real, Split::Test}};
  LabelReadCounter c;
  cross_entropy(probs, t, Reduction::Sum, &c);
  cross_entropy(probs, t, Reduction::Mean, &c);
  CHECK(c.seen == 4);
  CHECK(c.unseen == 2);
  CHECK(c.test == 2);
}

TEST_CASE("mmd identities") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix p = testutil::to_matrix(oracle::random_mat(5 + trial, 4, rng));
    const Matrix q = testutil::to_matrix(oracle::random_mat(3 + 2 * trial, 4, rng));
    CHECK(mmd(p, p) == 0.0);
    CHECK(mmd(p, q) == mmd(q, p));
    CHECK(mmd(p, q) >= 0.0);
    CHECK(std::abs(mmd(p, q) - oracle::mmd(testutil::to_mat(p), testutil::to_mat(q))) <= 1e-12);
    Tape tape;
    CHECK(std::abs(mmd(tape.constant(p), tape.constant(q)).value()(0, 0) - mmd(p, q)) <= 1e-15);
  }
  Matrix a(2, 2), b(1, 2);
  a << 0, 0, 2, 2;
  b << 0, 1;
  CHECK(mmd(a, b) == 1.0);
  CHECK(error_code([&] { mmd(Matrix(0, 2), b); }) == Errc::EmptySet);
  CHECK(error_code([&] { mmd(a, Matrix::Ones(1, 3)); }) == Errc::ShapeMismatch);
}

TEST_CASE("domain groups partition labelled Seen and Unseen rows") {
  const std::vector<Label> labels = {Label::Real, Label::Fake, Label::Real, Label::Fake, Label::Fake, Label::Unlabeled};
  const std::vector<Split> splits = {Split::Seen, Split::Seen, Split::Unseen, Split::Unseen, Split::Test, Split::Seen};
  const DomainGroups g = domain_groups(labels, splits);
  CHECK(g.seen_real == std::vector<std::uint32_t>{0});
  CHECK(g.seen_fake == std::vector<std::uint32_t>{1});
  CHECK(g.unseen_real == std::vector<std::uint32_t>{2});
  CHECK(g.unseen_fake == std::vector<std::uint32_t>{3});
  CHECK(error_code([&] { domain_groups(labels, std::span(splits).first(2)); }) == Errc::ShapeMismatch);
}

TEST_CASE("mmd_loss sums the two class terms and zeroes a degenerate class") {
  std::mt19937_64 rng(1);
  const Matrix x = testutil::to_matrix(oracle::random_mat(6, 3, rng));
  DomainGroups g{{0, 1}, {2}, {3}, {4, 5}};
  Tape tape;
  const Var xv = tape.constant(x);
  const auto rows = [&](std::vector<Index> r) { return Matrix(x(r, Eigen::all)); };
  const double expected = mmd(rows({0, 1}), rows({3})) + mmd(rows({2}), rows({4, 5}));
  CHECK(std::abs(mmd_loss(tape, xv, g).value()(0, 0) - expected) <= 1e-15);

  std::vector<std::string> warnings;
  const auto old = set_warning_sink([&](std::string_view w) { warnings.emplace_back(w); });
  DomainGroups no_unseen_fake{{0, 1}, {2}, {3}, {}};
  const double real_only = mmd(rows({0, 1}), rows({3}));
  CHECK(std::abs(mmd_loss(tape, xv, no_unseen_fake).value()(0, 0) - real_only) <= 1e-15);
  set_warning_sink(old);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("fake") != std::string::npos);
}

TEST_CASE("total loss is l_fcn + lambda l_lpn + mu l_mmd") {
  LossValues v{1.5, 2.0, 0.25, 0.0};
  CHECK(total_loss(v, 0.1, 4.0) == 1.5 + 0.2 + 1.0);
  Tape tape;
  const auto s = [&](double x) { return tape.constant(Matrix::Constant(1, 1, x)); };
  CHECK(total_loss(s(1.5), s(2.0), s(0.25), 0.1, 4.0).value()(0, 0) == total_loss(v, 0.1, 4.0));
  CHECK(total_loss(v, 0.0, 0.0) == 1.5);
}
