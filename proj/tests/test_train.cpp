#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "biowish/train.hpp"

using namespace biowish;

namespace {

// spectral-domain inputs with disjoint active bands per class
LabeledSet<float> banded_tf_set(int per_class, std::uint64_t seed) {
  LabeledSet<float> set;
  Rng rng(seed);
  for (int cls = 0; cls < 2; ++cls)
    for (int s = 0; s < per_class; ++s) {
      std::vector<float> x(25 * 41 * 3, 0.0f);
      const int lo = cls == 0 ? 3 : 15;
      for (int k = lo; k < lo + 5; ++k)
        for (int j = 0; j < 41; ++j)
          for (int a = 0; a < 3; ++a)
            x[(static_cast<std::size_t>(k) * 41 + j) * 3 + a] =
                static_cast<float>(0.6 + rng.normal(0.0, 0.2));
      for (auto& v : x) v += static_cast<float>(rng.normal(0.0, 0.35));
      set.x.push_back(std::move(x));
      set.y.push_back(cls);
    }
  return set;
}

// per-subject sine signatures for siamese tests
std::vector<float> subject_frame(int subject, int session, Rng& rng) {
  const double pi = std::acos(-1.0);
  std::vector<float> x(3 * 300);
  const double f = 5.0 + subject * 1.7 + (session == 2 ? 0.05 : 0.0);
  const double phase = rng.uniform(0.0, 2.0 * pi);
  for (int a = 0; a < 3; ++a)
    for (int n = 0; n < 300; ++n)
      x[static_cast<std::size_t>(a) * 300 + n] =
          static_cast<float>(std::sin(2.0 * pi * f * n / 60.0 + phase + a) +
                             rng.normal(0.0, 0.05));
  return x;
}

}  // namespace

TEST_CASE("sgdm update rule") {
  Network<float> net;
  net.add<Linear<float>>(2, 1);
  auto ps = net.params();
  ps[0].value[0] = 1.0f;
  ps[0].value[1] = -2.0f;
  Sgdm<float> opt(0.1);

  SECTION("zero gradient leaves parameters unchanged") {
    net.zero_grad();
    opt.step(ps);
    CHECK(ps[0].value[0] == 1.0f);
    CHECK(ps[0].value[1] == -2.0f);
  }
  SECTION("first step is plain gradient descent") {
    ps[0].grad[0] = 0.5f;
    ps[0].grad[1] = -0.25f;
    opt.step(ps);
    CHECK(ps[0].value[0] == Catch::Approx(1.0 - 0.1 * 0.5));
    CHECK(ps[0].value[1] == Catch::Approx(-2.0 + 0.1 * 0.25));
  }
  SECTION("two steps with constant gradient accumulate momentum") {
    ps[0].grad[0] = 1.0f;
    opt.step(ps);
    opt.step(ps);
    // v1 = -lr g, v2 = mu v1 - lr g; total = -lr g (2 + mu)
    CHECK(ps[0].value[0] == Catch::Approx(1.0 - 0.1 * (2.0 + 0.9)));
  }
}

TEST_CASE("cross-entropy loss values and gradient") {
  SECTION("uniform logits give ln 2") {
    Tensor<double> logits({1, 1, 1, 2});
    logits.v = {0.0, 0.0};
    Tensor<double> d;
    CHECK(loss_cross_entropy(logits, {0}, d) == Catch::Approx(std::log(2.0)));
  }
  SECTION("extreme logits do not overflow") {
    Tensor<double> logits({1, 1, 1, 2});
    logits.v = {1000.0, 0.0};
    Tensor<double> d;
    const double loss = loss_cross_entropy(logits, {0}, d);
    CHECK(std::isfinite(loss));
    CHECK(loss == Catch::Approx(0.0).margin(1e-9));
  }
  SECTION("gradient matches finite differences") {
    Tensor<double> logits({2, 1, 1, 4});
    Rng rng(5);
    for (auto& v : logits.v) v = rng.uniform(-2.0, 2.0);
    const std::vector<int> labels = {2, 0};
    Tensor<double> d;
    loss_cross_entropy(logits, labels, d);
    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
      Tensor<double> lp = logits, lm = logits, tmp;
      lp.v[i] += h;
      lm.v[i] -= h;
      const double fd =
          (loss_cross_entropy(lp, labels, tmp) - loss_cross_entropy(lm, labels, tmp)) / (2 * h);
      REQUIRE(std::abs(d.v[i] - fd) / std::max(1.0, std::abs(fd)) < 1e-6);
    }
  }
  SECTION("label out of range throws") {
    Tensor<double> logits({1, 1, 1, 2});
    Tensor<double> d;
    CHECK_THROWS(loss_cross_entropy(logits, {2}, d));
  }
}

TEST_CASE("contrastive loss values") {
  Tensor<double> e1({1, 1, 1, 3}), e2({1, 1, 1, 3});
  Tensor<double> d1, d2;
  SECTION("identical positives cost nothing") {
    e1.v = {0.3, -0.4, 0.8};
    e2.v = e1.v;
    CHECK(loss_contrastive(e1, e2, {1}, 1.0, d1, d2) == 0.0);
  }
  SECTION("far negatives cost nothing and have zero gradient") {
    e1.v = {2.0, 0.0, 0.0};
    e2.v = {-2.0, 0.0, 0.0};
    CHECK(loss_contrastive(e1, e2, {0}, 1.0, d1, d2) == 0.0);
    for (double v : d1.v) REQUIRE(v == 0.0);
    for (double v : d2.v) REQUIRE(v == 0.0);
  }
  SECTION("near negatives cost the squared margin gap") {
    e1.v = {0.5, 0.0, 0.0};
    e2.v = {0.0, 0.0, 0.0};
    CHECK(loss_contrastive(e1, e2, {0}, 1.0, d1, d2) == Catch::Approx(0.25));
  }
}

TEST_CASE("contrastive gradient matches finite differences") {
  Tensor<double> e1({4, 1, 1, 5}), e2({4, 1, 1, 5});
  Rng rng(31);
  for (auto& v : e1.v) v = rng.uniform(-0.4, 0.4);
  for (auto& v : e2.v) v = rng.uniform(-0.4, 0.4);
  const std::vector<char> same = {1, 0, 1, 0};
  Tensor<double> d1, d2, t1, t2;
  loss_contrastive(e1, e2, same, 1.0, d1, d2);
  const double h = 1e-6;
  for (std::size_t i = 0; i < e1.v.size(); ++i) {
    Tensor<double> p = e1, m = e1;
    p.v[i] += h;
    m.v[i] -= h;
    const double fd = (loss_contrastive(p, e2, same, 1.0, t1, t2) -
                       loss_contrastive(m, e2, same, 1.0, t1, t2)) /
                      (2 * h);
    REQUIRE(std::abs(d1.v[i] - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
  }
  for (std::size_t i = 0; i < e2.v.size(); ++i) {
    Tensor<double> p = e2, m = e2;
    p.v[i] += h;
    m.v[i] -= h;
    const double fd = (loss_contrastive(e1, p, same, 1.0, t1, t2) -
                       loss_contrastive(e1, m, same, 1.0, t1, t2)) /
                      (2 * h);
    REQUIRE(std::abs(d2.v[i] - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
  }
}

TEST_CASE("train_classifier separates banded spectra") {
  auto set = banded_tf_set(24, 2024);
  auto net = build_wishnet_tf<float>();
  auto head = build_head<float>(kEmbedDimTF, 2);
  net.init(7);
  head.init(8);
  TrainConfig cfg;
  cfg.learning_rate = 0.0005;
  cfg.batch = 16;
  cfg.epochs = 5;
  cfg.seed = 9;
  const auto losses = train_classifier(net, head, ArchId::WishnetTF, set, cfg);
  REQUIRE(losses.size() == 5u);
  for (std::size_t e = 1; e < losses.size(); ++e) {
    CAPTURE(losses);
    REQUIRE(losses[e] < losses[e - 1]);
  }
  int correct = 0;
  for (std::size_t i = 0; i < set.x.size(); ++i) {
    const auto emb = embed_one(net, ArchId::WishnetTF, set.x[i]);
    Tensor<float> e({1, 1, 1, kEmbedDimTF});
    e.v.assign(emb.begin(), emb.end());
    Tensor<float> logits = head.forward(e, false);
    const int pred = logits.v[0] > logits.v[1] ? 0 : 1;
    correct += pred == set.y[i];
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(set.x.size()) >= 0.95);
}

TEST_CASE("train_classifier rejects a single-class dataset") {
  LabeledSet<float> set;
  for (int i = 0; i < 8; ++i) {
    set.x.emplace_back(3 * 300, 0.5f);
    set.y.push_back(0);
  }
  auto net = build_wishnet_t<float>();
  auto head = build_head<float>(kEmbedDimT, 2);
  net.init(1);
  head.init(2);
  CHECK_THROWS_WITH(train_classifier(net, head, ArchId::WishnetT, set, TrainConfig{}),
                    Catch::Matchers::ContainsSubstring("single class"));
}

TEST_CASE("train_classifier with zero epochs returns the network unchanged") {
  Rng rng(3);
  LabeledSet<float> set;
  for (int i = 0; i < 8; ++i) {
    std::vector<float> x(3 * 300);
    for (auto& v : x) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    set.x.push_back(std::move(x));
    set.y.push_back(i % 2);
  }
  auto net = build_wishnet_t<float>();
  auto head = build_head<float>(kEmbedDimT, 2);
  net.init(11);
  head.init(12);
  std::vector<float> before;
  for (auto& p : net.params()) before.insert(before.end(), p.value, p.value + p.size);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto losses = train_classifier(net, head, ArchId::WishnetT, set, cfg);
  CHECK(losses.empty());
  std::vector<float> after;
  for (auto& p : net.params()) after.insert(after.end(), p.value, p.value + p.size);
  REQUIRE(before == after);
}

TEST_CASE("train_classifier is seed-deterministic") {
  auto set = banded_tf_set(4, 99);
  // shrink to the cheap architecture for this determinism check
  LabeledSet<float> tset;
  Rng rng(100);
  for (int i = 0; i < 12; ++i) {
    std::vector<float> x(3 * 300);
    const double f = i % 2 ? 11.0 : 4.0;
    for (int n = 0; n < 900; ++n)
      x[static_cast<std::size_t>(n)] =
          static_cast<float>(std::sin(2.0 * std::acos(-1.0) * f * (n % 300) / 60.0) +
                             rng.normal(0.0, 0.1));
    tset.x.push_back(std::move(x));
    tset.y.push_back(i % 2);
  }
  std::vector<float> runs[2];
  for (int r = 0; r < 2; ++r) {
    auto net = build_wishnet_t<float>();
    auto head = build_head<float>(kEmbedDimT, 2);
    net.init(21);
    head.init(22);
    TrainConfig cfg;
    cfg.batch = 4;
    cfg.epochs = 2;
    cfg.seed = 77;
    train_classifier(net, head, ArchId::WishnetT, tset, cfg);
    for (auto& p : net.params()) runs[r].insert(runs[r].end(), p.value, p.value + p.size);
    for (auto& p : head.params()) runs[r].insert(runs[r].end(), p.value, p.value + p.size);
  }
  REQUIRE(runs[0] == runs[1]);
}

TEST_CASE("pair sampler validates polarity availability") {
  CHECK_THROWS_WITH(PairSampler({{1, 1}, {1, 1}, {1, 2}}),
                    Catch::Matchers::ContainsSubstring("negative"));
  CHECK_THROWS_WITH(PairSampler({{1, 1}, {2, 1}}), Catch::Matchers::ContainsSubstring("positive"));
  CHECK_NOTHROW(PairSampler({{1, 1}, {1, 2}, {2, 1}}));
}

TEST_CASE("train_siamese separates held-out subjects") {
  std::vector<std::vector<float>> x;
  std::vector<PairKey> keys;
  Rng rng(404);
  for (int subject = 0; subject < 10; ++subject)
    for (int session = 1; session <= 2; ++session)
      for (int rep = 0; rep < 6; ++rep) {
        x.push_back(subject_frame(subject, session, rng));
        keys.push_back({subject, session});
      }
  auto net = build_wishnet_t<float>();
  net.init(51);
  SiameseConfig cfg;
  cfg.batch_pairs = 16;
  cfg.epochs = 1;
  cfg.steps_per_epoch = 60;
  cfg.seed = 52;
  const auto losses = train_siamese(net, ArchId::WishnetT, x, PairSampler(keys), cfg);
  REQUIRE(losses.size() == 1u);

  // held-out subjects 90 and 91
  Rng hrng(405);
  double pos = 0.0, neg = 0.0;
  int npos = 0, nneg = 0;
  std::vector<std::vector<float>> h1, h2, g1;
  for (int rep = 0; rep < 8; ++rep) {
    h1.push_back(subject_frame(90, 1, hrng));
    h2.push_back(subject_frame(90, 2, hrng));
    g1.push_back(subject_frame(91, 2, hrng));
  }
  auto dist = [&](const std::vector<float>& a, const std::vector<float>& b) {
    const auto ea = embed_one(net, ArchId::WishnetT, a);
    const auto eb = embed_one(net, ArchId::WishnetT, b);
    double s = 0.0;
    for (std::size_t i = 0; i < ea.size(); ++i)
      s += (ea[i] - eb[i]) * (ea[i] - eb[i]);
    return std::sqrt(s);
  };
  for (const auto& a : h1)
    for (const auto& b : h2) {
      pos += dist(a, b);
      ++npos;
    }
  for (const auto& a : h1)
    for (const auto& b : g1) {
      neg += dist(a, b);
      ++nneg;
    }
  pos /= npos;
  neg /= nneg;
  CAPTURE(pos, neg);
  CHECK(pos < neg);
}

TEST_CASE("train_siamese is seed-deterministic") {
  std::vector<std::vector<float>> x;
  std::vector<PairKey> keys;
  Rng rng(61);
  for (int subject = 0; subject < 3; ++subject)
    for (int session = 1; session <= 2; ++session)
      for (int rep = 0; rep < 3; ++rep) {
        x.push_back(subject_frame(subject, session, rng));
        keys.push_back({subject, session});
      }
  std::vector<float> runs[2];
  for (int r = 0; r < 2; ++r) {
    auto net = build_wishnet_t<float>();
    net.init(71);
    SiameseConfig cfg;
    cfg.batch_pairs = 8;
    cfg.epochs = 1;
    cfg.steps_per_epoch = 10;
    cfg.seed = 72;
    train_siamese(net, ArchId::WishnetT, x, PairSampler(keys), cfg);
    for (auto& p : net.params()) runs[r].insert(runs[r].end(), p.value, p.value + p.size);
  }
  REQUIRE(runs[0] == runs[1]);
}
