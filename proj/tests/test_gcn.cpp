#include "support.hpp"

#include "advgraph/errors.hpp"
#include "advgraph/gcn.hpp"
#include "advgraph/metrics.hpp"

#include <doctest.h>

#include <limits>

using namespace advgraph;
using namespace testsupport;

TEST_CASE("softmax examples") {
  Matrix z(1, 3);
  z << 0.0, 0.0, 0.0;
  CHECK(softmax_rows(z, 1.0)(0, 1) == doctest::Approx(1.0 / 3.0));
  z << 1.0, 2.0, 3.0;
  const Matrix p = softmax_rows(z, 1.0);
  CHECK(p(0, 2) == doctest::Approx(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0))));
  const Matrix hot = softmax_rows(z, 10.0);
  CHECK(hot(0, 2) < p(0, 2));
  CHECK(hot(0, 0) > p(0, 0));
  z << 1000.0, 0.0, -1000.0;
  const Matrix big = softmax_rows(z, 1.0);
  CHECK(big.allFinite());
  CHECK(big(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("forward matches the dense reference") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = random_graph(rng, 9, 0.3, trial % 2 == 0, 5);
    const ModelParams p = random_params(rng, g.feature_dim(), 4, 3);
    const ForwardResult f = forward(p, g, 2.0);
    const Matrix ref = ref_logits(p.w0, p.w1, Matrix(g.adjacency().cast<double>()), Matrix(g.feature_matrix()));
    CHECK((f.logits - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((f.confidences - softmax_rows(ref, 2.0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("forward rejects mismatched shapes") {
  const Graph g = Graph::from_edges("g", 4, {{0, 1}});
  ModelParams p;
  p.w0 = Matrix::Ones(3, 2);
  p.w1 = Matrix::Ones(2, 2);
  CHECK_THROWS_AS(forward(p, g), ShapeMismatch);
}

TEST_CASE("loss examples") {
  NodeSplit s;
  s.labels = {0, 1};
  s.num_classes = 2;
  Matrix conf(2, 2);
  conf << 0.8, 0.2, 0.4, 0.6;
  const std::vector<Index> nodes = {0, 1};
  CHECK(loss_ce(conf, s, nodes) == doctest::Approx(-std::log(0.8) - std::log(0.6)));
  CHECK(loss_scel(conf, s, nodes) ==
        doctest::Approx(-std::log(0.8) - 0.5 * std::log(0.2) - 0.5 * std::log(0.4) - std::log(0.6)));
  const RowVector t = smoothing_target(1, 4);
  CHECK(t(1) == 1.0);
  CHECK(t(0) == 0.25);
  CHECK(t.sum() == doctest::Approx(1.75));
  CHECK(loss_combined(2.0, 4.0, 1.0) == doctest::Approx(3.0));
  CHECK(loss_combined(2.0, 4.0, 10.0) == doctest::Approx(2.0 / 101.0 + 400.0 / 101.0));
}

TEST_CASE("combined loss at T = 1 with a one-hot teacher equals the cross-entropy") {
  std::mt19937_64 rng(11);
  const Graph g = random_graph(rng, 8, 0.4);
  NodeSplit s = cyclic_split(8, 2, rng);
  const ModelParams p = random_params(rng, 8, 3, 2);
  const Matrix z = forward(p, g, 1.0).logits;
  const Matrix y = s.one_hot();
  Objective obj{LossMode::combined, 1.0, &y, LossMode::ce};
  Objective ce{LossMode::ce, 1.0, nullptr, LossMode::ce};
  CHECK(objective_loss(z, s, s.train, obj) == doctest::Approx(objective_loss(z, s, s.train, ce)));
}

TEST_CASE("weight gradients match central finite differences") {
  std::mt19937_64 rng(5);
  const double h = 1e-5;
  for (LossMode mode : {LossMode::ce, LossMode::scel, LossMode::combined}) {
    const Graph g = random_graph(rng, 10, 0.3, true, 5);
    const NodeSplit s = cyclic_split(10, 3, rng);
    const ModelParams p = random_params(rng, 5, 4, 3);
    const Matrix soft = softmax_rows(Matrix::NullaryExpr(10, 3, [&] { return std::normal_distribution<double>()(rng); }), 1.0);
    Objective obj{mode, mode == LossMode::ce ? 1.0 : 3.0, mode == LossMode::combined ? &soft : nullptr,
                  LossMode::scel};
    const SparseMatrix a = normalized_adjacency_sparse(g);
    const SparseMatrix x = g.feature_matrix();
    const WeightGradients wg = weight_gradients(p, a, x, s, s.train, obj);
    auto loss_at = [&](const ModelParams& q) {
      return ref_loss(ref_logits(q.w0, q.w1, Matrix(g.adjacency().cast<double>()), Matrix(x)), s, s.train, mode,
                      obj.temperature, obj.soft_labels, obj.combined_hard);
    };
    CHECK(wg.loss == doctest::Approx(loss_at(p)).epsilon(1e-10));
    for (int which = 0; which < 2; ++which) {
      const Matrix& grad = which == 0 ? wg.w0 : wg.w1;
      for (Index k = 0; k < grad.size(); ++k) {
        ModelParams up = p, down = p;
        (which == 0 ? up.w0 : up.w1).data()[k] += h;
        (which == 0 ? down.w0 : down.w1).data()[k] -= h;
        const double fd = (loss_at(up) - loss_at(down)) / (2 * h);
        CHECK(rel_err(fd, grad.data()[k]) < 1e-4);
      }
    }
  }
}

TEST_CASE("adjacency gradient matches finite differences through the normalization") {
  std::mt19937_64 rng(8);
  const double h = 1e-5;
  for (LossMode mode : {LossMode::ce, LossMode::scel}) {
    const Graph g = random_graph(rng, 8, 0.35, true, 4);
    const NodeSplit s = cyclic_split(8, 2, rng);
    const ModelParams p = random_params(rng, 4, 3, 2);
    const Matrix sym = grad_adjacency(p, g, s, s.train, mode);
    const Matrix a = Matrix(g.adjacency().cast<double>());
    const Matrix x = Matrix(g.feature_matrix());
    auto loss_at = [&](const Matrix& adj) {
      return ref_loss(ref_logits(p.w0, p.w1, adj, x), s, s.train, mode, 1.0, nullptr, LossMode::ce);
    };
    for (Index i = 0; i < 8; ++i)
      for (Index j = 0; j < 8; ++j) {
        if (i == j) continue;
        Matrix up = a, down = a;
        up(i, j) += h;
        up(j, i) += h;
        down(i, j) -= h;
        down(j, i) -= h;
        const double fd = (loss_at(up) - loss_at(down)) / (2 * h) / 2.0;
        CHECK(rel_err(fd, sym(i, j)) < 1e-4);
      }
    CHECK((sym - sym.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("grad_adjacency refuses combined without soft labels") {
  const Graph g = Graph::from_edges("g", 3, {{0, 1}});
  NodeSplit s;
  s.labels = {0, 1, 0};
  s.num_classes = 2;
  s.train = {0, 1};
  ModelParams p;
  p.w0 = Matrix::Ones(3, 2);
  p.w1 = Matrix::Ones(2, 2);
  CHECK_THROWS_AS(grad_adjacency(p, g, s, s.train, LossMode::combined), ShapeMismatch);
}

TEST_CASE("training fits a separable toy and is deterministic") {
  std::mt19937_64 rng(2);
  const Planted pl = planted_partition(rng, 45, 3, 0.4, 0.02);
  TrainConfig cfg;
  cfg.seed = 7;
  const TrainResult a = train(pl.graph, pl.split, cfg);
  const TrainResult b = train(pl.graph, pl.split, cfg);
  CHECK(a.params == b.params);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.train_accuracy == doctest::Approx(1.0));
  CHECK(a.loss_history.back() < a.loss_history.front());
  CHECK(accuracy(a.params, pl.graph, pl.split, pl.split.test) > 0.8);
}

TEST_CASE("training validation") {
  std::mt19937_64 rng(2);
  const Planted pl = planted_partition(rng, 12, 2, 0.5, 0.1);
  TrainConfig cfg;
  cfg.loss_mode = LossMode::combined;
  CHECK_THROWS_AS(train(pl.graph, pl.split, cfg), ConfigError);
  cfg.loss_mode = LossMode::ce;
  const Matrix soft = pl.split.one_hot();
  CHECK_THROWS_AS(train(pl.graph, pl.split, cfg, &soft), ConfigError);
  auto x = std::make_shared<SparseMatrix>(Matrix(*pl.graph.shared_features()).sparseView());
  x->coeffRef(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const Graph poisoned = Graph::from_edges("nan", 12, pl.graph.edge_list(), x);
  CHECK_THROWS_AS(train(poisoned, pl.split, cfg), DivergedLoss);
}

TEST_CASE("scel with a single class follows the cross-entropy trajectory") {
  const Graph g = Graph::from_edges("one", 6, {{0, 1}, {1, 2}, {3, 4}});
  NodeSplit s;
  s.labels = std::vector<int>(6, 0);
  s.num_classes = 1;
  s.train = {0, 2, 4};
  s.test = {1, 3, 5};
  TrainConfig ce;
  ce.epochs = 20;
  TrainConfig sc = ce;
  sc.loss_mode = LossMode::scel;
  CHECK(train(g, s, ce).params == train(g, s, sc).params);
}

TEST_CASE("prediction ties go to the lowest class") {
  RowVector r(3);
  r << 0.4, 0.4, 0.2;
  CHECK(argmax_row(r) == 0);
  r << 0.1, 0.45, 0.45;
  CHECK(argmax_row(r) == 1);
}

TEST_CASE("checkpoints round-trip exactly") {
  std::mt19937_64 rng(1);
  ModelParams p = random_params(rng, 7, 4, 3);
  p.temperature = 10.0;
  p.num_nodes = 7;
  const auto dir = scratch_dir("ckpt");
  save_checkpoint(dir / "m.ckpt", p);
  CHECK(load_checkpoint(dir / "m.ckpt") == p);
  write_text(dir / "bad.ckpt", "not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
}
