#include "doctest.h"
#include "support.hpp"

#include "hgsum/compressor.hpp"
#include "hgsum/errors.hpp"
#include "hgsum/ops.hpp"

#include <set>

using namespace hgsum;
using testing::random_graph;
using testing::random_matrix;

namespace {

// Top-k by a full sort of (score desc, id asc) pairs.
std::vector<Index> oracle_topk(const Matrix& t, double k, const HeteroGraph& g) {
  std::vector<std::pair<double, Index>> s;
  for (Index i : g.nodes_of(NodeKind::Sentence)) s.push_back({-t(0, i), i});
  std::sort(s.begin(), s.end());
  const std::size_t keep = static_cast<std::size_t>(std::ceil(k * static_cast<double>(s.size()) - 1e-9));
  std::vector<Index> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(s[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

Matrix random_scores(Index n, std::mt19937_64& rng) {
  Matrix t = random_matrix(1, n, rng).array().exp().matrix();
  return t / t.sum();
}

}  // namespace

TEST_CASE("scores sum to one, r = 0 is uniform and match a direct softmax") {
  std::mt19937_64 rng(1);
  Matrix q = random_matrix(9, 5, rng);
  Value r(random_matrix(1, 5, rng));
  Matrix t = node_scores(Value(q), r).data();
  CHECK(t.rows() == 1);
  CHECK(t.cols() == 9);
  CHECK(std::abs(t.sum() - 1.0) < 1e-7);
  Eigen::VectorXd logits = q * r.data().transpose();
  Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  e /= e.sum();
  for (Index i = 0; i < 9; ++i) CHECK(std::abs(t(0, i) - e(i)) < 1e-12);
  Matrix u = node_scores(Value(q), Value(Matrix::Zero(1, 5))).data();
  for (Index i = 0; i < 9; ++i) CHECK(std::abs(u(0, i) - 1.0 / 9.0) < 1e-15);
}

TEST_CASE("selection size is ceil(k |V_s|) and matches the sort oracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Index sents = 1 + trial % 9;
    auto g = random_graph(2, sents, 5, rng);
    Matrix t = random_scores(g.num_nodes(), rng);
    for (double k : {0.1, 0.25, 0.5, 0.75, 1.0}) {
      auto got = select_topk_sentences(t, k, g);
      CHECK(got.size() == static_cast<std::size_t>(std::ceil(k * static_cast<double>(sents) - 1e-9)));
      CHECK(got == oracle_topk(t, k, g));
    }
  }
}

TEST_CASE("five sentences at k = 0.5 keep three") {
  std::mt19937_64 rng(3);
  auto g = random_graph(1, 5, 4, rng);
  Matrix t(1, g.num_nodes());
  t.setConstant(0.01);
  const double s[] = {0.3, 0.1, 0.5, 0.05, 0.2};
  for (Index i = 0; i < 5; ++i) t(0, 1 + i) = s[i];
  CHECK(select_topk_sentences(t, 0.5, g) == std::vector<Index>{1, 3, 5});
  CHECK(select_topk_sentences(t, 1.0, g) == g.nodes_of(NodeKind::Sentence));
}

TEST_CASE("equal scores keep the lowest ids") {
  std::mt19937_64 rng(4);
  auto g = random_graph(2, 6, 3, rng);
  Matrix t = Matrix::Constant(1, g.num_nodes(), 1.0 / static_cast<double>(g.num_nodes()));
  CHECK(select_topk_sentences(t, 0.5, g) == std::vector<Index>{2, 3, 4});
}

TEST_CASE("selection errors") {
  std::mt19937_64 rng(5);
  auto g = random_graph(1, 2, 2, rng);
  Matrix t = random_scores(g.num_nodes(), rng);
  CHECK_THROWS_AS(select_topk_sentences(t, 0.0, g), ConfigError);
  CHECK_THROWS_AS(select_topk_sentences(t, 1.5, g), ConfigError);
  CHECK_THROWS_AS(select_topk_sentences(Matrix::Ones(1, 2), 0.5, g), DataError);
  HeteroGraph empty;
  GraphNode d;
  d.kind = NodeKind::Document;
  d.doc = 0;
  empty.nodes.push_back(d);
  for (auto& adj : empty.adjacency) adj.resize(1);
  CHECK_THROWS_AS(select_topk_sentences(Matrix::Ones(1, 1), 0.5, empty), DataError);
  CHECK_THROWS_AS(extend_selection({}, g), DataError);
  const Index doc[] = {0};
  CHECK_THROWS_AS(extend_selection(doc, g), DataError);
}

TEST_CASE("selections nest as k grows") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = random_graph(3, 11, 6, rng);
    Matrix t = random_scores(g.num_nodes(), rng);
    // Inject ties.
    t(0, 3) = t(0, 7);
    std::vector<Index> prev;
    for (double k : {0.1, 0.25, 0.5, 0.75, 1.0}) {
      auto cur = select_topk_sentences(t, k, g);
      CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = cur;
    }
  }
}

TEST_CASE("closure of one sentence with three words in a one-document cluster") {
  testing::ToyWorld w;
  auto c = testing::make_cluster("one", {"alpha beta gamma"});
  auto g = build_hetero_graph(c, w.table, *w.embedder, {});
  const Index s[] = {1};
  auto all = extend_selection(s, g);
  CHECK(all.size() == 5);
  CHECK(all == std::vector<Index>{0, 1, 2, 3, 4});
}

TEST_CASE("closure soundness on built and random graphs") {
  testing::ToyWorld w;
  std::mt19937_64 rng(7);
  for (const auto& c : w.clusters) {
    auto g = build_hetero_graph(c, w.table, *w.embedder, {});
    Matrix t = random_scores(g.num_nodes(), rng);
    auto is = select_topk_sentences(t, 0.5, g);
    auto closure = extend_selection(is, g);
    CHECK(std::is_sorted(closure.begin(), closure.end()));
    std::set<Index> sel(is.begin(), is.end()), in(closure.begin(), closure.end());
    for (Index n : closure) {
      if (sel.count(n)) continue;
      bool linked = false;
      for (EdgeType t2 : {EdgeType::SW, EdgeType::DS})
        for (const auto& nb : neighbors(g, n, t2)) linked |= sel.count(nb.node) > 0;
      CHECK(linked);
      // A retained word's sentence is retained.
      if (g.nodes[static_cast<std::size_t>(n)].kind == NodeKind::Word) {
        for (const auto& nb : neighbors(g, n, EdgeType::SW)) CHECK(in.count(nb.node));
      }
    }
    // Everything linked to a selected sentence is retained.
    for (Index s : is)
      for (EdgeType t2 : {EdgeType::SW, EdgeType::DS})
        for (const auto& nb : neighbors(g, s, t2)) CHECK(in.count(nb.node));
    auto every = extend_selection(g.nodes_of(NodeKind::Sentence), g);
    CHECK(static_cast<Index>(every.size()) == g.num_nodes());
  }
}

TEST_CASE("compress masks retained rows and carries positions") {
  std::mt19937_64 rng(8);
  auto g = random_graph(2, 4, 6, rng);
  const Index n = g.num_nodes();
  Matrix q = random_matrix(n, 4, rng);
  Matrix t = random_scores(n, rng);
  std::vector<Index> nodes{0, 3, 5, 9};
  CompressorConfig cfg;
  auto out = compress(Value(q), Value(t), nodes, g, cfg);
  CHECK(out.rows.rows() == 4);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Index id = nodes[i];
    CHECK((out.rows.data().row(static_cast<Index>(i)) - q.row(id) * t(0, id)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(out.positions[i] == g.nodes[static_cast<std::size_t>(id)].token_position);
  }
  CHECK_THROWS_AS(compress(Value(q), Value(t), std::vector<Index>{}, g, cfg), DataError);

  cfg.renorm_mask = true;
  Matrix uniform = Matrix::Constant(1, n, 1.0 / static_cast<double>(n));
  auto same = compress(Value(q), Value(uniform), nodes, g, cfg);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    CHECK((same.rows.data().row(static_cast<Index>(i)) - q.row(nodes[i])).cwiseAbs().maxCoeff() < 1e-14);
  auto scaled = compress(Value(q), Value(t), nodes, g, cfg);
  double mask_sum = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) mask_sum += scaled.rows.data()(static_cast<Index>(i), 0) / q(nodes[i], 0);
  CHECK(std::abs(mask_sum - 4.0) < 1e-12);
}

TEST_CASE("gradient reaches r through the soft mask") {
  std::mt19937_64 rng(9);
  auto g = random_graph(2, 5, 6, rng);
  for (bool renorm : {false, true}) {
    ModelParams p;
    Value r = p.add(kScoreParam, random_matrix(1, 4, rng));
    Value q = p.add("q", random_matrix(g.num_nodes(), 4, rng));
    Value target(random_matrix(1, 4, rng));
    CompressorConfig cfg;
    cfg.renorm_mask = renorm;
    auto fixed = compress_graph(q, r, g, cfg).nodes;
    auto loss = [&] {
      auto c = compress(q, node_scores(q, r), fixed, g, cfg);
      return ops::sum(ops::mul(ops::mean(c.rows, 0), target));
    };
    p.zero_grad();
    loss().backward();
    CHECK(r.grad().cwiseAbs().maxCoeff() > 1e-6);
    // Under renormalisation the softmax normaliser cancels, so rows of q
    // outside the selection have an exactly zero gradient; check r alone there.
    std::vector<Param> checked = p.entries();
    if (renorm) checked.resize(1);
    auto res = grad_check(loss, checked, 1e-5);
    INFO("worst ", res.worst_param, " a=", res.analytic, " n=", res.numeric);
    CHECK(res.max_rel_error < 1e-5);
    CHECK(testing::finite_difference_error(loss, {r}, 1e-5) < 1e-5);
  }
}

TEST_CASE("compress_graph composes scores, selection and closure") {
  std::mt19937_64 rng(10);
  auto g = random_graph(2, 6, 8, rng);
  Value q(random_matrix(g.num_nodes(), 4, rng));
  Value r(random_matrix(1, 4, rng));
  CompressorConfig cfg;
  cfg.k = 0.5;
  auto out = compress_graph(q, r, g, cfg);
  Matrix t = node_scores(q, r).data();
  CHECK(out.nodes == extend_selection(oracle_topk(t, 0.5, g), g));
  CHECK(compressor_plan(4).front().name == "cmp.r");
}
