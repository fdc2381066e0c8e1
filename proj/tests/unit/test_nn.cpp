#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "cgm/model/transformer.hpp"
#include "cgm/nn/checkpoint.hpp"
#include "cgm/nn/gradcheck.hpp"
#include "cgm/nn/layers.hpp"
#include "cgm/nn/ops.hpp"
#include "cgm/nn/optim.hpp"

using namespace cgm;
using namespace cgm::nn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

using M = Mat<double>;

M random_mat(Eigen::Index r, Eigen::Index c, Rng &rng, double s = 1.0) {
    M m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = s * normal01(rng);
    }
    return m;
}

// Scalar readout sum(x * c) with a fixed random projection.
Var<double> readout(const Var<double> &x, const M &c) {
    return sum(matmul(x, constant(c)));
}

GradCheckOptions tol(double t) {
    GradCheckOptions o;
    o.tolerance = t;
    return o;
}

} // namespace

TEST_CASE("relu values and gradients", "[nn]") {
    ParameterSet<double> ps;
    M init(1, 2);
    init << -1.0, 2.0;
    auto x = ps.add("x", init);
    const auto y = relu(x);
    REQUIRE(y.value()(0, 0) == 0.0);
    REQUIRE(y.value()(0, 1) == 2.0);
    backward(sum(y));
    REQUIRE(x.grad()(0, 0) == 0.0);
    REQUIRE(x.grad()(0, 1) == 1.0);
}

TEST_CASE("softmax rows", "[nn]") {
    const auto u = softmax(constant<double>(M::Constant(2, 4, 0.3)));
    REQUIRE((u.value().array() - 0.25).abs().maxCoeff() < 1e-15);
    Rng rng(1);
    const auto s = softmax(constant(random_mat(6, 5, rng, 10.0)));
    for (Eigen::Index r = 0; r < 6; ++r) {
        REQUIRE_THAT(s.value().row(r).sum(), WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("layer norm output statistics", "[nn]") {
    Rng rng(2);
    const auto y = layer_norm(constant(random_mat(5, 8, rng, 3.0)), constant<double>(M::Ones(1, 8)),
                              constant<double>(M::Zero(1, 8)));
    for (Eigen::Index r = 0; r < 5; ++r) {
        const double mean = y.value().row(r).mean();
        const double var = (y.value().row(r).array() - mean).square().mean();
        REQUIRE(std::abs(mean) <= 1e-10);
        // eps = 1e-5 shifts the variance by about eps / var(x).
        REQUIRE_THAT(var, WithinAbs(1.0, 1e-5));
    }
    REQUIRE_THROWS_AS(layer_norm(constant(random_mat(2, 3, rng)), constant<double>(M::Ones(1, 4)),
                                 constant<double>(M::Zero(1, 4))),
                      InvalidArgument);
}

TEST_CASE("dropout identities", "[nn]") {
    Rng rng(3);
    const M x = random_mat(4, 6, rng);
    REQUIRE(dropout(constant(x), 0.5, false, rng).value() == x);
    REQUIRE(dropout(constant(x), 0.0, true, rng).value() == x);
    const M big = M::Ones(200, 200);
    const auto d = dropout(constant(big), 0.25, true, rng);
    for (Eigen::Index i = 0; i < d.value().size(); ++i) {
        const double v = d.value().data()[i];
        REQUIRE((v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15));
    }
    REQUIRE_THAT(d.value().mean(), WithinAbs(1.0, 0.02));
}

TEST_CASE("shape mismatch names both shapes", "[nn]") {
    Rng rng(4);
    try {
        (void)matmul(constant(random_mat(2, 3, rng)), constant(random_mat(4, 5, rng)));
        FAIL("expected a dimension error");
    } catch (const InvalidArgument &e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("[2x3]") != std::string::npos);
        REQUIRE(msg.find("[4x5]") != std::string::npos);
    }
}

TEST_CASE("element ops pass finite-difference checks", "[nn][gradcheck]") {
    Rng rng(5);
    ParameterSet<double> ps;
    auto a = ps.add("a", random_mat(4, 5, rng));
    auto b = ps.add("b", random_mat(5, 3, rng));
    auto row = ps.add("row", random_mat(1, 3, rng));
    auto gain = ps.add("gain", random_mat(1, 3, rng));
    auto bias = ps.add("bias", random_mat(1, 3, rng));
    auto table = ps.add("table", random_mat(6, 3, rng));
    const M c3 = random_mat(3, 2, rng);
    const M c5 = random_mat(5, 2, rng);

    SECTION("matmul") {
        const auto r = grad_check(ps, [&] { return readout(matmul(a, b), c3); }, tol(1e-6));
        REQUIRE(r.passed);
    }
    SECTION("add, add_row, scale") {
        const auto r = grad_check(
            ps, [&] { return readout(scale(add_row(add(matmul(a, b), matmul(a, b)), row), 0.7), c3); },
            tol(1e-6));
        REQUIRE(r.passed);
    }
    SECTION("relu") {
        const auto r = grad_check(ps, [&] { return readout(relu(a), c5); }, tol(1e-6));
        REQUIRE(r.passed);
    }
    SECTION("softmax and log") {
        const auto r = grad_check(ps, [&] { return readout(log(softmax(a)), c5); }, tol(1e-6));
        REQUIRE(r.passed);
    }
    SECTION("layer norm") {
        const auto r = grad_check(ps, [&] { return readout(layer_norm(matmul(a, b), gain, bias), c3); },
                                  tol(1e-6));
        REQUIRE(r.passed);
    }
    SECTION("embedding, gather and repeat") {
        const auto r = grad_check(ps,
                                  [&] {
                                      const auto e = embedding(table, {0, 5, 2, 5});
                                      return readout(repeat_rows(gather_rows(e, {3, 0, 0}), 2), c3);
                                  },
                                  tol(1e-6));
        REQUIRE(r.passed);
    }
    SECTION("reshape and transpose") {
        const auto r = grad_check(ps, [&] { return readout(transpose(reshape(a, 5, 4)), c5); }, tol(1e-6));
        REQUIRE(r.passed);
    }
    SECTION("masked fill") {
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask(4, 5);
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
            mask.data()[i] = i % 3 == 0;
        }
        const auto r = grad_check(ps, [&] { return readout(masked_fill(a, mask, -2.0), c5); }, tol(1e-6));
        REQUIRE(r.passed);
    }
    SECTION("dropout with a fixed mask") {
        const auto r = grad_check(ps,
                                  [&] {
                                      Rng local(9);
                                      return readout(dropout(a, 0.3, true, local), c5);
                                  },
                                  tol(1e-6));
        REQUIRE(r.passed);
    }
    SECTION("mse, mean and nll") {
        const M target = random_mat(4, 3, rng);
        const auto r1 = grad_check(ps, [&] { return mse(matmul(a, b), target); }, tol(1e-6));
        REQUIRE(r1.passed);
        const auto r2 = grad_check(ps, [&] { return mean(matmul(a, b)); }, tol(1e-6));
        REQUIRE(r2.passed);
        const auto r3 = grad_check(
            ps, [&] { return nll_from_logits(matmul(a, b), {0, 2, 1, 2}, {0.5, 0.0, 1.0, 2.0}); },
            tol(1e-6));
        REQUIRE(r3.passed);
    }
}

TEST_CASE("causal attention", "[nn]") {
    Rng rng(6);
    SECTION("single position returns its value row") {
        const M v = random_mat(1, 4, rng);
        const auto out = causal_attention(constant(random_mat(1, 4, rng)),
                                          constant(random_mat(1, 4, rng)), constant(v), 1, 2);
        REQUIRE((out.value() - v).cwiseAbs().maxCoeff() < 1e-15);
    }
    SECTION("identical keys average the visible values") {
        const M k = M::Ones(3, 2);
        const M v = random_mat(3, 2, rng);
        const auto out = causal_attention(constant(random_mat(3, 2, rng)), constant(k), constant(v), 3, 1);
        for (Eigen::Index t = 0; t < 3; ++t) {
            const M expect = v.topRows(t + 1).colwise().mean();
            REQUIRE((out.value().row(t) - expect).cwiseAbs().maxCoeff() < 1e-14);
        }
    }
    SECTION("future positions are invisible") {
        const M q = random_mat(8, 4, rng);
        M k = random_mat(8, 4, rng);
        M v = random_mat(8, 4, rng);
        const auto base = causal_attention(constant(q), constant(k), constant(v), 4, 2);
        k.row(3) = random_mat(1, 4, rng);
        v.row(3) = random_mat(1, 4, rng);
        k.row(6) = random_mat(1, 4, rng);
        const auto pert = causal_attention(constant(q), constant(k), constant(v), 4, 2);
        // Sequence 0: positions 0..2 unchanged; sequence 1: positions 4,5.
        for (Eigen::Index r : {0, 1, 2, 4, 5}) {
            REQUIRE(pert.value().row(r) == base.value().row(r));
        }
    }
    SECTION("gradient check") {
        ParameterSet<double> ps;
        auto q = ps.add("q", random_mat(6, 4, rng));
        auto k = ps.add("k", random_mat(6, 4, rng));
        auto v = ps.add("v", random_mat(6, 4, rng));
        const M c = random_mat(4, 2, rng);
        const auto r = grad_check(ps, [&] { return readout(causal_attention(q, k, v, 3, 2), c); }, tol(1e-6));
        REQUIRE(r.passed);
    }
}

TEST_CASE("linear layer and decoder block gradient checks", "[nn][gradcheck]") {
    Rng rng(7);
    ParameterSet<double> ps;
    Linear<double> lin(ps, "lin", 4, 5, rng);
    const M x = random_mat(3, 4, rng);
    const M c = random_mat(5, 1, rng);
    REQUIRE(grad_check(ps, [&] { return readout(relu(lin(constant(x))), c); }, tol(1e-6)).passed);

    model::TransformerConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.dropout = 0.0;
    ParameterSet<double> bp;
    model::DecoderBlock<double> blk(bp, "blk", cfg, rng);
    const M xb = random_mat(6, 8, rng);
    const M cb = random_mat(8, 1, rng);
    const auto rep = grad_check(bp, [&] { return readout(blk(constant(xb), 3, 0.0, false, nullptr), cb); },
                                tol(1e-4));
    REQUIRE(rep.passed);
    REQUIRE(rep.checked == bp.count());
}

TEST_CASE("block with zero output projection keeps the residual path", "[nn]") {
    Rng rng(8);
    model::TransformerConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    ParameterSet<double> bp;
    model::DecoderBlock<double> blk(bp, "blk", cfg, rng);
    blk.wo.weight.mutable_value().setZero();
    blk.ff2.weight.mutable_value().setZero();
    const M x = random_mat(3, 8, rng);
    const auto y = blk(constant(x), 3, 0.0, false, nullptr);
    const auto expect = blk.ln2(blk.ln1(constant(x)));
    REQUIRE((y.value() - expect.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("permuting heads with matching projections leaves the block invariant", "[nn]") {
    Rng rng(9);
    model::TransformerConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    ParameterSet<double> bp;
    model::DecoderBlock<double> blk(bp, "blk", cfg, rng);
    const M x = random_mat(4, 8, rng);
    const auto before = blk(constant(x), 4, 0.0, false, nullptr).value();
    // Swap head column blocks of q, k, v and the matching rows of wo.
    auto swap_cols = [](Var<double> &w) {
        M &m = w.mutable_value();
        const M left = m.leftCols(4);
        m.leftCols(4) = m.rightCols(4);
        m.rightCols(4) = left;
    };
    for (auto *l : {&blk.wq, &blk.wk, &blk.wv}) {
        swap_cols(l->weight);
        swap_cols(l->bias);
    }
    M &wo = blk.wo.weight.mutable_value();
    const M top = wo.topRows(4);
    wo.topRows(4) = wo.bottomRows(4);
    wo.bottomRows(4) = top;
    const auto after = blk(constant(x), 4, 0.0, false, nullptr).value();
    REQUIRE((after - before).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("corrupted backward fails the gradient check", "[nn][gradcheck]") {
    Rng rng(10);
    ParameterSet<double> ps;
    auto a = ps.add("a", random_mat(3, 3, rng));
    auto bad_square = [](const Var<double> &x) {
        M out = x.value().array().square();
        return Var<double>::make_result(std::move(out), {x}, [](Node<double> &self) {
            auto &p = *self.parents[0];
            // Should be 2x; 3x is wrong on purpose.
            p.grad_ref().array() += 3.0 * p.value.array() * self.grad.array();
        });
    };
    const auto rep = grad_check(ps, [&] { return sum(bad_square(a)); }, tol(1e-6));
    REQUIRE_FALSE(rep.passed);
    REQUIRE(rep.worst_parameter == "a");
}

TEST_CASE("Adam updates", "[nn]") {
    ParameterSet<double> ps;
    auto w = ps.add("w", M::Ones(1, 1));
    w.mutable_grad()(0, 0) = 1.0;
    adam_step(ps, 0.01);
    REQUIRE_THAT(w.value()(0, 0), WithinAbs(1.0 - 0.01, 1e-9));

    ParameterSet<double> zero;
    auto z = zero.add("z", M::Constant(2, 2, 0.5));
    for (int i = 0; i < 10; ++i) {
        z.mutable_grad().setZero();
        adam_step(zero, 0.1);
    }
    REQUIRE((z.value().array() == 0.5).all());

    ParameterSet<double> bowl;
    auto b = bowl.add("b", M::Ones(1, 1));
    for (int i = 0; i < 200; ++i) {
        bowl.zero_grad();
        backward(sum(matmul(b, b)));
        adam_step(bowl, 0.1);
    }
    REQUIRE(std::abs(b.value()(0, 0)) < 1e-2);

    ParameterSet<double> nan;
    auto n = nan.add("broken", M::Ones(1, 1));
    n.mutable_grad()(0, 0) = std::nan("");
    try {
        adam_step(nan, 0.1);
        FAIL("expected a numerical error");
    } catch (const NumericalError &e) {
        REQUIRE(std::string(e.what()).find("broken") != std::string::npos);
    }
}

TEST_CASE("learning rate schedule", "[nn]") {
    REQUIRE(lr_schedule(0, 1000, 50, 1e-3, 1e-7) == 0.0);
    REQUIRE_THAT(lr_schedule(50, 1000, 50, 1e-3, 1e-7), WithinRel(1e-3, 1e-12));
    REQUIRE_THAT(lr_schedule(1000, 1000, 50, 1e-3, 1e-7), WithinRel(1e-7, 1e-9));
    REQUIRE_THAT(lr_schedule(525, 1000, 50, 1e-3, 1e-7), WithinRel(0.5 * (1e-3 + 1e-7), 1e-9));
    REQUIRE_THROWS_AS(lr_schedule(0, 10, 20, 1e-3, 1e-7), ConfigError);
    double prev = 1.0;
    for (long s = 50; s <= 1000; s += 10) {
        const double lr = lr_schedule(s, 1000, 50, 1e-3, 1e-7);
        REQUIRE(lr <= prev);
        prev = lr;
    }
}

TEST_CASE("parameter set rules", "[nn]") {
    ParameterSet<double> ps;
    Rng rng(11);
    (void)ps.add("w", M::Zero(2, 2));
    REQUIRE_THROWS(ps.add("w", M::Zero(2, 2)));
    REQUIRE_THROWS_AS(Linear<double>(ps, "zero", 0, 3, rng), ConfigError);
    REQUIRE(ps.count() == 4);
    const auto &p = ps.find("w");
    REQUIRE(p.step == 0);
    REQUIRE((p.m.array() == 0.0).all());
    REQUIRE((p.v.array() == 0.0).all());
}

TEST_CASE("weight initialisation bounds", "[nn]") {
    Rng rng(12);
    ParameterSet<double> ps;
    Linear<double> lin(ps, "lin", 30, 20, rng);
    const double bound = std::sqrt(6.0 / 50.0);
    REQUIRE(lin.weight.value().cwiseAbs().maxCoeff() <= bound);
    REQUIRE((lin.bias.value().array() == 0.0).all());
    Embedding<double> emb(ps, "emb", 50, 40, rng);
    const double sd = std::sqrt((emb.table.value().array() - emb.table.value().mean()).square().mean());
    REQUIRE_THAT(sd, WithinAbs(0.02, 0.002));
}

TEST_CASE("identical seeds give identical parameters after training steps", "[nn]") {
    auto run = [] {
        Rng rng(13);
        ParameterSet<double> ps;
        Linear<double> l1(ps, "l1", 3, 4, rng);
        Linear<double> l2(ps, "l2", 4, 1, rng);
        const M x = random_mat(8, 3, rng);
        const M y = random_mat(8, 1, rng);
        for (int i = 0; i < 20; ++i) {
            ps.zero_grad();
            Rng drop(static_cast<std::uint64_t>(i));
            backward(mse(l2(dropout(relu(l1(constant(x))), 0.2, true, drop)), y));
            adam_step(ps, 0.01);
        }
        return capture(ps);
    };
    const auto a = run();
    const auto b = run();
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        REQUIRE(a.tensors[i].value == b.tensors[i].value);
    }
}

TEST_CASE("checkpoint round trip is exact", "[nn]") {
    Rng rng(14);
    ParameterSet<double> ps;
    Linear<double> lin(ps, "lin", 3, 2, rng);
    lin.weight.mutable_grad().setOnes();
    lin.bias.mutable_grad().setOnes();
    adam_step(ps, 0.1);
    auto c = capture(ps);
    c.meta["note"] = "x";
    std::stringstream ss;
    write_checkpoint(c, ss);
    const auto back = read_checkpoint(ss);
    REQUIRE(back.meta == c.meta);
    REQUIRE(back.tensors.size() == c.tensors.size());
    for (std::size_t i = 0; i < c.tensors.size(); ++i) {
        REQUIRE(back.tensors[i].name == c.tensors[i].name);
        REQUIRE(back.tensors[i].value == c.tensors[i].value);
        REQUIRE(back.tensors[i].m == c.tensors[i].m);
        REQUIRE(back.tensors[i].v == c.tensors[i].v);
        REQUIRE(back.tensors[i].step == c.tensors[i].step);
    }
    ParameterSet<double> other;
    Rng rng2(99);
    Linear<double> lin2(other, "lin", 3, 2, rng2);
    restore(other, back);
    REQUIRE(lin2.weight.value() == lin.weight.value());

    ParameterSet<double> wrong;
    Linear<double> lin3(wrong, "lin", 3, 3, rng2);
    REQUIRE_THROWS_AS(restore(wrong, back), ParseError);

    std::stringstream junk("not a checkpoint");
    REQUIRE_THROWS_AS(read_checkpoint(junk), ParseError);
}
