#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>

#include "cgm/measurement/sampling.hpp"
#include "cgm/model/sampler.hpp"
#include "cgm/model/trainer.hpp"
#include "cgm/model/transformer.hpp"
#include "cgm/nn/gradcheck.hpp"
#include "cgm/quantum/ground_state.hpp"
#include "cgm/quantum/hamiltonian.hpp"

using namespace cgm;
using namespace cgm::model;
using Catch::Matchers::WithinAbs;

namespace {

using M = Mat<double>;

TransformerConfig small_gcn(int rows, int cols, int vocab = 6) {
    TransformerConfig c;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_blocks = 2;
    c.dropout = 0.0;
    c.vocab_size = vocab;
    c.max_sites = rows * cols;
    c.grid_rows = rows;
    c.grid_cols = cols;
    c.gcn_hidden = {4, 3, 2};
    return c;
}

TransformerConfig small_linear(int max_sites, int vocab = 2) {
    TransformerConfig c;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_blocks = 2;
    c.dropout = 0.0;
    c.vocab_size = vocab;
    c.max_sites = max_sites;
    c.conditioner = ConditionerKind::linear;
    return c;
}

// Output and layer-norm biases start at zero; give every parameter some
// structure so degenerate symmetries do not hide bugs.
void randomize(ConditionalModel<double> &m, std::uint64_t seed, double s = 0.5,
               bool keep_conditioner = false) {
    Rng rng(seed);
    for (auto &p : m.parameters().items()) {
        if (keep_conditioner && p.name.rfind("cond.", 0) == 0) {
            continue;
        }
        M &v = p.var.mutable_value();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            v.data()[i] += s * normal01(rng);
        }
    }
}

quantum::CouplingGraph random_graph(quantum::GridDims dims, std::uint64_t seed) {
    Rng rng(seed);
    return quantum::sample_coupling_graph(dims, rng);
}

measurement::RydbergParams rydberg(int cols, double r0, double d, double t = 0.0) {
    measurement::RydbergParams p;
    p.n_rows = 1;
    p.n_cols = cols;
    p.a = 5.48;
    p.omega = 4.0 * M_PI;
    p.delta = d * p.omega;
    p.T = t;
    p.r0_over_a = r0;
    return p;
}

Outcome seq_of(std::size_t idx, int n, int v) {
    Outcome s(static_cast<std::size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(idx % static_cast<std::size_t>(v));
        idx /= static_cast<std::size_t>(v);
    }
    return s;
}

double total(const std::vector<double> &p) {
    double s = 0.0;
    for (double v : p) {
        s += v;
    }
    return s;
}

} // namespace

TEST_CASE("positional encoding values", "[model]") {
    REQUIRE(positional_encoding(0, 0, 16) == 0.0);
    REQUIRE(positional_encoding(0, 4, 16) == 0.0);
    REQUIRE(positional_encoding(0, 1, 16) == 1.0);
    REQUIRE(positional_encoding(0, 7, 16) == 1.0);
    REQUIRE_THAT(positional_encoding(1, 0, 16), WithinAbs(std::sin(1.0), 1e-15));
    REQUIRE_THAT(positional_encoding(3, 5, 16), WithinAbs(std::cos(3.0 / std::pow(10000.0, 4.0 / 16.0)), 1e-15));
    const auto t = positional_table<double>(4, 16);
    REQUIRE(t(2, 3) == positional_encoding(2, 3, 16));
}

TEST_CASE("model config validation", "[model]") {
    auto c = small_gcn(2, 2);
    c.d_model = 10;
    c.n_heads = 4;
    REQUIRE_THROWS_AS(ConditionalModel<double>(c, 1), ConfigError);
    c = small_gcn(2, 2);
    c.grid_rows = 0;
    REQUIRE_THROWS_AS(ConditionalModel<double>(c, 1), ConfigError);
    REQUIRE_THROWS_AS(conditioner_from_string("mlp"), ConfigError);
    c = small_gcn(2, 2);
    nlohmann::json j = c;
    TransformerConfig back;
    from_json(j, back);
    REQUIRE(back.d_model == c.d_model);
    REQUIRE(back.gcn_hidden == c.gcn_hidden);
    j["bogus"] = 1;
    REQUIRE_THROWS_AS(from_json(j, back), ConfigError);
}

TEST_CASE("exhaustive distribution is normalised", "[model][property]") {
    for (int seed = 0; seed < 3; ++seed) {
        ConditionalModel<double> g(small_gcn(1, 3), 10 + seed);
        randomize(g, 20 + seed);
        const Condition cg = random_graph({1, 3}, 30 + seed);
        for (int n : {2, 3}) {
            REQUIRE_THAT(total(exhaustive_distribution(g, cg, n)), WithinAbs(1.0, 1e-8));
        }
        ConditionalModel<double> l(small_linear(3), 40 + seed);
        randomize(l, 50 + seed);
        const Condition cl = rydberg(3, 1.5, 2.0);
        for (int n : {2, 3}) {
            REQUIRE_THAT(total(exhaustive_distribution(l, cl, n)), WithinAbs(1.0, 1e-8));
        }
    }
    ConditionalModel<double> big(small_linear(30), 1);
    REQUIRE_THROWS_AS(exhaustive_distribution(big, Condition{rydberg(3, 1.5, 2.0)}, 24), InvalidArgument);
}

TEST_CASE("future tokens never change earlier logits", "[model][property]") {
    ConditionalModel<double> m(small_gcn(2, 3), 3);
    randomize(m, 4);
    const Condition c = random_graph({2, 3}, 5);
    nn::NoGradGuard guard;
    const auto emb = m.condition_embedding({c});
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> in{m.config().bos()};
        for (int i = 0; i < 5; ++i) {
            in.push_back(static_cast<int>(uniform_index(rng, 6)));
        }
        const int t = static_cast<int>(uniform_index(rng, 6));
        auto alt = in;
        for (int i = t + 1; i < 6; ++i) {
            alt[static_cast<std::size_t>(i)] = static_cast<int>(uniform_index(rng, 6));
        }
        const auto a = m.logits({in}, emb, false, nullptr).value();
        const auto b = m.logits({alt}, emb, false, nullptr).value();
        REQUIRE(a.topRows(t + 1) == b.topRows(t + 1));
    }
}

TEST_CASE("suppressed conditioner makes outputs condition independent", "[model][property]") {
    // Large random GCN biases can kill every ReLU unit; keep the
    // conditioner at its initial weights.
    ConditionalModel<double> m(small_gcn(2, 2), 7);
    randomize(m, 8, 0.5, true);
    const Condition a = random_graph({2, 2}, 9);
    const Condition b = random_graph({2, 2}, 10);
    REQUIRE(m.next_distribution({1, 4}, a) != m.next_distribution({1, 4}, b));
    m.suppress_condition = true;
    REQUIRE(m.next_distribution({1, 4}, a) == m.next_distribution({1, 4}, b));

    ConditionalModel<double> l(small_linear(4), 11);
    randomize(l, 12);
    const Condition x = rydberg(4, 1.2, 1.0);
    const Condition y = rydberg(4, 2.2, 3.0);
    REQUIRE(l.next_distribution({1}, x) != l.next_distribution({1}, y));
    l.suppress_condition = true;
    REQUIRE(l.next_distribution({1}, x) == l.next_distribution({1}, y));
}

TEST_CASE("zero output projection gives the uniform model", "[model]") {
    ConditionalModel<double> m(small_gcn(1, 3), 13);
    randomize(m, 14);
    m.parameters().find("out.weight").var.mutable_value().setZero();
    m.parameters().find("out.bias").var.mutable_value().setZero();
    const Condition c = random_graph({1, 3}, 15);
    for (double p : m.next_distribution({2}, c)) {
        REQUIRE_THAT(p, WithinAbs(1.0 / 6.0, 1e-15));
    }
    for (double p : exhaustive_distribution(m, c, 3)) {
        REQUIRE_THAT(p, WithinAbs(1.0 / 216.0, 1e-15));
    }
    std::vector<Outcome> recs{{0, 1, 2}, {5, 5, 5}, {3, 0, 4}};
    Batch batch{{c}, {0, 0, 0}, {&recs[0], &recs[1], &recs[2]}};
    REQUIRE_THAT(m.loss(batch, false, nullptr).item(), WithinAbs(3.0 * std::log(6.0), 1e-12));
}

TEST_CASE("loss equals exhaustive cross entropy", "[model]") {
    ConditionalModel<double> m(small_gcn(1, 2), 16);
    randomize(m, 17);
    const Condition c = random_graph({1, 2}, 18);
    const auto p = exhaustive_distribution(m, c, 2);
    Rng rng(19);
    std::vector<Outcome> recs;
    double ce = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto idx = uniform_index(rng, 36);
        recs.push_back(seq_of(idx, 2, 6));
        ce -= std::log(p[idx]) / 50.0;
    }
    Batch batch{{c}, std::vector<int>(50, 0), {}};
    for (const auto &r : recs) {
        batch.sequences.push_back(&r);
    }
    REQUIRE_THAT(m.loss(batch, false, nullptr).item(), WithinAbs(ce, 1e-8));

    // Loss is bounded below by the empirical entropy.
    std::map<std::size_t, double> freq;
    for (const auto &r : recs) {
        freq[static_cast<std::size_t>(r[0]) * 6 + r[1]] += 1.0 / 50.0;
    }
    double h = 0.0;
    for (const auto &[k, f] : freq) {
        h -= f * std::log(f);
    }
    REQUIRE(m.loss(batch, false, nullptr).item() >= h);
}

TEST_CASE("padded records score as if alone", "[model]") {
    ConditionalModel<double> m(small_linear(5), 20);
    randomize(m, 21);
    const Condition a = rydberg(3, 1.5, 1.0);
    const Condition b = rydberg(5, 1.5, 1.0);
    const Outcome s3{1, 0, 1};
    const Outcome s5{0, 1, 0, 1, 1};
    const double l3 = m.loss({{a}, {0}, {&s3}}, false, nullptr).item();
    const double l5 = m.loss({{b}, {0}, {&s5}}, false, nullptr).item();
    const double mix = m.loss({{a, b}, {0, 1}, {&s3, &s5}}, false, nullptr).item();
    REQUIRE_THAT(mix, WithinAbs(0.5 * (l3 + l5), 1e-12));
}

TEST_CASE("linear conditioner is affine in the features", "[model]") {
    ConditionalModel<double> m(small_linear(3), 22);
    randomize(m, 23);
    measurement::RydbergParams zero{};
    zero.n_rows = 0;
    zero.n_cols = 0;
    const auto e0 = m.condition_embedding({zero}).value();
    REQUIRE(e0 == m.parameters().find("cond.linear.bias").var.value());

    const auto x = rydberg(3, 1.5, 1.0, 0.5);
    const auto y = rydberg(2, 2.0, 0.5, 0.25);
    auto xy = x;
    xy.n_rows += y.n_rows;
    xy.n_cols += y.n_cols;
    xy.a += y.a;
    xy.omega += y.omega;
    xy.delta = (x.delta_over_omega() + y.delta_over_omega()) * xy.omega;
    xy.T += y.T;
    const auto fx = rydberg_features(x);
    M xv(1, kRydbergFeatures);
    for (int k = 0; k < kRydbergFeatures; ++k) {
        xv(0, k) = fx[static_cast<std::size_t>(k)];
    }
    const M wx = xv * m.parameters().find("cond.linear.weight").var.value();
    const M diff = m.condition_embedding({xy}).value() - m.condition_embedding({y}).value();
    REQUIRE((diff - wx).cwiseAbs().maxCoeff() < 1e-12);

    m.normalizer = FeatureNormalizer::fit({rydberg_features(x), rydberg_features(y)});
    const auto n = m.normalizer.apply(rydberg_features(x));
    REQUIRE_THAT(n[1], WithinAbs(1.0, 1e-12));
    REQUIRE(n[2] == 0.0); // zero spread: centred only
    REQUIRE_THROWS_AS(m.condition_embedding({random_graph({1, 3}, 1)}), ConfigError);
}

TEST_CASE("gcn conditioner examples", "[model]") {
    SECTION("all-zero couplings give the pooled bias at initialisation") {
        ConditionalModel<double> m(small_gcn(2, 2), 24);
        Rng rng(25);
        M &pb = m.parameters().find("cond.pool.bias").var.mutable_value();
        for (Eigen::Index i = 0; i < pb.size(); ++i) {
            pb.data()[i] = normal01(rng);
        }
        const auto e = m.condition_embedding({quantum::uniform_coupling_graph({2, 2}, 0.0)}).value();
        REQUIRE((e - pb).cwiseAbs().maxCoeff() < 1e-15);
    }
    SECTION("single node") {
        auto cfg = small_gcn(1, 1);
        ConditionalModel<double> m(cfg, 26);
        REQUIRE(normalized_adjacency(quantum::CouplingGraph({1, 1}))(0, 0) == 1.0);
        REQUIRE(weighted_degree(quantum::CouplingGraph({1, 1}))(0) == 0.0);
    }
    SECTION("relabelled isomorphic graphs with node-symmetric pooling") {
        ConditionalModel<double> m(small_gcn(2, 2), 27);
        randomize(m, 28);
        M &w = m.parameters().find("cond.pool.weight").var.mutable_value();
        const Eigen::Index h = w.rows() / 4;
        for (int i = 1; i < 4; ++i) {
            w.middleRows(i * h, h) = w.topRows(h);
        }
        const auto g = random_graph({2, 2}, 29);
        // Mirror columns: site (r, c) -> (r, 1 - c).
        quantum::CouplingGraph mirrored({2, 2});
        const quantum::GridDims d{2, 2};
        for (const auto &[e, wt] : g.couplings()) {
            const auto f = [&](int s) { return d.site_of(d.row_of(s), 1 - d.col_of(s)); };
            mirrored.set(f(e.first), f(e.second), wt);
        }
        REQUIRE(!(mirrored == g));
        const auto a = m.condition_embedding({g}).value();
        const auto b = m.condition_embedding({mirrored}).value();
        REQUIRE((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("normalised adjacency of a two-site graph") {
        quantum::CouplingGraph g({1, 2});
        g.set(0, 1, 1.0);
        const auto a = normalized_adjacency(g);
        REQUIRE((a.array() - 0.5).abs().maxCoeff() < 1e-15);
        REQUIRE(weighted_degree(g)(1) == 1.0);
    }
    SECTION("wrong grid is rejected") {
        ConditionalModel<double> m(small_gcn(2, 2), 30);
        REQUIRE_THROWS_AS(m.condition_embedding({random_graph({1, 4}, 1)}), InvalidArgument);
    }
}

TEST_CASE("full model passes the gradient check", "[model][gradcheck]") {
    nn::GradCheckOptions opt;
    opt.tolerance = 1e-4;
    // Key biases have exactly zero gradient (softmax shift invariance);
    // central-difference noise there is ~1e-10.
    opt.floor = 1e-5;
    {
        ConditionalModel<double> m(small_gcn(1, 3), 31);
        randomize(m, 32, 0.3);
        const Condition c1 = random_graph({1, 3}, 33);
        const Condition c2 = random_graph({1, 3}, 34);
        const std::vector<Outcome> recs{{0, 3, 5}, {2, 2, 1}, {4, 0, 1}};
        const Batch b{{c1, c2}, {0, 1, 0}, {&recs[0], &recs[1], &recs[2]}};
        const auto r = nn::grad_check(m.parameters(), [&] { return m.loss(b, false, nullptr); }, opt);
        INFO("worst " << r.worst_parameter << " err " << r.max_rel_error);
        REQUIRE(r.passed);
    }
    {
        ConditionalModel<double> m(small_linear(4), 35);
        randomize(m, 36, 0.3);
        const std::vector<Outcome> recs{{0, 1, 1, 0}, {1, 1, 0}};
        const Batch b{{rydberg(4, 1.5, 1.0), rydberg(3, 2.0, 2.0)}, {0, 1}, {&recs[0], &recs[1]}};
        const auto r = nn::grad_check(m.parameters(), [&] { return m.loss(b, false, nullptr); }, opt);
        INFO("worst " << r.worst_parameter << " err " << r.max_rel_error);
        REQUIRE(r.passed);
    }
}

TEST_CASE("sampler matches the exhaustive distribution", "[model]") {
    ConditionalModel<double> m(small_gcn(1, 2), 37);
    randomize(m, 38);
    const Condition c = random_graph({1, 2}, 39);
    const auto p = exhaustive_distribution(m, c, 2);
    const std::size_t n = 100000;
    const auto s = sample(m, c, 2, n, 40);
    std::vector<double> f(36, 0.0);
    for (const auto &o : s) {
        REQUIRE(o.size() == 2);
        f[static_cast<std::size_t>(o[0]) * 6 + o[1]] += 1.0 / static_cast<double>(n);
    }
    double tv = 0.0;
    for (std::size_t i = 0; i < 36; ++i) {
        tv += 0.5 * std::abs(f[i] - p[i]);
    }
    REQUIRE(tv <= 0.01);
    REQUIRE(sample(m, c, 2, 50, 40, 7) == sample(m, c, 2, 50, 40, 2048));
    REQUIRE(sample(m, c, 2, 50, 40) != sample(m, c, 2, 50, 41));
}

TEST_CASE("memorising one record drives the loss to zero", "[model]") {
    auto cfg = small_gcn(1, 3);
    cfg.d_model = 16;
    ConditionalModel<double> m(cfg, 42);
    const Condition c = random_graph({1, 3}, 43);
    const Outcome rec{5, 0, 3};
    const Batch b{{c}, {0}, {&rec}};
    for (int i = 0; i < 500; ++i) {
        m.parameters().zero_grad();
        const auto l = m.loss(b, true, nullptr);
        nn::backward(l);
        nn::adam_step(m.parameters(), 1e-2);
    }
    REQUIRE(m.loss(b, false, nullptr).item() < 1e-3);
    for (const auto &o : sample(m, c, 3, 200, 44)) {
        REQUIRE(o == rec);
    }
}

TEST_CASE("training", "[model]") {
    const quantum::GridDims dims{1, 2};
    measurement::Dataset d;
    d.family = "heisenberg";
    d.rows = 1;
    d.cols = 2;
    for (int s = 0; s < 4; ++s) {
        const auto g = random_graph(dims, 100 + static_cast<std::uint64_t>(s));
        const auto gs = quantum::ground_state(quantum::build_heisenberg(g));
        const std::string id = "s" + std::to_string(s);
        d.systems.push_back({id, g});
        for (auto &o : measurement::sample_pauli6(gs.state, 100, 200 + static_cast<std::uint64_t>(s))) {
            d.records.push_back({id, std::move(o)});
        }
    }
    const auto data = make_training_set(d);
    TrainConfig tc;
    tc.epochs = 6;
    tc.batch_size = 50;
    tc.warmup_epochs = 1;
    tc.peak_lr = 3e-3;
    tc.seed = 45;

    SECTION("loss decreases") {
        ConditionalModel<double> m(small_gcn(1, 2), 46);
        auto st = initial_state(tc);
        train(m, data, tc, st);
        REQUIRE(st.history.size() == 6);
        REQUIRE(st.history[4] < st.history[0]);
    }
    SECTION("resume is bit exact") {
        auto cfg = small_gcn(1, 2);
        cfg.dropout = 0.1;
        ConditionalModel<double> full(cfg, 47);
        auto fs = initial_state(tc);
        train(full, data, tc, fs);

        ConditionalModel<double> half(cfg, 47);
        auto hs = initial_state(tc);
        train(half, data, tc, hs, 3);
        std::stringstream ss;
        nn::write_checkpoint(model_checkpoint(half, {"heisenberg", measurement::BasisKind::pauli6}, tc, hs), ss);
        auto loaded = load_model(nn::read_checkpoint(ss));
        REQUIRE(loaded.state.epoch == 3);
        train(loaded.model, data, loaded.train_config, loaded.state);
        REQUIRE(loaded.state.history == fs.history);
        for (const auto &p : full.parameters().items()) {
            REQUIRE(loaded.model.parameters().find(p.name).var.value() == p.var.value());
        }
    }
    SECTION("empty dataset") {
        ConditionalModel<double> m(small_gcn(1, 2), 48);
        auto st = initial_state(tc);
        REQUIRE_THROWS_AS(train(m, TrainingSet{}, tc, st), NoDataError);
        REQUIRE_THROWS_AS(m.loss(Batch{}, false, nullptr), NoDataError);
    }
}
