#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kbie/checkpoint.hpp"
#include "kbie/errors.hpp"
#include "kbie/gradcheck.hpp"
#include "kbie/optim.hpp"
#include "kbie/tape.hpp"

using namespace kbie;

namespace {

Parameter make_param(const std::string& name, Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    return Parameter(name, Tensor::uniform(std::move(shape), lo, hi, rng));
}

// keep values away from relu/max-pool kinks so central differences are valid
void separate(Tensor& t, double margin) {
    for (size_t i = 0; i < t.values.size(); ++i) {
        if (std::fabs(t.values[i]) < margin) t.values[i] = t.values[i] < 0 ? -margin : margin;
        t.values[i] += 3.0 * margin * static_cast<double>(i % 7);
    }
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
    Tape t;
    auto x = t.constant(Tensor::row({0.0, 0.0, 0.0}));
    auto y = t.softmax(x, 1);
    for (double v : t.value(y).values) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("matmul with identity returns input") {
    Tape t;
    Tensor eye = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    Rng rng(7);
    Tensor x = Tensor::uniform({3, 5}, -2.0, 2.0, rng);
    auto y = t.matmul(t.constant(eye), t.constant(x));
    for (size_t i = 0; i < x.values.size(); ++i) CHECK(t.value(y).values[i] == x.values[i]);
}

TEST_CASE("bce with logit 0 and label 1 is ln 2") {
    Tape t;
    auto loss = t.bce_with_logits(t.constant(Tensor::scalar(0.0)), t.constant(Tensor::scalar(1.0)));
    CHECK(t.value(loss).values[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("shape mismatch names both shapes") {
    Tape t;
    auto a = t.constant(Tensor::zeros({2, 3}));
    auto b = t.constant(Tensor::zeros({4, 5}));
    CHECK_THROWS_WITH_AS(t.matmul(a, b), "matmul: (2,3) x (4,5)", ShapeError);
}

TEST_CASE("backward of sum of squares") {
    Parameter p("x", Tensor::row({1.0, -2.0, 3.0}));
    Tape t;
    auto x = t.leaf(p);
    auto loss = t.sum(t.mul(x, x), -1);
    t.backward(loss);
    CHECK(p.grad.values[0] == doctest::Approx(2.0));
    CHECK(p.grad.values[1] == doctest::Approx(-4.0));
    CHECK(p.grad.values[2] == doctest::Approx(6.0));
}

TEST_CASE("detached parameter keeps zero gradient") {
    Parameter used("used", Tensor::scalar(2.0));
    Parameter detached("detached", Tensor::scalar(5.0));
    Tape t;
    auto x = t.leaf(used);
    t.leaf(detached);  // registered but not consumed by the loss
    auto loss = t.sum(t.mul(x, x), -1);
    t.backward(loss);
    CHECK(used.grad.values[0] == doctest::Approx(4.0));
    CHECK(detached.grad.values[0] == 0.0);
}

TEST_CASE("non-scalar loss rejected") {
    Tape t;
    auto x = t.constant(Tensor::row({1.0, 2.0}));
    CHECK_THROWS_AS(t.backward(x), ContractError);
}

TEST_CASE("affine + tanh + sum gradients match central differences") {
    Rng rng(11);
    Parameter w = make_param("w", {3, 3}, rng);
    Parameter b = make_param("b", {1, 3}, rng);
    Parameter x = make_param("x", {3, 3}, rng);
    auto build = [&](Tape& t) {
        auto h = t.tanh(t.add(t.matmul(t.leaf(x), t.leaf(w)), t.leaf(b)));
        return t.sum(h, -1);
    };

    // independent central-difference oracle, step 1e-5
    for (Parameter* p : {&w, &b, &x}) p->zero_grad();
    Tape t;
    t.backward(build(t));
    for (Parameter* p : {&w, &b, &x}) {
        for (size_t i = 0; i < p->value.values.size(); ++i) {
            double saved = p->value.values[i];
            auto eval = [&](double v) {
                p->value.values[i] = v;
                Tape tt;
                return tt.value(build(tt)).values[0];
            };
            double fd = (eval(saved + 1e-5) - eval(saved - 1e-5)) / 2e-5;
            p->value.values[i] = saved;
            CHECK(grad_rel_err(p->grad.values[i], fd) < 1e-4);
        }
    }
}

TEST_CASE("gradient_check passes on a linear layer") {
    Rng rng(3);
    Parameter w = make_param("w", {4, 2}, rng);
    Parameter b = make_param("b", {1, 2}, rng);
    Parameter x = make_param("x", {3, 4}, rng);
    auto report = gradient_check(
        [&](Tape& t) { return t.sum(t.add(t.matmul(t.leaf(x), t.leaf(w)), t.leaf(b)), -1); },
        {&w, &b, &x}, 1e-4);
    CHECK(report.pass());
}

TEST_CASE("gradient_check passes on softmax + bce composite") {
    Rng rng(5);
    Parameter w = make_param("w", {3, 4}, rng);
    Parameter x = make_param("x", {2, 3}, rng);
    Tensor labels = Tensor::zeros({2, 4});
    labels.at(0, 1) = 1.0;
    labels.at(1, 2) = 1.0;
    auto report = gradient_check(
        [&](Tape& t) {
            auto logits = t.softmax(t.matmul(t.leaf(x), t.leaf(w)), 1);
            return t.mean(t.bce_with_logits(logits, t.constant(labels)), -1);
        },
        {&w, &x}, 1e-4);
    CHECK(report.pass());
}

TEST_CASE("corrupted analytic gradient fails the finite-difference comparison") {
    Rng rng(9);
    Parameter x = make_param("x", {2, 2}, rng);
    auto build = [&](Tape& t) { return t.sum(t.mul(t.leaf(x), t.leaf(x)), -1); };
    x.zero_grad();
    Tape t;
    t.backward(build(t));
    double corrupted = x.grad.values[0] + 0.5;  // deliberately wrong rule
    double fd = finite_difference(build, x, 0, 1e-5);
    CHECK(grad_rel_err(corrupted, fd) > 1e-4);
    CHECK(grad_rel_err(x.grad.values[0], fd) < 1e-4);
}

TEST_CASE("gradients match finite differences for every op kind") {
    const int kSeeds = 20;
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(static_cast<uint64_t>(seed) * 977 + 13);
        int m = 2 + rng.next_int(3);
        int k = 2 + rng.next_int(3);
        int n = 2 + rng.next_int(3);

        auto check = [&](const char* what, GraphBuilder build, std::vector<Parameter*> params) {
            auto report = gradient_check(build, params, 1e-4);
            INFO(what << " seed " << seed << " worst " << report.worst);
            CHECK(report.pass());
        };

        Tensor weight = Tensor::uniform({m, n}, -1, 1, rng);

        {
            Parameter a = make_param("a", {m, k}, rng);
            Parameter b = make_param("b", {k, n}, rng);
            Tensor w = Tensor::uniform({m, n}, -1, 1, rng);
            check("matmul", [&](Tape& t) { return t.sum(t.mul(t.matmul(t.leaf(a), t.leaf(b)), t.constant(w)), -1); },
                  {&a, &b});
        }
        {
            Parameter a = make_param("a", {m, n}, rng);
            Parameter b = make_param("b", {m, n}, rng);
            check("add", [&](Tape& t) { return t.sum(t.mul(t.add(t.leaf(a), t.leaf(b)), t.constant(weight)), -1); },
                  {&a, &b});
            Parameter row = make_param("row", {1, n}, rng);
            check("add-broadcast",
                  [&](Tape& t) { return t.sum(t.mul(t.add(t.leaf(a), t.leaf(row)), t.constant(weight)), -1); },
                  {&a, &row});
            Parameter col = make_param("col", {m, 1}, rng);
            check("mul-broadcast",
                  [&](Tape& t) { return t.sum(t.mul(t.mul(t.leaf(a), t.leaf(col)), t.constant(weight)), -1); },
                  {&a, &col});
            check("mul", [&](Tape& t) { return t.sum(t.mul(t.mul(t.leaf(a), t.leaf(b)), t.constant(weight)), -1); },
                  {&a, &b});
        }
        {
            Parameter a = make_param("a", {m, k}, rng);
            Parameter b = make_param("b", {m, n}, rng);
            Tensor w = Tensor::uniform({m, k + n}, -1, 1, rng);
            check("concat",
                  [&](Tape& t) {
                      auto c = t.concat({t.leaf(a), t.leaf(b)}, 1);
                      return t.sum(t.mul(c, t.constant(w)), -1);
                  },
                  {&a, &b});
        }
        {
            Parameter a = make_param("a", {m, 3}, rng);
            check("slice", [&](Tape& t) { return t.sum(t.slice(t.leaf(a), 1, 1, 3), -1); }, {&a});
        }
        {
            Parameter a = make_param("a", {m, n}, rng);
            check("sigmoid", [&](Tape& t) { return t.sum(t.mul(t.sigmoid(t.leaf(a)), t.constant(weight)), -1); }, {&a});
            check("tanh", [&](Tape& t) { return t.sum(t.mul(t.tanh(t.leaf(a)), t.constant(weight)), -1); }, {&a});
            check("softmax", [&](Tape& t) { return t.sum(t.mul(t.softmax(t.leaf(a), 1), t.constant(weight)), -1); }, {&a});
            check("sum-axis0", [&](Tape& t) { return t.sum(t.sum(t.leaf(a), 0), -1); }, {&a});
            check("mean-axis1", [&](Tape& t) { return t.sum(t.mean(t.leaf(a), 1), -1); }, {&a});
            check("scalar-scale", [&](Tape& t) { return t.sum(t.scalar_scale(t.leaf(a), -2.5), -1); }, {&a});
            check("log",
                  [&](Tape& t) {
                      auto pos = t.add(t.sigmoid(t.leaf(a)), t.constant(Tensor::full({m, n}, 0.5)));
                      return t.sum(t.mul(t.log(pos), t.constant(weight)), -1);
                  },
                  {&a});
        }
        {
            Parameter a = make_param("a", {m, n}, rng);
            separate(a.value, 0.05);
            check("relu", [&](Tape& t) { return t.sum(t.mul(t.relu(t.leaf(a)), t.constant(weight)), -1); }, {&a});
            check("max-pool", [&](Tape& t) { return t.sum(t.max_pool(t.leaf(a), 0), -1); }, {&a});
        }
        {
            Parameter table = make_param("table", {5, n}, rng);
            std::vector<int> rows = {0, 3, 3, 1};
            Tensor w = Tensor::uniform({4, n}, -1, 1, rng);
            check("embedding-lookup",
                  [&](Tape& t) { return t.sum(t.mul(t.embedding_lookup(t.leaf(table), rows), t.constant(w)), -1); },
                  {&table});
        }
        {
            Parameter logits = make_param("logits", {m, n}, rng);
            Tensor labels = Tensor::zeros({m, n});
            for (int i = 0; i < m; ++i) labels.at(i, i % n) = 1.0;
            check("bce-with-logits",
                  [&](Tape& t) { return t.mean(t.bce_with_logits(t.leaf(logits), t.constant(labels)), -1); },
                  {&logits});
        }
        {
            Parameter a = make_param("a", {m, n}, rng);
            // tapes rebuild with the same dropout seed, so masks repeat
            check("dropout",
                  [&](Tape& t) { return t.sum(t.mul(t.dropout(t.leaf(a), 0.4, true), t.constant(weight)), -1); },
                  {&a});
        }
    }
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        int m = 1 + rng.next_int(6), n = 1 + rng.next_int(8);
        Tape t;
        auto y = t.softmax(t.constant(Tensor::uniform({m, n}, -30, 30, rng)), 1);
        const Tensor& v = t.value(y);
        for (int i = 0; i < m; ++i) {
            double s = 0;
            for (int j = 0; j < n; ++j) {
                CHECK(v.at(i, j) >= 0.0);
                s += v.at(i, j);
            }
            CHECK(std::fabs(s - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("concat then matching slices reconstruct inputs exactly") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        int m = 1 + rng.next_int(4);
        int n1 = 1 + rng.next_int(4), n2 = 1 + rng.next_int(4);
        int axis = rng.next_int(2);
        Shape sa = axis == 0 ? Shape{n1, m} : Shape{m, n1};
        Shape sb = axis == 0 ? Shape{n2, m} : Shape{m, n2};
        Tensor a = Tensor::uniform(sa, -5, 5, rng);
        Tensor b = Tensor::uniform(sb, -5, 5, rng);
        Tape t;
        auto c = t.concat({t.constant(a), t.constant(b)}, axis);
        auto ra = t.slice(c, axis, 0, n1);
        auto rb = t.slice(c, axis, n1, n1 + n2);
        CHECK(t.value(ra).values == a.values);
        CHECK(t.value(rb).values == b.values);
    }
}

TEST_CASE("dropout with rate zero or eval mode is the identity") {
    Rng rng(41);
    Tensor x = Tensor::uniform({4, 5}, -2, 2, rng);
    Tape t(123);
    auto a = t.dropout(t.constant(x), 0.0, true);
    auto b = t.dropout(t.constant(x), 0.7, false);
    CHECK(t.value(a).values == x.values);
    CHECK(t.value(b).values == x.values);
}

TEST_CASE("debug numerics flags non-finite op output") {
    set_debug_numerics(true);
    Tape t;
    auto z = t.constant(Tensor::scalar(0.0));
    CHECK_THROWS_AS(t.log(z), NumericsError);
    set_debug_numerics(false);
    Tape t2;
    CHECK_NOTHROW(t2.log(t2.constant(Tensor::scalar(0.0))));
}

TEST_CASE("non-finite values rejected at tensor creation") {
    CHECK_THROWS_AS(Tensor({1, 2}, {1.0, std::nan("")}), NumericsError);
    CHECK_THROWS_AS(Tensor({1, 1}, {INFINITY}), NumericsError);
}

TEST_CASE("adam first step moves a unit-gradient scalar by about lr") {
    Parameter p("p", Tensor::scalar(1.0));
    p.grad.values[0] = 1.0;
    Adam adam({.lr = 0.1});
    adam.step({&p});
    // bias correction makes the first step almost exactly lr
    CHECK(p.value.values[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(p.grad.values[0] == 0.0);  // zeroed afterward
}

TEST_CASE("adam with zero gradient leaves parameter unchanged") {
    Parameter p("p", Tensor::scalar(3.0));
    Adam adam({.lr = 0.5});
    adam.step({&p});
    CHECK(p.value.values[0] == doctest::Approx(3.0));
}

TEST_CASE("adam decreases monotonically under constant positive gradient") {
    Parameter p("p", Tensor::scalar(1.0));
    Adam adam({.lr = 0.1});
    double prev = p.value.values[0];
    for (int i = 0; i < 2; ++i) {
        p.grad.values[0] = 1.0;
        adam.step({&p});
        CHECK(p.value.values[0] < prev);
        prev = p.value.values[0];
    }
}

TEST_CASE("adam rejects missing gradient buffer") {
    Parameter p("p", Tensor::scalar(1.0));
    p.grad.values.clear();
    Adam adam;
    std::vector<Parameter*> ps{&p};
    CHECK_THROWS_AS(adam.step(ps), ContractError);
}

TEST_CASE("checkpoint round-trips bit-exact") {
    Rng rng(55);
    Parameter a("model/w", Tensor::uniform({3, 4}, -1, 1, rng));
    Parameter b("model/bias", Tensor::uniform({1, 4}, -1, 1, rng));
    Parameter c("emb", Tensor::uniform({7, 2}, -1e9, 1e9, rng));
    auto path = std::filesystem::temp_directory_path() / "kbie_ckpt_test.bin";
    write_checkpoint_file(path.string(), {&a, &b, &c});

    auto entries = read_checkpoint_file(path.string());
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].first == "model/w");
    CHECK(entries[0].second.values == a.value.values);
    CHECK(entries[2].second.values == c.value.values);

    // byte-identical on rewrite
    std::ostringstream again;
    write_checkpoint(again, {{"model/w", &entries[0].second},
                             {"model/bias", &entries[1].second},
                             {"emb", &entries[2].second}});
    std::ifstream in(path, std::ios::binary);
    std::stringstream orig;
    orig << in.rdbuf();
    CHECK(orig.str() == again.str());

    Parameter a2("model/w", Tensor::zeros({3, 4}));
    load_into_params(entries, {&a2});
    CHECK(a2.value.values == a.value.values);

    Parameter wrong("model/w", Tensor::zeros({4, 3}));
    CHECK_THROWS_AS(load_into_params(entries, {&wrong}), ValidationError);
    std::filesystem::remove(path);
}

TEST_CASE("embedding lookup gathers rows and validates indices") {
    Tape t;
    Tensor table = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
    auto n = t.embedding_lookup(t.constant(table), {2, 0});
    CHECK(t.value(n).values == std::vector<double>{5, 6, 1, 2});
    CHECK_THROWS_AS(t.embedding_lookup(t.constant(table), {3}), ShapeError);
}
