#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "astnet/errors.hpp"
#include "astnet/gradcheck.hpp"
#include "astnet/lstm.hpp"
#include "astnet/ops.hpp"
#include "test_support.hpp"

using namespace astnet;
using testing_support::random_tensor;

namespace {

using Vec = std::vector<double>;

double sigm(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Vec gate(const Parameter& wx, const Parameter& wh, const Parameter& b, const Vec& x, const Vec& h) {
    const std::size_t p = b.value.size();
    Vec out(p);
    for (std::size_t r = 0; r < p; ++r) {
        double z = b.value[r];
        for (std::size_t k = 0; k < x.size(); ++k) z += wx.value.at(r, k) * x[k];
        for (std::size_t k = 0; k < h.size(); ++k) z += wh.value.at(r, k) * h[k];
        out[r] = z;
    }
    return out;
}

// Direct loop over the six cell equations on plain doubles.
void oracle_step(const LSTMCellParams& p, const Vec& x, const Vec& h_prev, const Vec& c_prev, Vec& h, Vec& c) {
    const Vec zi = gate(*p.W_xi, *p.W_hi, *p.b_i, x, h_prev);
    const Vec zf = gate(*p.W_xf, *p.W_hf, *p.b_f, x, h_prev);
    const Vec zo = gate(*p.W_xo, *p.W_ho, *p.b_o, x, h_prev);
    const Vec zg = gate(*p.W_xc, *p.W_hc, *p.b_c, x, h_prev);
    const std::size_t n = zi.size();
    h.assign(n, 0.0);
    c.assign(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        c[r] = sigm(zf[r]) * c_prev[r] + sigm(zi[r]) * std::tanh(zg[r]);
        h[r] = sigm(zo[r]) * std::tanh(c[r]);
    }
}

Vec as_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

void fill_all(const LSTMCellParams& p, double value) {
    for (Parameter* q : p.all()) q->value.fill(value);
}

void randomize(const LSTMCellParams& p, Rng& rng, double scale = 1.0) {
    for (Parameter* q : p.all())
        for (auto& v : q->value.values()) v = rng.uniform(-scale, scale);
}

struct CellFixture {
    ParameterStore store;
    LSTMCellParams params;
    CellFixture(std::size_t d_in, std::size_t p, std::uint64_t seed = 0) {
        Rng rng(seed);
        params = LSTMCellParams::create(store, "cell", d_in, p, {}, rng);
    }
};

}  // namespace

TEST(CellStep, ZeroParametersAndZeroStateGiveZero) {
    CellFixture f(3, 4);
    fill_all(f.params, 0.0);
    Tape tape;
    LayerState prev{tape.constant(Tensor({4})), tape.constant(Tensor({4}))};
    LayerState next = cell_step(f.params, tape.constant(Tensor({3})), prev);
    for (double v : next.h.value().values()) EXPECT_EQ(v, 0.0);
    for (double v : next.c.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(CellStep, ZeroParametersHalveTheCellState) {
    CellFixture f(3, 4);
    fill_all(f.params, 0.0);
    Tape tape;
    const Tensor v = Tensor::vector({1.0, -2.0, 0.5, 3.0});
    LayerState next = cell_step(f.params, tape.constant(Tensor::vector({0.3, 0.1, -0.2})),
                                {tape.constant(Tensor({4})), tape.constant(v)});
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_DOUBLE_EQ(next.c.value()[r], 0.5 * v[r]);
        EXPECT_DOUBLE_EQ(next.h.value()[r], 0.5 * std::tanh(0.5 * v[r]));
    }
}

TEST(CellStep, MatchesScalarLoopOnRandomCases) {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d_in = 1 + rng.below(6), p = 1 + rng.below(6);
        CellFixture f(d_in, p, trial);
        randomize(f.params, rng);
        const Tensor x = random_tensor({d_in}, rng, 2.0);
        const Tensor h0 = random_tensor({p}, rng);
        const Tensor c0 = random_tensor({p}, rng, 2.0);
        Tape tape(Precision::high);
        LayerState next = cell_step(f.params, tape.constant(x), {tape.constant(h0), tape.constant(c0)});
        Vec h, c;
        oracle_step(f.params, as_vec(x), as_vec(h0), as_vec(c0), h, c);
        for (std::size_t r = 0; r < p; ++r) {
            worst = std::max(worst, std::abs(next.h.value()[r] - h[r]));
            worst = std::max(worst, std::abs(next.c.value()[r] - c[r]));
        }
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(CellStep, HiddenStateIsBounded) {
    Rng rng(3);
    CellFixture f(4, 5);
    randomize(f.params, rng, 10.0);
    Tape tape;
    LayerState s{tape.constant(Tensor({5})), tape.constant(Tensor({5}))};
    for (int t = 0; t < 30; ++t) {
        s = cell_step(f.params, tape.constant(random_tensor({4}, rng, 50.0)), s);
        for (double v : s.h.value().values()) EXPECT_LE(std::abs(v), 1.0);
    }
}

TEST(CellStep, SaturatedGatesPassMemoryThrough) {
    Rng rng(4);
    CellFixture f(3, 4);
    randomize(f.params, rng, 0.1);
    f.params.b_f->value.fill(100.0);
    f.params.b_i->value.fill(-100.0);
    Tape tape;
    const Tensor c0 = Tensor::vector({0.7, -1.3, 2.0, 0.0});
    LayerState s = cell_step(f.params, tape.constant(random_tensor({3}, rng)),
                             {tape.constant(random_tensor({4}, rng)), tape.constant(c0)});
    for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(s.c.value()[r], c0[r], 1e-6);
}

TEST(CellStep, ShapeMismatchIsDimensionError) {
    CellFixture f(3, 4);
    Tape tape;
    LayerState prev{tape.constant(Tensor({4})), tape.constant(Tensor({4}))};
    EXPECT_THROW(cell_step(f.params, tape.constant(Tensor({2})), prev), DimensionError);
    LayerState bad{tape.constant(Tensor({3})), tape.constant(Tensor({3}))};
    EXPECT_THROW(cell_step(f.params, tape.constant(Tensor({3})), bad), DimensionError);
}

TEST(CellStep, TwelveNamedParameters) {
    CellFixture f(2, 3);
    ASSERT_EQ(f.store.size(), 12u);
    EXPECT_EQ(f.store.names().front(), "cell.W_xi");
    EXPECT_EQ(f.store.at("cell.W_hc").value.shape(), (Shape{3, 3}));
    EXPECT_EQ(f.store.at("cell.W_xo").value.shape(), (Shape{3, 2}));
    for (double v : f.store.at("cell.b_f").value.values()) EXPECT_EQ(v, 1.0);
    for (double v : f.store.at("cell.b_i").value.values()) EXPECT_EQ(v, 0.0);
}

TEST(StackedStep, DepthOneEqualsCellStep) {
    ParameterStore store;
    Rng rng(5);
    StackedLSTM stack(store, "s", 3, 4, 1, {}, rng);
    Tape tape;
    Var x = tape.constant(random_tensor({3}, rng));
    LSTMState init = stack.zero_state(tape);
    StepResult r = stack.step(x, init);
    LayerState direct = cell_step(stack.layers()[0], x, init.layers[0]);
    EXPECT_TRUE(r.output.value().identical(direct.h.value()));
    EXPECT_TRUE(r.state.layers[0].c.value().identical(direct.c.value()));
}

TEST(StackedStep, ZeroParametersGiveZeroOutput) {
    ParameterStore store;
    Rng rng(6);
    StackedLSTM stack(store, "s", 3, 4, 2, {}, rng);
    for (auto& p : store) p->value.fill(0.0);
    Tape tape;
    StepResult r = stack.step(tape.constant(random_tensor({3}, rng)), stack.zero_state(tape));
    for (double v : r.output.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(StackedStep, DepthTwoEqualsManualComposition) {
    ParameterStore store;
    Rng rng(7);
    StackedLSTM stack(store, "s", 3, 4, 2, {}, rng);
    EXPECT_EQ(stack.layers()[1].input_size, 4u);
    Tape tape;
    Var x = tape.constant(random_tensor({3}, rng));
    LSTMState prev;
    for (int l = 0; l < 2; ++l)
        prev.layers.push_back({tape.constant(random_tensor({4}, rng)), tape.constant(random_tensor({4}, rng))});
    StepResult r = stack.step(x, prev);
    LayerState l0 = cell_step(stack.layers()[0], x, prev.layers[0]);
    LayerState l1 = cell_step(stack.layers()[1], l0.h, prev.layers[1]);
    EXPECT_TRUE(r.output.value().identical(l1.h.value()));
    EXPECT_TRUE(r.state.layers[0].c.value().identical(l0.c.value()));
    EXPECT_TRUE(r.state.layers[1].c.value().identical(l1.c.value()));
}

TEST(StackedStep, DepthMismatchIsContractError) {
    ParameterStore store;
    Rng rng(8);
    StackedLSTM stack(store, "s", 3, 4, 2, {}, rng);
    Tape tape;
    LSTMState shallow;
    shallow.layers.push_back({tape.constant(Tensor({4})), tape.constant(Tensor({4}))});
    EXPECT_THROW(stack.step(tape.constant(Tensor({3})), shallow), ContractError);
}

TEST(RunSequence, SingleInputIsOrderIndependent) {
    ParameterStore store;
    Rng rng(9);
    StackedLSTM stack(store, "s", 3, 4, 2, {}, rng);
    Tape tape;
    std::vector<Var> in{tape.constant(random_tensor({3}, rng))};
    auto fwd = run_sequence(stack, in, stack.zero_state(tape), Order::forward);
    auto rev = run_sequence(stack, in, stack.zero_state(tape), Order::reversed);
    EXPECT_TRUE(fwd.outputs[0].value().identical(rev.outputs[0].value()));
}

TEST(RunSequence, ReversedConsumesLastInputFirst) {
    Tape tape;
    std::vector<Var> in;
    for (double v : {1.0, 2.0, 3.0}) in.push_back(tape.constant(Tensor::vector({v})));
    std::vector<double> seen;
    StepFn recorder = [&](Var x, const LSTMState& s) {
        seen.push_back(x.value()[0]);
        return StepResult{x, s};
    };
    auto r = run_sequence(recorder, in, LSTMState{}, Order::reversed);
    EXPECT_EQ(seen, (std::vector<double>{3.0, 2.0, 1.0}));
    EXPECT_EQ(r.outputs[0].value()[0], 3.0);
    seen.clear();
    run_sequence(recorder, in, LSTMState{}, Order::forward);
    EXPECT_EQ(seen, (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(RunSequence, ForwardFinalStateEqualsIteratedSteps) {
    ParameterStore store;
    Rng rng(10);
    StackedLSTM stack(store, "s", 3, 5, 2, {}, rng);
    Tape tape;
    std::vector<Var> in;
    for (int t = 0; t < 6; ++t) in.push_back(tape.constant(random_tensor({3}, rng)));
    auto seq = run_sequence(stack, in, stack.zero_state(tape), Order::forward);
    LSTMState s = stack.zero_state(tape);
    for (const Var& x : in) s = stack.step(x, s).state;
    for (std::size_t l = 0; l < 2; ++l) {
        EXPECT_TRUE(seq.final_state.layers[l].h.value().identical(s.layers[l].h.value()));
        EXPECT_TRUE(seq.final_state.layers[l].c.value().identical(s.layers[l].c.value()));
    }
}

TEST(RunSequence, ReversedEqualsForwardOnReversedList) {
    ParameterStore store;
    Rng rng(11);
    StackedLSTM stack(store, "s", 3, 4, 2, {}, rng);
    Tape tape;
    std::vector<Var> in;
    for (int t = 0; t < 7; ++t) in.push_back(tape.constant(random_tensor({3}, rng)));
    std::vector<Var> flipped(in.rbegin(), in.rend());
    auto a = run_sequence(stack, in, stack.zero_state(tape), Order::reversed);
    auto b = run_sequence(stack, flipped, stack.zero_state(tape), Order::forward);
    for (std::size_t k = 0; k < in.size(); ++k) EXPECT_TRUE(a.outputs[k].value().identical(b.outputs[k].value()));
}

TEST(RunSequence, EmptySequenceIsContractError) {
    ParameterStore store;
    Rng rng(12);
    StackedLSTM stack(store, "s", 3, 4, 1, {}, rng);
    Tape tape;
    EXPECT_THROW(run_sequence(stack, std::vector<Var>{}, stack.zero_state(tape), Order::forward), ContractError);
}

TEST(RunSequence, GradientThroughEightStepsPassesCheck) {
    ParameterStore store;
    Rng rng(13);
    StackedLSTM stack(store, "s", 3, 4, 2, {}, rng);
    std::vector<Tensor> inputs;
    for (int t = 0; t < 8; ++t) inputs.push_back(random_tensor({3}, rng));
    auto build = [&](Tape& tape) {
        std::vector<Var> in;
        for (const auto& x : inputs) in.push_back(tape.constant(x));
        auto r = run_sequence(stack, in, stack.zero_state(tape), Order::reversed);
        Var total = sum(r.outputs[0]);
        for (std::size_t k = 1; k < r.outputs.size(); ++k) total = add(total, sum(r.outputs[k]));
        return add(total, sum(r.final_state.layers[0].c));
    };
    std::vector<Parameter*> params;
    for (auto& p : store) params.push_back(p.get());
    const auto report = finite_diff_check(build, params);
    EXPECT_TRUE(report.passed()) << report.max_relative_error();
    EXPECT_EQ(report.parameters.size(), 24u);
}

TEST(StateProjection, EqualSizesPassThrough) {
    ParameterStore store;
    Rng rng(14);
    StateProjection proj(store, "p", 4, 4, 2, rng);
    EXPECT_TRUE(proj.identity());
    EXPECT_EQ(store.size(), 0u);
    Tape tape;
    LSTMState s;
    for (int l = 0; l < 2; ++l)
        s.layers.push_back({tape.constant(random_tensor({4}, rng)), tape.constant(random_tensor({4}, rng))});
    LSTMState out = proj.apply(s);
    for (int l = 0; l < 2; ++l) {
        EXPECT_TRUE(out.layers[l].h.value().identical(s.layers[l].h.value()));
        EXPECT_TRUE(out.layers[l].c.value().identical(s.layers[l].c.value()));
    }
}

TEST(StateProjection, ZeroMatricesGiveZeroState) {
    ParameterStore store;
    Rng rng(15);
    StateProjection proj(store, "p", 5, 3, 2, rng);
    for (auto& p : store) p->value.fill(0.0);
    Tape tape;
    LSTMState s;
    for (int l = 0; l < 2; ++l)
        s.layers.push_back({tape.constant(random_tensor({5}, rng)), tape.constant(random_tensor({5}, rng))});
    LSTMState out = proj.apply(s);
    for (const auto& layer : out.layers) {
        EXPECT_EQ(layer.h.shape(), (Shape{3}));
        for (double v : layer.h.value().values()) EXPECT_EQ(v, 0.0);
        for (double v : layer.c.value().values()) EXPECT_EQ(v, 0.0);
    }
}

TEST(StateProjection, RandomMatricesMatchMatrixProduct) {
    ParameterStore store;
    Rng rng(16);
    StateProjection proj(store, "p", 5, 3, 2, rng);
    ASSERT_EQ(store.size(), 4u);
    Tape tape;
    LSTMState s;
    for (int l = 0; l < 2; ++l)
        s.layers.push_back({tape.constant(random_tensor({5}, rng)), tape.constant(random_tensor({5}, rng))});
    LSTMState out = proj.apply(s);
    for (std::size_t l = 0; l < 2; ++l) {
        const Tensor& ph = store.at("p.l" + std::to_string(l) + ".P_h").value;
        const Tensor& pc = store.at("p.l" + std::to_string(l) + ".P_c").value;
        for (std::size_t r = 0; r < 3; ++r) {
            double eh = 0, ec = 0;
            for (std::size_t k = 0; k < 5; ++k) {
                eh += ph.at(r, k) * s.layers[l].h.value()[k];
                ec += pc.at(r, k) * s.layers[l].c.value()[k];
            }
            EXPECT_NEAR(out.layers[l].h.value()[r], eh, 1e-14);
            EXPECT_NEAR(out.layers[l].c.value()[r], ec, 1e-14);
        }
    }
}

TEST(StateProjection, MismatchedStateIsRejected) {
    ParameterStore store;
    Rng rng(17);
    StateProjection proj(store, "p", 5, 3, 2, rng);
    Tape tape;
    LSTMState wrong_width;
    for (int l = 0; l < 2; ++l)
        wrong_width.layers.push_back({tape.constant(Tensor({4})), tape.constant(Tensor({4}))});
    EXPECT_THROW(proj.apply(wrong_width), DimensionError);
    LSTMState wrong_depth;
    wrong_depth.layers.push_back({tape.constant(Tensor({5})), tape.constant(Tensor({5}))});
    EXPECT_THROW(proj.apply(wrong_depth), ContractError);
}
