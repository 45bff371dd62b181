#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "optoweak/sweep.hpp"

using namespace optoweak;

namespace {

constexpr double kPi = std::numbers::pi;

double num(const Table& t, std::size_t row, const std::string& col) { return std::get<double>(t.rows[row][t.column(col)]); }

std::string str(const Table& t, std::size_t row, const std::string& col) {
    return std::get<std::string>(t.rows[row][t.column(col)]);
}

}  // namespace

TEST(OrderedParallel, EmitsInIndexOrder) {
    for (unsigned workers : {1u, 2u, 4u, 7u}) {
        std::vector<std::size_t> seen;
        ordered_parallel(
            100, workers,
            [](std::size_t i) {
                // later indices finish first
                std::this_thread::sleep_for(std::chrono::microseconds((100 - i) * 20));
                return i * i;
            },
            [&](std::size_t i, std::size_t v) {
                EXPECT_EQ(v, i * i);
                seen.push_back(i);
            });
        ASSERT_EQ(seen.size(), 100u);
        for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], i);
    }
}

TEST(OrderedParallel, BoundedWindow) {
    std::atomic<std::size_t> started{0};
    std::size_t max_ahead = 0;
    ordered_parallel(
        200, 3,
        [&](std::size_t i) {
            ++started;
            return i;
        },
        [&](std::size_t i, std::size_t) {
            std::this_thread::sleep_for(std::chrono::microseconds(50));
            max_ahead = std::max(max_ahead, started.load() - i);
        });
    EXPECT_LE(max_ahead, 4u * 3u + 1u);
}

TEST(OrderedParallel, RethrowsFirstErrorByIndex) {
    for (unsigned workers : {1u, 4u}) {
        std::size_t emitted = 0;
        try {
            ordered_parallel(
                50, workers,
                [](std::size_t i) -> int {
                    if (i == 30) throw std::runtime_error("thirty");
                    if (i == 12) throw std::runtime_error("twelve");
                    return 0;
                },
                [&](std::size_t, int) { ++emitted; });
            FAIL() << "expected an exception";
        } catch (const std::runtime_error& e) {
            EXPECT_STREQ(e.what(), "twelve");
        }
        EXPECT_EQ(emitted, 12u);
    }
}

TEST(Sweep, GridOrderFirstAxisSlowest) {
    SweepConfig c;
    c.axes = {{"k", {0.1, 0.2}}, {"delta", {0.01, 0.02, 0.03}}};
    const auto g = sweep_grid(c);
    ASSERT_EQ(g.size(), 6u);
    EXPECT_EQ(g[0].k, 0.1);
    EXPECT_EQ(g[2].delta, 0.03);
    EXPECT_EQ(g[3].k, 0.2);
    EXPECT_EQ(g[3].delta, 0.01);
    EXPECT_EQ(g[5].alpha2, c.fixed.alpha2);
}

TEST(Sweep, SinglePointMatchesProtocol) {
    SweepConfig c;
    c.engine = Engine::exact;
    c.fixed.alpha2 = 2.0;
    c.fixed.delta = 0.01;
    c.fixed.k = 0.005;
    c.fixed.optical_cutoff = 14;
    c.fixed.mirror_cutoff = 8;
    std::ostringstream csv;
    const Table t = run_sweep(c, csv);
    ASSERT_EQ(t.rows.size(), 1u);
    const ProtocolOutcome o =
        run_protocol(protocol_params(std::sqrt(2.0), 0.01, evolution_params(0.005, 0.0, kPi), 14, 8));
    EXPECT_EQ(num(t, 0, "q_click"), o.q_click());
    EXPECT_EQ(num(t, 0, "q_noclick"), o.q_noclick());
    EXPECT_EQ(num(t, 0, "q_diff"), o.diff());
    EXPECT_EQ(num(t, 0, "p_click"), o.p_click);
    EXPECT_EQ(num(t, 0, "dq_click"), o.dq_click());
    EXPECT_EQ(num(t, 0, "snr"), o.q_click() / o.dq_click());
    EXPECT_EQ(str(t, 0, "engine"), "exact");
    EXPECT_EQ(str(t, 0, "reason"), "ok");
}

TEST(Sweep, BothEnginesShareCoordinates) {
    SweepConfig c;
    c.engine = Engine::both;
    c.fixed.alpha2 = 1.0;
    c.fixed.k = 0.005;
    c.fixed.optical_cutoff = 12;
    c.fixed.mirror_cutoff = 6;
    c.axes = {{"delta", {0.005, 0.02}}};
    std::ostringstream csv;
    const Table t = run_sweep(c, csv);
    ASSERT_EQ(t.rows.size(), 4u);
    EXPECT_NE(t.column("rel_dev_q_diff"), t.header.size());
    for (std::size_t i = 0; i < 4; i += 2) {
        EXPECT_EQ(str(t, i, "engine"), "analytic");
        EXPECT_EQ(str(t, i + 1, "engine"), "exact");
        for (const char* col : {"k", "wm_t", "alpha2", "delta", "gamma"}) EXPECT_EQ(num(t, i, col), num(t, i + 1, col));
        EXPECT_EQ(num(t, i, "rel_dev_q_diff"), num(t, i + 1, "rel_dev_q_diff"));
        EXPECT_NEAR(num(t, i, "rel_dev_q_diff"), num(t, i + 1, "q_diff") / num(t, i, "q_diff") - 1.0, 1e-15);
        EXPECT_LT(std::abs(num(t, i, "rel_dev_q_diff")), 0.05);
    }
}

TEST(Sweep, AnalyticGridIsFast) {
    SweepConfig c;
    c.axes = {{"delta", linspace(0.001, 0.1, 50)}, {"alpha2", linspace(1.0, 40.0, 20)}};
    std::ostringstream csv;
    const auto t0 = std::chrono::steady_clock::now();
    const Table t = run_sweep(c, csv);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(t.rows.size(), 1000u);
    EXPECT_LT(secs, 1.0);
}

TEST(Sweep, CsvIsByteStableAcrossWorkers) {
    SweepConfig c;
    c.axes = {{"delta", linspace(0.001, 0.1, 40)}, {"k", {0.001, 0.005, 0.01}}};
    std::string first;
    for (unsigned w : {1u, 3u, 8u}) {
        c.workers = w;
        std::ostringstream csv;
        run_sweep(c, csv);
        if (first.empty()) first = csv.str();
        EXPECT_EQ(csv.str(), first);
    }
    EXPECT_EQ(first.find('\r'), std::string::npos);
    EXPECT_EQ(first.substr(0, first.find('\n')),
              "k,wm_t,alpha2,delta,gamma,engine,regime,q_click,q_noclick,q_diff,q_wva,p_click,weak_value,snr,dq_click,"
              "reason");
}

TEST(Sweep, DegeneratePointGivesNaNAndReason) {
    SweepConfig c;
    c.fixed.delta = 0.0;
    c.axes = {{"k", {0.0, 0.005}}};
    std::ostringstream csv;
    const Table t = run_sweep(c, csv);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_TRUE(std::isnan(num(t, 0, "q_diff")));
    EXPECT_NE(str(t, 0, "reason").find("q_diff"), std::string::npos);
    // with coupling the branches exist; only the weak value is undefined at δ = 0
    EXPECT_EQ(num(t, 1, "q_diff"), 0.0);
    EXPECT_EQ(str(t, 1, "reason").find("q_diff"), std::string::npos);
    EXPECT_NE(str(t, 1, "reason").find("weak_value"), std::string::npos);
    EXPECT_NE(csv.str().find("NaN"), std::string::npos);
}

TEST(Sweep, InfeasibleExactRejectedUpFront) {
    SweepConfig c;
    c.engine = Engine::exact;
    c.fixed.alpha2 = 30.0;
    std::ostringstream csv;
    try {
        run_sweep(c, csv);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("exceeds 1024"), std::string::npos);
    }
    EXPECT_TRUE(csv.str().empty());
    c.fixed.alpha2 = 2.0;
    c.fixed.gamma = 1e-3;
    c.fixed.optical_cutoff = 14;
    EXPECT_THROW(run_sweep(c, csv), ConfigError);
}

TEST(Figure2, DefaultColumnsAndValues) {
    const Table t = figure2(SweepConfig{});
    ASSERT_EQ(t.rows.size(), 200u);
    EXPECT_EQ(t.header, figure2_header(Engine::analytic));
    EXPECT_EQ(num(t, 0, "delta"), 0.001);
    EXPECT_EQ(num(t, 199, "delta"), 0.12);
    // oracle: closed forms at the figure's k = 0.005, |α|² = 30, half period
    for (std::size_t i = 0; i < 200; i += 37) {
        const double d = num(t, i, "delta");
        const double den = 2 * d * d + 0.01 * 0.01 / 2;
        EXPECT_NEAR(num(t, i, "q_noclick"), 0.3, 1e-14);
        EXPECT_NEAR(num(t, i, "q_diff"), 0.02 * d / den, 1e-12);
        EXPECT_NEAR(num(t, i, "q_click"), 0.3 + 0.02 * d / den, 1e-12);
        EXPECT_NEAR(num(t, i, "q_wva_minus_noclick"), 0.02 / (2 * d), 1e-10);
        EXPECT_NEAR(num(t, i, "p_click"), 30 * den / 2, 1e-14);
        EXPECT_EQ(num(t, i, "q_no_postselection"), 0.02);
    }
    const auto s = figure2_series(t);
    EXPECT_EQ(s.size(), 5u);
}

TEST(Figure2, ExactOverlay) {
    SweepConfig c;
    c.engine = Engine::both;
    c.fixed.exact_alpha2 = 1.0;
    c.fixed.optical_cutoff = 12;
    c.fixed.mirror_cutoff = 6;
    c.axes = {{"delta", {0.005, 0.01}}};
    const Table t = figure2(c);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(num(t, 0, "exact_alpha2"), 1.0);
    EXPECT_NEAR(num(t, 0, "exact_q_diff"), 1.0, 0.05);
    EXPECT_LT(std::abs(num(t, 1, "rel_dev_q_diff")), 0.05);
    EXPECT_EQ(figure2_series(t).size(), 6u);
}

TEST(Figure2, RejectsForeignAxis) {
    SweepConfig c;
    c.axes = {{"k", {0.001, 0.002}}};
    EXPECT_THROW(figure2(c), ConfigError);
    EXPECT_THROW(table1(c), ConfigError);
    EXPECT_THROW(figure3(c), ConfigError);
}

TEST(Figure3, DefaultPairs) {
    const Table t = figure3(SweepConfig{});
    ASSERT_EQ(t.header.size(), 5u);
    EXPECT_EQ(t.header[1], "alpha2_p0.004_k0.01");
    EXPECT_EQ(t.header[2], "alpha2_p0.001_k0.005");
    EXPECT_EQ(t.header[3], "alpha2_p0.0002_k0.001");
    for (std::size_t i = 0; i < t.rows.size(); i += 29) {
        const double d = num(t, i, "delta");
        // oracle: p = |α|²(δ² + k²) at the half period
        EXPECT_NEAR(num(t, i, t.header[1]), 0.004 / (d * d + 1e-4), 1e-9);
        EXPECT_NEAR(num(t, i, t.header[2]), 0.001 / (d * d + 2.5e-5), 1e-9);
    }
}

TEST(Table1, Values) {
    const Table t = table1(SweepConfig{});
    ASSERT_EQ(t.rows.size(), 6u);
    EXPECT_EQ(t.header, (std::vector<std::string>{"delta", "weak_value_one_photon", "alpha2", "p_success_percent"}));
    EXPECT_EQ(num(t, 0, "weak_value_one_photon"), 5.0);
    EXPECT_NEAR(num(t, 5, "weak_value_one_photon"), 50.0, 1e-12);
    EXPECT_NEAR(num(t, 0, "p_success_percent"), 30.0, 1e-12);
    EXPECT_NEAR(num(t, 5, "p_success_percent"), 0.3, 1e-13);
    std::ostringstream os;
    write_csv(os, t);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n', os.str().find('\n') + 1)),
              "delta,weak_value_one_photon,alpha2,p_success_percent\n0.10000000000000001,5,30,30.000000000000004");
}

TEST(Output, CellFormatting) {
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(kNaN), "NaN");
    EXPECT_EQ(format_double(-INFINITY), "-Inf");
    EXPECT_EQ(format_cell(Cell{std::string("a,b")}), "\"a,b\"");
    EXPECT_EQ(format_cell(Cell{std::string("say \"x\"")}), "\"say \"\"x\"\"\"");
}

TEST(Output, SvgBreaksLinesAtNaN) {
    std::ostringstream os;
    write_svg(os, "t", "x", {0, 1, 2, 3, 4}, {{"y", {0, 1, kNaN, 3, 4}}});
    const std::string s = os.str();
    std::size_t count = 0;
    for (std::size_t p = s.find("<polyline"); p != std::string::npos; p = s.find("<polyline", p + 1)) ++count;
    EXPECT_EQ(count, 2u);
    EXPECT_EQ(s.rfind("</svg>\n"), s.size() - 7);
}
