#pragma once
// Figure/table regeneration and parameter sweeps over the analytic and exact
// engines. Rows come out in grid order whatever the worker count.

#include <algorithm>
#include <condition_variable>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "optoweak/analytics.hpp"
#include "optoweak/config.hpp"
#include "optoweak/dissipation.hpp"
#include "optoweak/interferometer.hpp"
#include "optoweak/output.hpp"

namespace optoweak {

/// Exact-engine limits: two-mode optical dimension for pure runs, full
/// {a, b, m} dimension when a density matrix is carried (gamma > 0).
inline constexpr long kExactOpticalDimensionCap = 1024;
inline constexpr long kDampedDimensionCap = 2048;

/// Evaluates fn(i) for i in [0, n) on up to `workers` threads and hands the
/// results to sink(i, result) in index order on the calling thread. At most
/// 4·workers results are held at once. The first exception (by index) is
/// rethrown after the workers have stopped.
template <class Fn, class Sink>
void ordered_parallel(std::size_t n, unsigned workers, Fn&& fn, Sink&& sink) {
    using T = std::invoke_result_t<Fn&, std::size_t>;
    workers = std::max(1u, workers);
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) sink(i, fn(i));
        return;
    }
    const std::size_t window = 4 * static_cast<std::size_t>(workers);
    std::vector<std::optional<T>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::mutex mu;
    std::condition_variable ready, room;
    std::size_t next = 0, emitted = 0;
    bool stop = false;

    auto work = [&] {
        for (;;) {
            std::size_t i;
            {
                std::unique_lock lock(mu);
                room.wait(lock, [&] { return stop || next >= n || next < emitted + window; });
                if (stop || next >= n) return;
                i = next++;
            }
            std::optional<T> value;
            std::exception_ptr err;
            try {
                value.emplace(fn(i));
            } catch (...) {
                err = std::current_exception();
            }
            {
                std::lock_guard lock(mu);
                slots[i] = std::move(value);
                errors[i] = err;
            }
            ready.notify_all();
        }
    };

    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, n); ++w) pool.emplace_back(work);
    auto halt = [&] {
        {
            std::lock_guard lock(mu);
            stop = true;
        }
        room.notify_all();
        for (auto& t : pool) t.join();
    };

    try {
        for (std::size_t i = 0; i < n; ++i) {
            T value;
            {
                std::unique_lock lock(mu);
                ready.wait(lock, [&] { return slots[i].has_value() || errors[i]; });
                if (errors[i]) std::rethrow_exception(errors[i]);
                value = std::move(*slots[i]);
                slots[i].reset();
                emitted = i + 1;
            }
            room.notify_all();
            sink(i, std::move(value));
        }
    } catch (...) {
        halt();
        throw;
    }
    halt();
}

inline std::vector<double> linspace(double from, double to, int count) {
    std::vector<double> v;
    for (int i = 0; i < count; ++i) v.push_back(from + (to - from) * i / (count - 1));
    if (count > 1) v.back() = to;
    return v;
}

inline std::vector<double> default_delta_grid() { return linspace(0.001, 0.12, 200); }

inline std::vector<double> table1_deltas() { return {0.1, 0.08, 0.06, 0.04, 0.02, 0.01}; }

inline std::vector<ProbabilityPair> default_figure3_pairs() { return {{0.004, 0.01}, {0.001, 0.005}, {0.0002, 0.001}}; }

namespace detail {

class Reasons {
public:
    template <class F>
    double guard(const char* field, F&& f) {
        try {
            return f();
        } catch (const DegenerateBranchError& e) {
            add(field, e.what());
        } catch (const DomainError& e) {
            add(field, e.what());
        }
        return kNaN;
    }
    void add(const char* field, const std::string& why) {
        if (!text_.empty()) text_ += "; ";
        text_ += std::string(field) + ": " + why;
    }
    std::string str() const { return text_.empty() ? "ok" : text_; }

private:
    std::string text_;
};

inline std::vector<double> axis_or(const SweepConfig& cfg, const char* name, std::vector<double> fallback) {
    const Axis* a = cfg.axis(name);
    return a ? a->values : std::move(fallback);
}

inline void only_axes(const SweepConfig& cfg, std::initializer_list<const char*> allowed, Command cmd) {
    for (const auto& a : cfg.axes) {
        bool ok = false;
        for (const char* n : allowed) ok = ok || a.name == n;
        if (!ok) throw ConfigError(std::string(to_string(cmd)) + " does not accept an axis over '" + a.name + "'");
    }
}

}  // namespace detail

/// Parameters of one grid point.
struct GridPoint {
    double k = 0.0;
    double wm_t = 0.0;
    double alpha2 = 0.0;
    double delta = 0.0;
    double gamma = 0.0;
};

inline int exact_optical_cutoff(double alpha2, const FixedParams& f) {
    return f.optical_cutoff ? *f.optical_cutoff : default_optical_cutoff(alpha2);
}

inline int exact_mirror_cutoff(const FixedParams& f) { return f.mirror_cutoff ? *f.mirror_cutoff : kDefaultMirrorCutoff; }

/// Throws ConfigError (with the computed dimension) when the exact engine
/// cannot run this point.
inline void check_exact_feasible(const GridPoint& g, const FixedParams& f) {
    const long co = exact_optical_cutoff(g.alpha2, f) + 1;
    const long cm = exact_mirror_cutoff(f) + 1;
    if (co * co > kExactOpticalDimensionCap) {
        throw ConfigError("exact engine infeasible at alpha2=" + format_double(g.alpha2) + ": two-mode optical dimension " +
                          std::to_string(co * co) + " exceeds " + std::to_string(kExactOpticalDimensionCap));
    }
    if (g.gamma > 0.0 && co * co * cm > kDampedDimensionCap) {
        throw ConfigError("damped exact engine infeasible at alpha2=" + format_double(g.alpha2) +
                          ": density-matrix dimension " + std::to_string(co * co * cm) + " exceeds " +
                          std::to_string(kDampedDimensionCap));
    }
}

inline ProtocolParams exact_protocol_params(const GridPoint& g, const FixedParams& f) {
    const EvolutionParams evo = evolution_params(g.k, f.r, g.wm_t);
    return protocol_params(std::sqrt(g.alpha2), g.delta, evo, exact_optical_cutoff(g.alpha2, f), exact_mirror_cutoff(f));
}

inline ProtocolOutcome exact_outcome(const GridPoint& g, const FixedParams& f) {
    const ProtocolParams p = exact_protocol_params(g, f);
    return g.gamma > 0.0 ? damped_protocol(p, g.gamma, static_cast<std::size_t>(f.steps)) : run_protocol(p);
}

// ---------------------------------------------------------------- table1

inline Table table1(const SweepConfig& cfg) {
    detail::only_axes(cfg, {"delta"}, Command::table1);
    const double alpha2 = cfg.fixed.alpha2;
    Table t{{"delta", "weak_value_one_photon", "alpha2", "p_success_percent"}, {}};
    for (double d : detail::axis_or(cfg, "delta", table1_deltas())) {
        detail::Reasons why;
        const double wv = why.guard("weak_value_one_photon", [&] { return analytic::weak_value_one_photon(d); });
        t.rows.push_back({d, wv, alpha2, 100.0 * analytic::p_success_wva(alpha2, d)});
    }
    return t;
}

// ---------------------------------------------------------------- figure2

inline std::vector<std::string> figure2_header(Engine e) {
    std::vector<std::string> h{"delta",  "q_no_postselection", "q_noclick", "q_click", "q_diff", "q_wva_minus_noclick",
                               "p_click", "regime"};
    if (e != Engine::analytic) {
        for (const char* c : {"exact_alpha2", "exact_q_noclick", "exact_q_click", "exact_q_diff", "exact_p_click",
                              "rel_dev_q_diff"}) {
            h.emplace_back(c);
        }
    }
    h.emplace_back("reason");
    return h;
}

inline Table figure2(const SweepConfig& cfg, std::vector<std::string>* warnings = nullptr) {
    detail::only_axes(cfg, {"delta"}, Command::figure2);
    const FixedParams& f = cfg.fixed;
    const std::vector<double> deltas = detail::axis_or(cfg, "delta", default_delta_grid());
    const bool exact = cfg.engine != Engine::analytic;
    if (exact) {
        for (double d : deltas) check_exact_feasible({f.k, f.wm_t, f.exact_alpha2, d, f.gamma}, f);
    }
    const double q_np = analytic::q_no_postselection(f.k, f.wm_t);
    Table t{figure2_header(cfg.engine), {}};
    std::set<std::string> seen;

    ordered_parallel(
        deltas.size(), cfg.workers,
        [&](std::size_t i) {
            const double d = deltas[i];
            detail::Reasons why;
            const analytic::Inputs in = analytic::inputs(f.alpha2, f.k, f.wm_t, d);
            std::vector<Cell> row{d, q_np, analytic::q_noclick(in)};
            row.emplace_back(why.guard("q_click", [&] { return analytic::q_click(in); }));
            const double qd = why.guard("q_diff", [&] { return analytic::q_diff(in); });
            row.emplace_back(qd);
            row.emplace_back(why.guard("q_wva_minus_noclick",
                                       [&] { return analytic::q_wva(in) - analytic::q_noclick(in); }));
            row.emplace_back(analytic::p_success(in));
            row.emplace_back(std::string(analytic::to_string(analytic::classify(in))));
            std::vector<std::string> warn;
            if (exact) {
                const GridPoint g{f.k, f.wm_t, f.exact_alpha2, d, f.gamma};
                const ProtocolOutcome o = exact_outcome(g, f);
                warn = o.warnings;
                const double eqd = why.guard("exact_q_diff", [&] { return o.diff(); });
                row.emplace_back(f.exact_alpha2);
                row.emplace_back(why.guard("exact_q_noclick", [&] { return o.q_noclick(); }));
                row.emplace_back(why.guard("exact_q_click", [&] { return o.q_click(); }));
                row.emplace_back(eqd);
                row.emplace_back(o.p_click);
                row.emplace_back(eqd / qd - 1.0);
            }
            row.emplace_back(why.str());
            return std::make_pair(std::move(row), std::move(warn));
        },
        [&](std::size_t, auto result) {
            t.rows.push_back(std::move(result.first));
            for (auto& w : result.second) {
                if (warnings && seen.insert(w).second) warnings->push_back(w);
            }
        });
    return t;
}

inline std::vector<Series> figure2_series(const Table& t) {
    std::vector<Series> s;
    for (const char* c : {"q_no_postselection", "q_noclick", "q_click", "q_diff", "q_wva_minus_noclick", "exact_q_diff"}) {
        if (t.column(c) < t.header.size()) s.push_back({c, t.numbers(c)});
    }
    return s;
}

// ---------------------------------------------------------------- figure3

inline std::string figure3_column(const ProbabilityPair& p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "alpha2_p%g_k%g", p.p_target, p.k);
    return buf;
}

inline Table figure3(const SweepConfig& cfg) {
    detail::only_axes(cfg, {"delta"}, Command::figure3);
    const auto pairs = cfg.pairs.empty() ? default_figure3_pairs() : cfg.pairs;
    Table t{{"delta"}, {}};
    for (const auto& p : pairs) t.header.push_back(figure3_column(p));
    t.header.emplace_back("reason");
    for (double d : detail::axis_or(cfg, "delta", default_delta_grid())) {
        detail::Reasons why;
        std::vector<Cell> row{d};
        for (const auto& p : pairs) {
            row.emplace_back(why.guard("alpha2", [&] {
                return analytic::alpha2_for_probability(p.p_target, p.k, cfg.fixed.wm_t, d);
            }));
        }
        row.emplace_back(why.str());
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---------------------------------------------------------------- sweep

inline std::vector<GridPoint> sweep_grid(const SweepConfig& cfg) {
    std::vector<GridPoint> grid{{cfg.fixed.k, cfg.fixed.wm_t, cfg.fixed.alpha2, cfg.fixed.delta, cfg.fixed.gamma}};
    for (const auto& axis : cfg.axes) {
        std::vector<GridPoint> next;
        for (const auto& g : grid) {
            for (double v : axis.values) {
                GridPoint p = g;
                if (axis.name == "k") p.k = v;
                else if (axis.name == "wm_t") p.wm_t = v;
                else if (axis.name == "alpha2") p.alpha2 = v;
                else if (axis.name == "delta") p.delta = v;
                else if (axis.name == "gamma") p.gamma = v;
                next.push_back(p);
            }
        }
        grid = std::move(next);
    }
    return grid;
}

inline std::vector<std::string> sweep_header(Engine e) {
    std::vector<std::string> h{"k",       "wm_t",    "alpha2", "delta",      "gamma", "engine",
                               "regime",  "q_click", "q_noclick", "q_diff",  "q_wva", "p_click",
                               "weak_value", "snr",  "dq_click"};
    if (e == Engine::both) h.emplace_back("rel_dev_q_diff");
    h.emplace_back("reason");
    return h;
}

struct PointRows {
    std::vector<std::vector<Cell>> rows;
    std::vector<std::string> warnings;
};

inline PointRows sweep_point(const GridPoint& g, const SweepConfig& cfg) {
    const analytic::Inputs in = analytic::inputs(g.alpha2, g.k, g.wm_t, g.delta);
    const std::string regime = analytic::to_string(analytic::classify(in));
    const auto lead = [&](const char* engine) {
        return std::vector<Cell>{g.k, g.wm_t, g.alpha2, g.delta, g.gamma, std::string(engine), regime};
    };
    PointRows out;
    double analytic_qd = kNaN;
    std::vector<Cell> arow;
    detail::Reasons awhy;
    if (cfg.engine != Engine::exact) {
        arow = lead("analytic");
        const double qc = awhy.guard("q_click", [&] { return analytic::q_click(in); });
        analytic_qd = awhy.guard("q_diff", [&] { return analytic::q_diff(in); });
        for (Cell c : {Cell{qc}, Cell{analytic::q_noclick(in)}, Cell{analytic_qd},
                       Cell{awhy.guard("q_wva", [&] { return analytic::q_wva(in); })}, Cell{analytic::p_success(in)},
                       Cell{awhy.guard("weak_value", [&] { return analytic::weak_value(g.alpha2, g.delta); })},
                       Cell{qc}, Cell{1.0}}) {
            arow.push_back(std::move(c));
        }
    }
    std::vector<Cell> erow;
    detail::Reasons ewhy;
    double exact_qd = kNaN;
    if (cfg.engine != Engine::analytic) {
        const ProtocolParams p = exact_protocol_params(g, cfg.fixed);
        const ProtocolOutcome o = exact_outcome(g, cfg.fixed);
        out.warnings = o.warnings;
        erow = lead("exact");
        const double qc = ewhy.guard("q_click", [&] { return o.q_click(); });
        const double dq = ewhy.guard("dq_click", [&] { return o.dq_click(); });
        exact_qd = ewhy.guard("q_diff", [&] { return o.diff(); });
        Diagnostics diag;
        const double wv = ewhy.guard("weak_value", [&] { return weak_value_numeric(p, &diag); });
        for (auto& w : diag.warnings) out.warnings.push_back(w);
        for (Cell c : {Cell{qc}, Cell{ewhy.guard("q_noclick", [&] { return o.q_noclick(); })}, Cell{exact_qd},
                       Cell{ewhy.guard("q_wva", [&] { return in.kick() * wv; })}, Cell{o.p_click}, Cell{wv},
                       Cell{qc / dq}, Cell{dq}}) {
            erow.push_back(std::move(c));
        }
    }
    const double rel = exact_qd / analytic_qd - 1.0;
    if (!arow.empty()) {
        if (cfg.engine == Engine::both) arow.emplace_back(rel);
        arow.emplace_back(awhy.str());
        out.rows.push_back(std::move(arow));
    }
    if (!erow.empty()) {
        if (cfg.engine == Engine::both) erow.emplace_back(rel);
        erow.emplace_back(ewhy.str());
        out.rows.push_back(std::move(erow));
    }
    return out;
}

/// Streams the sweep CSV to `csv` as rows complete; returns the rows too.
inline Table run_sweep(const SweepConfig& cfg, std::ostream& csv, std::vector<std::string>* warnings = nullptr) {
    const std::vector<GridPoint> grid = sweep_grid(cfg);
    if (cfg.engine != Engine::analytic) {
        for (const auto& g : grid) check_exact_feasible(g, cfg.fixed);
    }
    Table t{sweep_header(cfg.engine), {}};
    write_csv_header(csv, t.header);
    std::set<std::string> seen;
    ordered_parallel(
        grid.size(), cfg.workers, [&](std::size_t i) { return sweep_point(grid[i], cfg); },
        [&](std::size_t, PointRows r) {
            for (auto& row : r.rows) {
                write_csv_row(csv, row);
                t.rows.push_back(std::move(row));
            }
            csv.flush();
            for (auto& w : r.warnings) {
                if (warnings && seen.insert(w).second) warnings->push_back(w);
            }
        });
    return t;
}

}  // namespace optoweak
