#include "crowd/optimize.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <thread>
#include <tuple>

#include "crowd/errors.hpp"

namespace crowd {

const char* to_string(CostKind k) {
    switch (k) {
        case CostKind::Delta1: return "d1";
        case CostKind::Delta2: return "d2";
        case CostKind::Delta3: return "d3";
    }
    return "?";
}

CostKind parse_cost(const std::string& name) {
    if (name == "d1" || name == "delta1") return CostKind::Delta1;
    if (name == "d2" || name == "delta2") return CostKind::Delta2;
    if (name == "d3" || name == "delta3") return CostKind::Delta3;
    throw InputError("unknown cost '" + name + "' (expected d1, d2 or d3)");
}

double evaluate_cost(const CostSpec& spec, const Metrics& controlled) {
    const Metrics& t = spec.target;
    switch (spec.kind) {
        case CostKind::Delta1: return std::abs(controlled.t_evac - t.t_evac);
        case CostKind::Delta3: return std::abs(controlled.rho_max - t.rho_max);
        case CostKind::Delta2: {
            if (controlled.P_e.size() != t.P_e.size())
                throw InputError("evaluate_cost: exit counts differ between controlled and target metrics");
            double s = 0.0;
            for (std::size_t e = 0; e < t.P_e.size(); ++e) {
                const double d = controlled.P_e[e] - t.P_e[e];
                s += d * d;
            }
            return std::sqrt(s);
        }
    }
    return 0.0;
}

SimulationCost::SimulationCost(Scenario s, BehaviorSpec natural, CostSpec spec, SimulationOptions opt)
    : s_(s.dimensionless ? std::move(s) : nondimensionalize(s)),
      natural_(natural),
      spec_(std::move(spec)),
      opt_(opt) {
    validate(natural_);
}

bool SimulationCost::admissible(const ObstacleParam& lambda) const { return crowd::admissible(lambda, s_); }

Metrics SimulationCost::run(const std::optional<ObstacleParam>& lambda) const {
    return simulate(s_, natural_, lambda, opt_);
}

double SimulationCost::cost(const ObstacleParam& lambda) const {
    if (!admissible(lambda)) throw InputError("cost requested for an inadmissible obstacle");
    return evaluate_cost(spec_, run(lambda));
}

double SimulationCost::uncontrolled() const {
    if (!uncontrolled_) uncontrolled_ = evaluate_cost(spec_, run(std::nullopt));
    return *uncontrolled_;
}

SearchResult exhaustive_search(const CostModel& model, const ExhaustiveSpec& spec) {
    if (spec.nx <= 0 || spec.ny <= 0 || !(spec.h > 0.0)) throw InputError("exhaustive_search: empty node grid");
    if (!(spec.w > 0.0 && spec.h_side > 0.0)) throw InputError("exhaustive_search: obstacle sides must be positive");
    if (spec.stride < 1) throw InputError("exhaustive_search: stride must be >= 1");
    if (spec.jobs < 1) throw InputError("exhaustive_search: jobs must be >= 1");

    SearchResult r;
    r.delta_uncontrolled = model.uncontrolled();
    for (int j = 0; j <= spec.ny; j += spec.stride)
        for (int i = 0; i <= spec.nx; i += spec.stride) {
            DeltaMapEntry e;
            e.x = i * spec.h;
            e.y = j * spec.h;
            e.delta = r.delta_uncontrolled;
            e.admissible = model.admissible({e.x, e.y, spec.w, spec.h_side});
            r.delta_map.push_back(e);
        }

    std::vector<std::size_t> todo;
    for (std::size_t k = 0; k < r.delta_map.size(); ++k)
        if (r.delta_map[k].admissible) todo.push_back(k);
    if (todo.empty()) throw InfeasibleError("exhaustive_search: no admissible obstacle position");

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(spec.jobs));
    auto worker = [&](std::size_t id) {
        try {
            for (std::size_t n = next++; n < todo.size(); n = next++) {
                auto& e = r.delta_map[todo[n]];
                e.delta = model.cost({e.x, e.y, spec.w, spec.h_side});
            }
        } catch (...) {
            failures[id] = std::current_exception();
            next = todo.size();
        }
    };
    const std::size_t jobs = std::min<std::size_t>(static_cast<std::size_t>(spec.jobs), todo.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker, t);
    worker(0);
    for (auto& t : pool) t.join();
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);

    std::size_t best = todo.front();
    for (std::size_t k : todo) {
        const auto& e = r.delta_map[k];
        r.evaluations.push_back({{e.x, e.y, spec.w, spec.h_side}, e.delta});
        if (e.delta < r.delta_map[best].delta) best = k;
    }
    r.lambda_star = {r.delta_map[best].x, r.delta_map[best].y, spec.w, spec.h_side};
    r.delta_star = r.delta_map[best].delta;
    r.simulations = todo.size();
    return r;
}

ObstacleParam perturb(const ObstacleParam& lambda, int rule, int p, double h) {
    if (rule < 1 || rule > 8) throw InputError("perturb: rule must lie in 1..8");
    if (p < 1 || p > 5) throw InputError("perturb: p must lie in 1..5");
    ObstacleParam out = lambda;
    const double move = p * h;
    const double stretch = 2.0 * p * h;
    switch (rule) {
        case 1: out.x += move; break;
        case 2: out.x -= move; break;
        case 3: out.y += move; break;
        case 4: out.y -= move; break;
        case 5: out.w += stretch; break;
        case 6: out.w = std::max(h, out.w - stretch); break;
        case 7: out.h += stretch; break;
        case 8: out.h = std::max(h, out.h - stretch); break;
    }
    return out;
}

void validate(const CompassSpec& spec) {
    if (!(spec.h > 0.0)) throw InputError("compass: cell size must be positive");
    if (spec.max_steps < 0) throw InputError("compass: max_steps must be >= 0");
    if (spec.stall_limit < 1) throw InputError("compass: stall_limit must be >= 1");
    if (!(spec.anneal.cooling > 0.0 && spec.anneal.cooling < 1.0))
        throw InputError("compass: cooling must lie in (0, 1)");
}

namespace {

using Key = std::tuple<long long, long long, long long, long long>;

Key quantize(const ObstacleParam& l, double h) {
    auto q = [h](double v) { return std::llround(2.0 * v / h); };
    return {q(l.x), q(l.y), q(l.w), q(l.h)};
}

}  // namespace

SearchResult compass_search(const CostModel& model, const ObstacleParam& lambda0, const CompassSpec& spec) {
    validate(spec);
    if (!model.admissible(lambda0)) throw InputError("compass: starting obstacle is not admissible");

    SearchResult r;
    r.delta_uncontrolled = model.uncontrolled();
    std::map<Key, double> memo;
    auto cost = [&](const ObstacleParam& l) {
        const Key k = quantize(l, spec.h);
        if (auto it = memo.find(k); it != memo.end()) return it->second;
        const double d = model.cost(l);
        ++r.simulations;
        memo.emplace(k, d);
        r.evaluations.push_back({l, d});
        return d;
    };

    ObstacleParam cur = lambda0;
    double dcur = cost(cur);
    r.lambda_star = cur;
    r.delta_star = dcur;
    r.log.push_back({0, 0, 0, cur, dcur, true});

    std::mt19937_64 rng(spec.anneal.seed);
    auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    double T = spec.anneal.T0 >= 0.0 ? spec.anneal.T0 : 0.1 * dcur;
    int stall = 0;

    for (int step = 1; step <= spec.max_steps && stall < spec.stall_limit; ++step) {
        const int p = 1 + static_cast<int>(rng() % 5);
        const int rule = 1 + static_cast<int>(rng() % 8);
        const ObstacleParam cand = perturb(cur, rule, p, spec.h);
        CompassStep log{step, rule, p, cand, std::nullopt, false};
        if (model.admissible(cand)) {
            const double d = cost(cand);
            log.delta = d;
            bool accept = d < dcur;
            if (!accept && spec.anneal.enabled && T > 0.0) accept = uniform() < std::exp(-(d - dcur) / T);
            if (accept) {
                cur = cand;
                dcur = d;
            }
            log.accepted = accept;
            if (d < r.delta_star) {
                r.delta_star = d;
                r.lambda_star = cand;
            }
        }
        stall = log.accepted ? 0 : stall + 1;
        r.log.push_back(log);
        T *= spec.anneal.cooling;
    }
    return r;
}

void write_delta_map_csv(std::ostream& os, const SearchResult& r) {
    os << "x_O,y_O,delta,admissible\n";
    for (const auto& e : r.delta_map) os << e.x << ',' << e.y << ',' << e.delta << ',' << (e.admissible ? 1 : 0) << '\n';
}

void write_evaluations_csv(std::ostream& os, const SearchResult& r) {
    os << "step,rule,p,x_O,y_O,w,h_side,delta,accepted\n";
    for (const auto& s : r.log) {
        os << s.step << ',' << s.rule << ',' << s.p << ',' << s.lambda.x << ',' << s.lambda.y << ',' << s.lambda.w
           << ',' << s.lambda.h << ',';
        if (s.delta) os << *s.delta;
        os << ',' << (s.accepted ? 1 : 0) << '\n';
    }
}

}  // namespace crowd
