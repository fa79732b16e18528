#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "crowd/behaviors.hpp"
#include "crowd/scenario.hpp"

namespace crowd {

enum class CostKind { Delta1, Delta2, Delta3 };

const char* to_string(CostKind k);
/// Accepts d1/d2/d3 and delta1/delta2/delta3.
CostKind parse_cost(const std::string& name);

struct CostSpec {
    CostKind kind = CostKind::Delta1;
    Metrics target;
};

/// Distance between controlled-natural and target metrics: evacuation-time
/// gap, Euclidean norm of the exit-usage difference, or peak-density gap.
double evaluate_cost(const CostSpec& spec, const Metrics& controlled);

/// What the searches need to know about a problem. Implementations must be
/// safe to call from several threads at once.
class CostModel {
public:
    virtual ~CostModel() = default;
    virtual bool admissible(const ObstacleParam& lambda) const = 0;
    virtual double cost(const ObstacleParam& lambda) const = 0;
    /// Cost of the natural behavior without the controlled obstacle.
    virtual double uncontrolled() const = 0;
};

/// Natural behavior simulated on a dimensionless scenario, compared against
/// precomputed target metrics.
class SimulationCost : public CostModel {
public:
    SimulationCost(Scenario dimensionless, BehaviorSpec natural, CostSpec spec, SimulationOptions opt = {});

    bool admissible(const ObstacleParam& lambda) const override;
    double cost(const ObstacleParam& lambda) const override;
    double uncontrolled() const override;
    Metrics run(const std::optional<ObstacleParam>& lambda) const;

    const Scenario& scenario() const { return s_; }

private:
    Scenario s_;
    BehaviorSpec natural_;
    CostSpec spec_;
    SimulationOptions opt_;
    mutable std::optional<double> uncontrolled_;
};

/// Cost model built from plain functions (tests, stubs).
class FunctionCost : public CostModel {
public:
    FunctionCost(std::function<bool(const ObstacleParam&)> admissible, std::function<double(const ObstacleParam&)> cost,
                 double uncontrolled)
        : admissible_(std::move(admissible)), cost_(std::move(cost)), uncontrolled_(uncontrolled) {}

    bool admissible(const ObstacleParam& l) const override { return admissible_(l); }
    double cost(const ObstacleParam& l) const override { return cost_(l); }
    double uncontrolled() const override { return uncontrolled_; }

private:
    std::function<bool(const ObstacleParam&)> admissible_;
    std::function<double(const ObstacleParam&)> cost_;
    double uncontrolled_;
};

struct Evaluation {
    ObstacleParam lambda;
    double delta = 0.0;
};

struct DeltaMapEntry {
    double x = 0.0;
    double y = 0.0;
    double delta = 0.0;  // uncontrolled cost where inadmissible
    bool admissible = false;
};

/// One compass step. Step 0 is the starting point (rule 0, p 0).
struct CompassStep {
    int step = 0;
    int rule = 0;
    int p = 0;
    ObstacleParam lambda;
    std::optional<double> delta;  // empty for inadmissible candidates
    bool accepted = false;
};

struct SearchResult {
    ObstacleParam lambda_star;
    double delta_star = 0.0;
    double delta_uncontrolled = 0.0;
    std::vector<Evaluation> evaluations;
    std::vector<DeltaMapEntry> delta_map;  // exhaustive only
    std::vector<CompassStep> log;          // compass only
    std::size_t simulations = 0;
};

struct ExhaustiveSpec {
    int nx = 0;  // barycenters run over the (nx + 1) x (ny + 1) grid nodes
    int ny = 0;
    double h = 0.0;
    double w = 0.0;  // obstacle sides
    double h_side = 0.0;
    int stride = 1;
    int jobs = 1;
};

/// Evaluates every admissible node (row-major, x fastest). Ties go to the
/// lowest index. Throws InfeasibleError if no node is admissible.
SearchResult exhaustive_search(const CostModel& model, const ExhaustiveSpec& spec);

/// Rules 1-4 move the barycenter by p cells (+x, -x, +y, -y); rules 5-8
/// stretch or shrink w (5, 6) and h_side (7, 8) by 2p cells, never below one cell.
ObstacleParam perturb(const ObstacleParam& lambda, int rule, int p, double h);

struct AnnealSpec {
    bool enabled = true;
    double T0 = -1.0;  // negative means 0.1 x cost of the starting point
    double cooling = 0.95;
    std::uint64_t seed = 1;
};

struct CompassSpec {
    double h = 0.0;
    int max_steps = 200;
    int stall_limit = 200;
    AnnealSpec anneal;
};

void validate(const CompassSpec& spec);

/// Throws InputError when lambda0 is not admissible.
SearchResult compass_search(const CostModel& model, const ObstacleParam& lambda0, const CompassSpec& spec);

void write_delta_map_csv(std::ostream& os, const SearchResult& r);
void write_evaluations_csv(std::ostream& os, const SearchResult& r);

}  // namespace crowd
