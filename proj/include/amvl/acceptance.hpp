#pragma once

#include <string>
#include <vector>

#include "amvl/analysis.hpp"
#include "amvl/config.hpp"
#include "amvl/workload.hpp"

namespace amvl {

struct CriterionResult {
    int number = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

// Runs every acceptance criterion against a completed three-run benchmark.
// Criteria 1-5 and 10 evaluate the produced reports; 6-8 and 11 are
// self-contained property checks with independent oracles; 9 performs a
// second same-seed benchmark plus a trace export/replay round-trip under
// out_dir/check_scratch.
std::vector<CriterionResult> run_acceptance(const EngineConfig& cfg, const std::string& out_dir,
                                            const std::vector<RunReport>& reports,
                                            const std::vector<WorkloadEvent>& events);

}  // namespace amvl
