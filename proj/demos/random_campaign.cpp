// Small campaign over mixed dimensions; prints the per-check summary.

#include <cstdlib>
#include <iostream>

#include "qgeom/qgeom.hpp"

int main(int argc, char** argv) {
    qgeom::CampaignConfig cfg;
    cfg.n_trials = argc > 1 ? std::atol(argv[1]) : 200;
    cfg.base_seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;
    const auto report = qgeom::run_campaign(cfg);
    const auto doc = qgeom::campaign_to_json(report);
    std::cout << doc["summary"].dump(2) << '\n';
    return report.violations() == 0 ? 0 : 1;
}
