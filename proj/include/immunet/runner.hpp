#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>

#include "immunet/config.hpp"
#include "immunet/world.hpp"

namespace immunet {

/// A world plus the underlay it points into (kept alive alongside it).
struct RunContext {
    std::unique_ptr<UnderlayGraph> underlay;
    World world;
};

/// Build the world for one run: preset traces are scaled and synthesized
/// over a fresh transit-stub underlay; anything else is loaded as a trace
/// file and attached to underlay hosts one-to-one. Deterministic per seed.
RunContext build_run_context(const ExperimentConfig& cfg, const std::string& trace,
                             std::uint64_t seed, std::uint32_t n_external);

/// Execute the expanded run grid, writing per-run CSVs, figure-ready .dat
/// files, and a summary JSON under cfg.output_dir. With dry_run, print the
/// matrix and execute nothing. Returns 0 on success, 1 if any run failed
/// (completed artifacts are preserved).
int run_experiment(const ExperimentConfig& cfg, bool dry_run, std::ostream& log);

}  // namespace immunet
