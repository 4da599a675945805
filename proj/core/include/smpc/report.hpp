#pragma once

#include <string>
#include <vector>

#include "smpc/json_io.hpp"
#include "smpc/simulation.hpp"

namespace smpc {

// One row per step per run:
//   run, t, x1..xn, xhat1.., xbar1.., u1..um, strategy, J_star, margin per constraint
void write_trace_csv(const std::vector<RunRecord>& records, const SimConfig& cfg,
                     const std::string& path);

Json summary_to_json(const McSummary& s, const SimConfig& cfg, const ControllerDesign& d);

void write_json(const Json& j, const std::string& path);

// Mean +/- 2 sigma envelopes for states and inputs.
void write_envelope_svg(const McSummary& s, const std::string& path);

// Feasible-set scatter for the scanned variants.
void write_scan_svg(const ScanResult& scan, const std::string& path);

Json scan_to_json(const ScanResult& scan);

}  // namespace smpc
