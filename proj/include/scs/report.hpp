#pragma once

#include <span>
#include <string>

#include "scs/experiment.hpp"

namespace scs {

/// Mean/std per (task, mode, K) group.
std::string format_summary_table(std::span<const SummaryRow> rows);

/// Chosen lambda0 per seed, one row per (task, mode, K).
std::string format_lambda_table(std::span<const RunRecord> records);

/// Per-run reject-option decomposition: overall metric, unanimous ratio, and
/// the unanimous/disagreed subset metrics.
std::string format_reject_table(std::span<const RunRecord> records);

/// All of the above, in order.
std::string format_report(std::span<const RunRecord> records);

}  // namespace scs
