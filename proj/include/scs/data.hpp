#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scs/task.hpp"

namespace scs {

/// The default evaluation seeds.
std::vector<uint64_t> default_seeds();

/// Loads tab-separated rows: sentence1 [TAB sentence2] TAB label-name. An
/// optional first row whose label column is not a known label name is treated
/// as a header. Throws on column-count or label-name violations, with the
/// line number.
std::vector<InputExample> load_tsv(const std::string& path, const TaskSpec& spec);

void save_tsv(const std::string& path, std::span<const InputExample> examples, const TaskSpec& spec);

/// Seeded K-shot sampling: exactly K examples per class for train and another
/// disjoint K per class for dev, drawn by per-class shuffle. Requires every
/// class to hold at least 2K examples.
std::pair<std::vector<InputExample>, std::vector<InputExample>> sample_few_shot(
    std::span<const InputExample> dataset, const TaskSpec& spec, int k, uint64_t seed);

}  // namespace scs
