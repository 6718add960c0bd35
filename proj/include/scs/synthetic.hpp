#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scs/task.hpp"

namespace scs {

/// A self-contained sentiment-like world for end-to-end runs: a 2-class task,
/// K-shot train/dev splits, a balanced test set, the full pool the splits
/// were drawn from (document-frequency source), and a pretraining corpus.
/// Sentences are linearly separable by construction: every sentence contains
/// polarity words from exactly one class's list.
struct SyntheticWorld {
    TaskSpec spec;
    std::vector<InputExample> train;  // K per class
    std::vector<InputExample> dev;    // K per class, disjoint from train
    std::vector<InputExample> test;
    std::vector<InputExample> train_pool;
    std::vector<std::string> pretrain_corpus;
};

/// The fixed word list the generator draws from; independent of the seed, so
/// tokenizers and pretrained scorers are shareable across seeds.
std::vector<std::string> synthetic_vocabulary();

SyntheticWorld make_synthetic_task(uint64_t seed, int k = 16, int test_per_class = 200,
                                   int pool_per_class = 300, int corpus_size = 5000);

}  // namespace scs
