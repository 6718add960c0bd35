#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scs/data.hpp"
#include "scs/metrics.hpp"
#include "scs/rtd.hpp"
#include "scs/train.hpp"

namespace scs {

/// Scoring variants: full (IDF-weighted sentence components), no-idf
/// (uniform token weights), label-only (lambda0 forced to 1, grid skipped).
enum class Mode { Full, NoIdf, LabelOnly };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);

struct RunRecord {
    std::string task;
    uint64_t seed = 0;
    int k = 0;
    double lambda0 = 0.0;
    std::string mode;
    double overall = 0.0;                     // O.M
    double unanimous_ratio = 0.0;             // U.R
    std::optional<double> unanimous_metric;   // U.M, absent when no example is unanimous
    std::optional<double> disagreed_metric;   // D.M, absent when every example is unanimous
    long unanimous_count = 0;
    long test_size = 0;
    std::string config_hash;
    std::string timestamp;
};

nlohmann::json record_to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

void write_records(const std::string& path, std::span<const RunRecord> records, bool append = false);
std::vector<RunRecord> read_records(const std::string& path);

std::string iso_timestamp();

struct ExperimentConfig {
    TaskSpec spec;
    std::vector<InputExample> train_data;  // full training set; splits are drawn from it
    std::vector<InputExample> test_data;
    std::vector<std::string> pretrain_corpus;
    std::vector<uint64_t> seeds = default_seeds();
    std::vector<int> ks = {16};
    Mode mode = Mode::Full;
    std::optional<double> lambda0_override;  // skips the grid search
    TrainConfig train;
    ToyEncoderConfig encoder;  // vocab_size 0 is filled from the tokenizer
    double replacement_rate = 0.15;
    ReplacementSampler sampler = ReplacementSampler::UnigramFrequency;
    long pretrain_steps = 1500;
    RtdOptim rtd_optim;
    size_t max_len = 64;
    std::string cache_dir;  // empty disables the pretraining cache
    int jobs = 1;           // worker threads for the lambda0 grid
};

/// Content fingerprint of everything that shapes the pretrained scorer.
uint64_t pretrain_fingerprint(const RtdCorpusConfig& rtd, const ToyEncoderConfig& encoder,
                              const Tokenizer& tokenizer, long steps, const RtdOptim& optim);

/// Pretrains the scorer or reuses a cached copy keyed by the fingerprint.
ToyDiscriminator pretrain_or_load(const RtdCorpusConfig& rtd, const ToyEncoderConfig& encoder,
                                  const Tokenizer& tokenizer, long steps, const RtdOptim& optim,
                                  const std::string& cache_dir, std::ostream* log);

/// Scores a test set with a finished scorer and fills the metric fields of a
/// record (overall plus the unanimous/disagreed decomposition).
void evaluate_into_record(const Scorer& scorer, std::span<const InputExample> test, const TaskSpec& spec,
                          const Tokenizer& tokenizer, const IdfTable* idf, const LambdaWeights& lambda,
                          size_t max_len, RunRecord& record);

/// For each (K, seed): sample the splits, resolve lambda0 (grid search unless
/// overridden or label-only), finetune from the shared pretrained scorer, and
/// evaluate on the test set. Deterministic apart from timestamps.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const Tokenizer& tokenizer,
                                      std::ostream* log = nullptr);

struct SummaryRow {
    std::string task;
    std::string mode;
    int k = 0;
    size_t runs = 0;
    MeanStd overall;
    MeanStd unanimous_ratio;
    MeanStd unanimous_metric;  // over runs that have a unanimous subset
    double mean_lambda0 = 0.0;
};

/// Groups records by (task, mode, K), preserving first-seen order.
std::vector<SummaryRow> summarize(std::span<const RunRecord> records);

}  // namespace scs
