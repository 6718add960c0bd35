#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scs/scoring.hpp"

namespace scs {

struct TrainConfig {
    double learning_rate = 1e-5;
    int batch_size = 2;
    int epochs = 15;
    int eval_every = 50;
    double warmup_ratio = 0.05;
    int early_stop_patience = 10;  // evaluations without improvement
    uint64_t seed = 42;

    // AdamW internals; the schedule-level knobs above are the contract.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;

    void validate() const;
};

/// Linear warmup to the peak at step ceil(warmup_ratio * total), then linear
/// decay to exactly 0 at step total. step counts optimizer updates, 0-based
/// value before any update is 0 when warmup is active.
double lr_at(long step, long total_steps, double peak, double warmup_ratio);

/// AdamW with decoupled weight decay over a flat parameter vector.
class AdamW {
public:
    AdamW(size_t n, double beta1, double beta2, double eps, double weight_decay);

    /// grad_scale multiplies the raw gradient (used for batch averaging).
    void step(std::span<double> params, std::span<const double> grads, double lr, double grad_scale = 1.0);

private:
    std::vector<double> m_, v_;
    double beta1_, beta2_, eps_, weight_decay_;
    long t_ = 0;
};

/// Loss of one example: per-component cross-entropies against the gold label
/// combined with the lambda weights.
struct ExampleLoss {
    double total = 0.0;
    std::vector<double> parts;  // label word first, then sentence components
    std::vector<ComponentDistribution> components;
};

/// Pure loss path from already-computed logits. When dlogits is non-null it
/// receives dLoss/dz for every prompt, shaped like the inputs.
ExampleLoss loss_from_logits(std::span<const BuiltPrompt> prompts, std::span<const TokenLogits> logits,
                             const IdfTable* idf, const LambdaWeights& lambda, int gold_label,
                             std::vector<std::vector<double>>* dlogits);

/// Builds prompts, runs the scorer in training mode, and (optionally)
/// backpropagates the loss gradients into the scorer. Throws when the gold
/// label is missing.
ExampleLoss example_loss(const InputExample& example, const TaskSpec& spec, TrainableScorer& scorer,
                         const Tokenizer& tokenizer, const IdfTable* idf, const LambdaWeights& lambda,
                         size_t max_len, bool accumulate_grad);

/// Task metric of a scorer over a labelled example set.
double evaluate_scorer(const Scorer& scorer, std::span<const InputExample> examples, const TaskSpec& spec,
                       const Tokenizer& tokenizer, const IdfTable* idf, const LambdaWeights& lambda,
                       size_t max_len);

struct Checkpoint {
    std::vector<double> params;
    long step = 0;
    double dev_metric = 0.0;
    double lambda0 = 0.0;
};

struct FinetuneResult {
    Checkpoint best;
    std::vector<double> dev_trace;  // dev metric at every evaluation, in order
    long steps_run = 0;
};

/// AdamW finetuning with the linear warmup/decay schedule, periodic dev
/// evaluation, best-checkpoint tracking, and early stopping. The scorer is
/// left holding the best parameters. Deterministic for a fixed seed. Throws
/// if the loss turns non-finite.
FinetuneResult finetune(std::span<const InputExample> train, std::span<const InputExample> dev,
                        const TaskSpec& spec, TrainableScorer& scorer, const Tokenizer& tokenizer,
                        const IdfTable* idf, const LambdaWeights& lambda, const TrainConfig& config,
                        size_t max_len);

/// The 31 candidate mixture weights 0, 1/30, ..., 1.
std::vector<double> lambda0_grid();

using ScorerFactory = std::function<std::unique_ptr<TrainableScorer>()>;

struct GridPoint {
    double lambda0 = 0.0;
    double dev_metric = 0.0;
};

struct GridSearchResult {
    double lambda0 = 0.0;
    Checkpoint best;
    std::vector<GridPoint> points;
};

/// Trains one fresh scorer per grid value (all from the same factory
/// snapshot) and keeps the value with the best dev metric, ties toward the
/// smaller lambda0. jobs > 1 runs grid points on worker threads; results are
/// independent of the thread count.
GridSearchResult grid_search_lambda0(std::span<const InputExample> train, std::span<const InputExample> dev,
                                     const TaskSpec& spec, const ScorerFactory& factory,
                                     const Tokenizer& tokenizer, const IdfTable* idf,
                                     const TrainConfig& config, size_t max_len, int jobs = 1);

/// Checkpoint metadata persisted next to the binary parameter snapshot.
struct CheckpointMeta {
    long step = 0;
    double dev_metric = 0.0;
    double lambda0 = 0.0;
    uint64_t seed = 0;
    std::string config_hash;
};

class ToyDiscriminator;

void save_checkpoint(const std::string& path, const ToyDiscriminator& model, const CheckpointMeta& meta);
std::pair<ToyDiscriminator, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace scs
