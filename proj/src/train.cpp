#include "scs/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "scs/metrics.hpp"
#include "scs/model.hpp"
#include "scs/rng.hpp"

namespace scs {

void TrainConfig::validate() const {
    if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
    if (eval_every <= 0) throw std::invalid_argument("eval_every must be positive");
    if (warmup_ratio < 0.0 || warmup_ratio >= 1.0) throw std::invalid_argument("warmup_ratio must lie in [0,1)");
    if (early_stop_patience <= 0) throw std::invalid_argument("early_stop_patience must be positive");
}

double lr_at(long step, long total_steps, double peak, double warmup_ratio) {
    if (total_steps <= 0) throw std::invalid_argument("total_steps must be positive");
    if (step < 0) throw std::invalid_argument("step must be >= 0");
    if (step > total_steps) return 0.0;
    const long warmup = static_cast<long>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
    if (warmup > 0 && step <= warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
    if (total_steps == warmup) return peak;  // degenerate tiny-run case
    return peak * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

AdamW::AdamW(size_t n, double beta1, double beta2, double eps, double weight_decay)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

void AdamW::step(std::span<double> params, std::span<const double> grads, double lr, double grad_scale) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw std::invalid_argument("optimizer size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i] * grad_scale;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * params[i]);
    }
}

ExampleLoss loss_from_logits(std::span<const BuiltPrompt> prompts, std::span<const TokenLogits> logits,
                             const IdfTable* idf, const LambdaWeights& lambda, int gold_label,
                             std::vector<std::vector<double>>* dlogits) {
    if (prompts.empty() || prompts.size() != logits.size())
        throw std::invalid_argument("one logit sequence per prompt is required");
    if (gold_label < 0 || static_cast<size_t>(gold_label) >= prompts.size())
        throw std::invalid_argument("gold label out of range");

    if (dlogits) {
        dlogits->assign(prompts.size(), {});
        for (size_t l = 0; l < prompts.size(); ++l) (*dlogits)[l].assign(logits[l].size(), 0.0);
    }

    ExampleLoss out;

    std::vector<size_t> label_positions;
    label_positions.reserve(prompts.size());
    for (const auto& p : prompts) label_positions.push_back(p.label_word_position());

    // Label-word component.
    {
        ComponentDistribution dist = label_word_consistency(logits, label_positions);
        const double part = -std::log(dist.probs[static_cast<size_t>(gold_label)]);
        out.total += lambda.label_word * part;
        if (dlogits) {
            for (size_t l = 0; l < prompts.size(); ++l) {
                const double delta = static_cast<int>(l) == gold_label ? 1.0 : 0.0;
                (*dlogits)[l][label_positions[l]] += lambda.label_word * (delta - dist.probs[l]);
            }
        }
        out.parts.push_back(part);
        out.components.push_back(std::move(dist));
    }

    // Sentence components, in the fixed Sent1/Sent2 order.
    size_t sent_index = 0;
    for (Component c : {Component::Sent1, Component::Sent2}) {
        const ComponentSpan* span = prompts[0].span(c);
        if (!span) continue;
        if (sent_index >= lambda.sentence.size())
            throw std::invalid_argument("component count does not match the lambda arity");
        const double lam = lambda.sentence[sent_index++];

        const std::vector<double> raw = idf ? token_weights(prompts[0], *span, *idf)
                                            : std::vector<double>(span->positions.size(), 1.0);
        ComponentDistribution dist = subsequence_consistency(logits, *span, raw);
        const double part = -std::log(dist.probs[static_cast<size_t>(gold_label)]);
        out.total += lam * part;
        if (dlogits) {
            const std::vector<double> norm = normalized_span_weights(raw);
            for (size_t l = 0; l < prompts.size(); ++l) {
                const double delta = static_cast<int>(l) == gold_label ? 1.0 : 0.0;
                const double coeff = lam * (delta - dist.probs[l]);
                for (size_t i = 0; i < span->positions.size(); ++i)
                    (*dlogits)[l][span->positions[i]] += coeff * norm[i];
            }
        }
        out.parts.push_back(part);
        out.components.push_back(std::move(dist));
    }
    if (sent_index != lambda.sentence.size())
        throw std::invalid_argument("component count does not match the lambda arity");

    return out;
}

ExampleLoss example_loss(const InputExample& example, const TaskSpec& spec, TrainableScorer& scorer,
                         const Tokenizer& tokenizer, const IdfTable* idf, const LambdaWeights& lambda,
                         size_t max_len, bool accumulate_grad) {
    if (!example.gold_label) throw std::invalid_argument("training example lacks a gold label");
    const std::vector<BuiltPrompt> prompts = build_prompts(example, spec, tokenizer, max_len);
    const std::vector<TokenLogits> logits = scorer.forward(prompts);

    std::vector<std::vector<double>> dlogits;
    ExampleLoss loss =
        loss_from_logits(prompts, logits, idf, lambda, *example.gold_label, accumulate_grad ? &dlogits : nullptr);
    if (accumulate_grad) scorer.backward(dlogits);
    return loss;
}

double evaluate_scorer(const Scorer& scorer, std::span<const InputExample> examples, const TaskSpec& spec,
                       const Tokenizer& tokenizer, const IdfTable* idf, const LambdaWeights& lambda,
                       size_t max_len) {
    if (examples.empty()) throw std::invalid_argument("cannot evaluate on an empty set");
    std::vector<int> preds, golds;
    preds.reserve(examples.size());
    golds.reserve(examples.size());
    for (const auto& ex : examples) {
        if (!ex.gold_label) throw std::invalid_argument("evaluation example lacks a gold label");
        preds.push_back(predict(ex, spec, scorer, tokenizer, idf, lambda, max_len).predicted);
        golds.push_back(*ex.gold_label);
    }
    return evaluate_metric(preds, golds, spec.metric, spec.positive_label);
}

FinetuneResult finetune(std::span<const InputExample> train, std::span<const InputExample> dev,
                        const TaskSpec& spec, TrainableScorer& scorer, const Tokenizer& tokenizer,
                        const IdfTable* idf, const LambdaWeights& lambda, const TrainConfig& config,
                        size_t max_len) {
    config.validate();
    if (train.empty()) throw std::invalid_argument("empty training set");
    if (dev.empty()) throw std::invalid_argument("empty dev set");

    const long steps_per_epoch =
        (static_cast<long>(train.size()) + config.batch_size - 1) / config.batch_size;
    const long total_steps = steps_per_epoch * config.epochs;

    AdamW opt(scorer.parameters().size(), config.beta1, config.beta2, config.adam_eps, config.weight_decay);
    Rng rng(config.seed);

    FinetuneResult result;
    result.best.params.assign(scorer.parameters_const().begin(), scorer.parameters_const().end());
    result.best.dev_metric = evaluate_scorer(scorer, dev, spec, tokenizer, idf, lambda, max_len);
    result.best.step = 0;
    result.dev_trace.push_back(result.best.dev_metric);

    long step = 0;
    long last_eval_step = 0;
    int stale_evals = 0;
    bool stop = false;

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});

    auto evaluate_now = [&]() {
        const double metric = evaluate_scorer(scorer, dev, spec, tokenizer, idf, lambda, max_len);
        result.dev_trace.push_back(metric);
        last_eval_step = step;
        if (metric > result.best.dev_metric) {
            result.best.dev_metric = metric;
            result.best.step = step;
            result.best.params.assign(scorer.parameters_const().begin(), scorer.parameters_const().end());
            stale_evals = 0;
        } else if (++stale_evals >= config.early_stop_patience) {
            stop = true;
        }
    };

    for (int epoch = 0; epoch < config.epochs && !stop; ++epoch) {
        rng.shuffle(order);
        for (size_t start = 0; start < order.size() && !stop; start += static_cast<size_t>(config.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            scorer.zero_grad();
            double batch_loss = 0.0;
            for (size_t i = start; i < end; ++i)
                batch_loss += example_loss(train[order[i]], spec, scorer, tokenizer, idf, lambda, max_len, true).total;
            if (!std::isfinite(batch_loss)) throw std::runtime_error("training diverged: non-finite loss");

            ++step;
            const double lr = lr_at(step, total_steps, config.learning_rate, config.warmup_ratio);
            opt.step(scorer.parameters(), scorer.gradients(), lr, 1.0 / static_cast<double>(end - start));

            if (step % config.eval_every == 0) evaluate_now();
        }
        if (!stop && last_eval_step != step) evaluate_now();
    }

    result.steps_run = step;
    std::copy(result.best.params.begin(), result.best.params.end(), scorer.parameters().begin());
    return result;
}

std::vector<double> lambda0_grid() {
    std::vector<double> grid(31);
    for (int i = 0; i <= 30; ++i) grid[static_cast<size_t>(i)] = static_cast<double>(i) / 30.0;
    return grid;
}

GridSearchResult grid_search_lambda0(std::span<const InputExample> train, std::span<const InputExample> dev,
                                     const TaskSpec& spec, const ScorerFactory& factory,
                                     const Tokenizer& tokenizer, const IdfTable* idf,
                                     const TrainConfig& config, size_t max_len, int jobs) {
    const std::vector<double> grid = lambda0_grid();
    std::vector<Checkpoint> checkpoints(grid.size());
    std::vector<double> metrics(grid.size(), 0.0);

    auto run_point = [&](size_t i) {
        const LambdaWeights lambda = LambdaWeights::for_task(spec, grid[i]);
        std::unique_ptr<TrainableScorer> scorer = factory();
        FinetuneResult r = finetune(train, dev, spec, *scorer, tokenizer, idf, lambda, config, max_len);
        r.best.lambda0 = grid[i];
        metrics[i] = r.best.dev_metric;
        checkpoints[i] = std::move(r.best);
    };

    if (jobs <= 1) {
        for (size_t i = 0; i < grid.size(); ++i) run_point(i);
    } else {
        std::vector<std::thread> workers;
        workers.reserve(static_cast<size_t>(jobs));
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w]() {
                for (size_t i = static_cast<size_t>(w); i < grid.size(); i += static_cast<size_t>(jobs))
                    run_point(i);
            });
        }
        for (auto& t : workers) t.join();
    }

    GridSearchResult out;
    size_t winner = 0;  // ties fall to the smaller lambda0 via strict improvement
    for (size_t i = 1; i < grid.size(); ++i)
        if (metrics[i] > metrics[winner]) winner = i;
    out.lambda0 = grid[winner];
    out.best = std::move(checkpoints[winner]);
    out.points.reserve(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) out.points.push_back({grid[i], metrics[i]});
    return out;
}

void save_checkpoint(const std::string& path, const ToyDiscriminator& model, const CheckpointMeta& meta) {
    model.save_file(path);
    nlohmann::json j{{"version", 1},
                     {"step", meta.step},
                     {"dev_metric", meta.dev_metric},
                     {"lambda0", meta.lambda0},
                     {"seed", meta.seed},
                     {"config_hash", meta.config_hash}};
    std::ofstream out(path + ".meta.json");
    if (!out) throw std::runtime_error("cannot write " + path + ".meta.json");
    out << j.dump(2) << "\n";
}

std::pair<ToyDiscriminator, CheckpointMeta> load_checkpoint(const std::string& path) {
    std::ifstream in(path + ".meta.json");
    if (!in) throw std::runtime_error("cannot read " + path + ".meta.json");
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported checkpoint version");
    CheckpointMeta meta;
    meta.step = j.at("step").get<long>();
    meta.dev_metric = j.at("dev_metric").get<double>();
    meta.lambda0 = j.at("lambda0").get<double>();
    meta.seed = j.at("seed").get<uint64_t>();
    meta.config_hash = j.at("config_hash").get<std::string>();
    return {ToyDiscriminator::load_file(path), meta};
}

}  // namespace scs
