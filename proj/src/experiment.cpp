#include "scs/experiment.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "scs/rng.hpp"

namespace scs {

namespace {

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

std::string document_text(const InputExample& ex) {
    std::string text = ex.sentence1;
    if (ex.sentence2) {
        text += ' ';
        text += *ex.sentence2;
    }
    return text;
}

// Everything that determines a run's outputs, for the record's config hash.
std::string run_signature(const ExperimentConfig& c, const ToyEncoderConfig& enc, uint64_t seed, int k,
                          double lambda0, bool grid_used) {
    std::ostringstream s;
    s << c.spec.name << '\n' << mode_name(c.mode) << '\n' << seed << ' ' << k << '\n';
    s << lambda0 << ' ' << grid_used << '\n';
    s << c.train.learning_rate << ' ' << c.train.batch_size << ' ' << c.train.epochs << ' '
      << c.train.eval_every << ' ' << c.train.warmup_ratio << ' ' << c.train.early_stop_patience << ' '
      << c.train.weight_decay << '\n';
    s << enc.vocab_size << ' ' << enc.embedding_dim << ' ' << enc.layers << ' ' << enc.heads << ' '
      << enc.max_positions << ' ' << enc.dropout << '\n';
    s << c.pretrain_steps << ' ' << c.replacement_rate << ' '
      << (c.sampler == ReplacementSampler::UniformVocab ? "uniform" : "unigram") << ' ' << c.rtd_optim.seed
      << '\n';
    s << c.max_len << '\n';
    return s.str();
}

}  // namespace

Mode parse_mode(const std::string& name) {
    if (name == "full") return Mode::Full;
    if (name == "no-idf") return Mode::NoIdf;
    if (name == "label-only") return Mode::LabelOnly;
    throw std::invalid_argument("unknown mode '" + name + "' (expected full, no-idf, or label-only)");
}

std::string mode_name(Mode mode) {
    switch (mode) {
        case Mode::Full: return "full";
        case Mode::NoIdf: return "no-idf";
        case Mode::LabelOnly: return "label-only";
    }
    throw std::logic_error("unknown mode");
}

nlohmann::json record_to_json(const RunRecord& r) {
    nlohmann::json j{{"task", r.task},
                     {"seed", r.seed},
                     {"k", r.k},
                     {"lambda0", r.lambda0},
                     {"mode", r.mode},
                     {"overall", r.overall},
                     {"unanimous_ratio", r.unanimous_ratio},
                     {"unanimous_count", r.unanimous_count},
                     {"test_size", r.test_size},
                     {"config_hash", r.config_hash},
                     {"timestamp", r.timestamp}};
    j["unanimous_metric"] = r.unanimous_metric ? nlohmann::json(*r.unanimous_metric) : nlohmann::json();
    j["disagreed_metric"] = r.disagreed_metric ? nlohmann::json(*r.disagreed_metric) : nlohmann::json();
    return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
    RunRecord r;
    r.task = j.at("task").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    r.k = j.at("k").get<int>();
    r.lambda0 = j.at("lambda0").get<double>();
    r.mode = j.at("mode").get<std::string>();
    r.overall = j.at("overall").get<double>();
    r.unanimous_ratio = j.at("unanimous_ratio").get<double>();
    if (!j.at("unanimous_metric").is_null()) r.unanimous_metric = j.at("unanimous_metric").get<double>();
    if (!j.at("disagreed_metric").is_null()) r.disagreed_metric = j.at("disagreed_metric").get<double>();
    r.unanimous_count = j.at("unanimous_count").get<long>();
    r.test_size = j.at("test_size").get<long>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::string>();
    return r;
}

void write_records(const std::string& path, std::span<const RunRecord> records, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

std::vector<RunRecord> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<RunRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

std::string iso_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

uint64_t pretrain_fingerprint(const RtdCorpusConfig& rtd, const ToyEncoderConfig& encoder,
                              const Tokenizer& tokenizer, long steps, const RtdOptim& optim) {
    std::ostringstream s;
    s << encoder.vocab_size << ' ' << encoder.embedding_dim << ' ' << encoder.layers << ' ' << encoder.heads
      << ' ' << encoder.max_positions << ' ' << encoder.dropout << '\n';
    s << steps << ' ' << rtd.replacement_rate << ' '
      << (rtd.sampler == ReplacementSampler::UniformVocab ? "uniform" : "unigram") << '\n';
    s << optim.batch_size << ' ' << optim.learning_rate << ' ' << optim.warmup_ratio << ' ' << optim.seed
      << ' ' << optim.weight_decay << '\n';
    for (int id = 0; id < tokenizer.vocab_size(); ++id) s << tokenizer.id_to_token(id) << '\n';
    s << rtd.corpus.size() << '\n';
    for (const auto& sentence : rtd.corpus) s << sentence << '\n';
    return fnv1a64(s.str());
}

ToyDiscriminator pretrain_or_load(const RtdCorpusConfig& rtd, const ToyEncoderConfig& encoder,
                                  const Tokenizer& tokenizer, long steps, const RtdOptim& optim,
                                  const std::string& cache_dir, std::ostream* log) {
    ToyEncoderConfig enc = encoder;
    if (enc.vocab_size == 0) enc.vocab_size = tokenizer.vocab_size();

    std::string cache_path;
    if (!cache_dir.empty()) {
        cache_path = cache_dir + "/rtd_" + hex64(pretrain_fingerprint(rtd, enc, tokenizer, steps, optim)) + ".bin";
        if (std::filesystem::exists(cache_path)) {
            if (log) *log << "loading pretrained scorer from " << cache_path << "\n";
            return ToyDiscriminator::load_file(cache_path);
        }
    }

    if (log) *log << "pretraining scorer (" << steps << " steps, corpus " << rtd.corpus.size() << ")\n";
    ToyDiscriminator model = pretrain_rtd(rtd, enc, tokenizer, steps, optim);
    if (!cache_path.empty()) {
        std::filesystem::create_directories(cache_dir);
        model.save_file(cache_path);
        if (log) *log << "cached pretrained scorer at " << cache_path << "\n";
    }
    return model;
}

void evaluate_into_record(const Scorer& scorer, std::span<const InputExample> test, const TaskSpec& spec,
                          const Tokenizer& tokenizer, const IdfTable* idf, const LambdaWeights& lambda,
                          size_t max_len, RunRecord& record) {
    if (test.empty()) throw std::invalid_argument("empty test set");

    std::vector<int> preds, golds;
    std::vector<int> u_preds, u_golds, d_preds, d_golds;
    for (const auto& ex : test) {
        if (!ex.gold_label) throw std::invalid_argument("test example lacks a gold label");
        const PredictionResult r = predict(ex, spec, scorer, tokenizer, idf, lambda, max_len);
        preds.push_back(r.predicted);
        golds.push_back(*ex.gold_label);
        if (r.unanimous) {
            u_preds.push_back(r.predicted);
            u_golds.push_back(*ex.gold_label);
        } else {
            d_preds.push_back(r.predicted);
            d_golds.push_back(*ex.gold_label);
        }
    }

    record.test_size = static_cast<long>(test.size());
    record.unanimous_count = static_cast<long>(u_preds.size());
    record.unanimous_ratio = static_cast<double>(u_preds.size()) / static_cast<double>(test.size());
    record.overall = evaluate_metric(preds, golds, spec.metric, spec.positive_label);
    record.unanimous_metric.reset();
    record.disagreed_metric.reset();
    if (!u_preds.empty())
        record.unanimous_metric = evaluate_metric(u_preds, u_golds, spec.metric, spec.positive_label);
    if (!d_preds.empty())
        record.disagreed_metric = evaluate_metric(d_preds, d_golds, spec.metric, spec.positive_label);
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const Tokenizer& tokenizer,
                                      std::ostream* log) {
    if (config.train_data.empty()) throw std::invalid_argument("no training data");
    if (config.test_data.empty()) throw std::invalid_argument("no test data");
    if (config.seeds.empty()) throw std::invalid_argument("no seeds");
    if (config.ks.empty()) throw std::invalid_argument("no K values");
    if (config.lambda0_override &&
        (*config.lambda0_override < 0.0 || *config.lambda0_override > 1.0))
        throw std::invalid_argument("lambda0 override must lie in [0,1]");

    const ValidationReport shape = validate_task(config.spec, tokenizer);
    if (!shape.ok) {
        std::string msg = "invalid task:";
        for (const auto& p : shape.problems) msg += " " + p;
        throw std::invalid_argument(msg);
    }

    // IDF from the full training file (document frequency needs the corpus,
    // not the K-shot sample).
    std::optional<IdfTable> idf_table;
    if (config.mode == Mode::Full) {
        std::vector<std::string> texts;
        texts.reserve(config.train_data.size());
        for (const auto& ex : config.train_data) texts.push_back(document_text(ex));
        idf_table = IdfTable::compute_from_texts(texts);
    }
    const IdfTable* idf = idf_table ? &*idf_table : nullptr;

    RtdCorpusConfig rtd;
    rtd.corpus = config.pretrain_corpus;
    rtd.replacement_rate = config.replacement_rate;
    rtd.sampler = config.sampler;

    ToyEncoderConfig enc = config.encoder;
    if (enc.vocab_size == 0) enc.vocab_size = tokenizer.vocab_size();

    const ToyDiscriminator base =
        pretrain_or_load(rtd, enc, tokenizer, config.pretrain_steps, config.rtd_optim, config.cache_dir, log);
    const ScorerFactory factory = [&base]() { return std::make_unique<ToyDiscriminator>(base); };

    std::vector<RunRecord> records;
    for (int k : config.ks) {
        for (uint64_t seed : config.seeds) {
            auto [train, dev] = sample_few_shot(config.train_data, config.spec, k, seed);

            TrainConfig tc = config.train;
            tc.seed = seed;

            double lambda0;
            bool grid_used = false;
            std::unique_ptr<TrainableScorer> scorer = factory();
            if (config.mode == Mode::LabelOnly || config.lambda0_override) {
                lambda0 = config.mode == Mode::LabelOnly ? 1.0 : *config.lambda0_override;
                const LambdaWeights lambda = LambdaWeights::for_task(config.spec, lambda0);
                finetune(train, dev, config.spec, *scorer, tokenizer, idf, lambda, tc, config.max_len);
            } else {
                grid_used = true;
                GridSearchResult grid = grid_search_lambda0(train, dev, config.spec, factory, tokenizer, idf,
                                                            tc, config.max_len, config.jobs);
                lambda0 = grid.lambda0;
                std::copy(grid.best.params.begin(), grid.best.params.end(), scorer->parameters().begin());
            }

            RunRecord rec;
            rec.task = config.spec.name;
            rec.seed = seed;
            rec.k = k;
            rec.lambda0 = lambda0;
            rec.mode = mode_name(config.mode);
            const LambdaWeights lambda = LambdaWeights::for_task(config.spec, lambda0);
            evaluate_into_record(*scorer, config.test_data, config.spec, tokenizer, idf, lambda,
                                 config.max_len, rec);
            rec.config_hash = hex64(fnv1a64(run_signature(config, enc, seed, k, lambda0, grid_used)));
            rec.timestamp = iso_timestamp();
            records.push_back(rec);

            if (log) {
                *log << rec.task << " seed=" << rec.seed << " k=" << rec.k << " mode=" << rec.mode
                     << " lambda0=" << rec.lambda0 << " overall=" << rec.overall << " U.R=" << rec.unanimous_ratio
                     << "\n";
            }
        }
    }
    return records;
}

std::vector<SummaryRow> summarize(std::span<const RunRecord> records) {
    std::vector<SummaryRow> rows;
    std::vector<std::string> keys;
    std::vector<std::vector<const RunRecord*>> groups;

    for (const auto& r : records) {
        const std::string key = r.task + '\x1f' + r.mode + '\x1f' + std::to_string(r.k);
        size_t g = 0;
        for (; g < keys.size(); ++g)
            if (keys[g] == key) break;
        if (g == keys.size()) {
            keys.push_back(key);
            groups.emplace_back();
        }
        groups[g].push_back(&r);
    }

    for (const auto& group : groups) {
        SummaryRow row;
        row.task = group[0]->task;
        row.mode = group[0]->mode;
        row.k = group[0]->k;
        row.runs = group.size();
        std::vector<double> overall, ur, um, lambdas;
        for (const RunRecord* r : group) {
            overall.push_back(r->overall);
            ur.push_back(r->unanimous_ratio);
            if (r->unanimous_metric) um.push_back(*r->unanimous_metric);
            lambdas.push_back(r->lambda0);
        }
        row.overall = mean_std(overall);
        row.unanimous_ratio = mean_std(ur);
        if (!um.empty()) row.unanimous_metric = mean_std(um);
        row.mean_lambda0 = mean_std(lambdas).mean;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace scs
