// Command-line driver: pretraining, IDF tables, finetuning, evaluation,
// multi-seed sweeps, and report rendering.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scs/data.hpp"
#include "scs/experiment.hpp"
#include "scs/report.hpp"
#include "scs/synthetic.hpp"

namespace fs = std::filesystem;
using namespace scs;

namespace {

struct WorldData {
    TaskSpec spec;
    std::vector<InputExample> train;
    std::vector<InputExample> test;
    std::vector<std::string> corpus;
};

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

TaskSpec resolve_task(const std::string& task, const std::string& task_file) {
    if (!task_file.empty()) return load_task_file(task_file);
    if (auto spec = builtin_task(task)) return *spec;
    throw std::runtime_error("unknown task '" + task + "'; use --task-file for a custom spec");
}

// The synthetic world needs no data directory; file-backed tasks read
// train.tsv, test.tsv, and (optionally) corpus.txt from --data-dir.
WorldData load_world(const std::string& task, const std::string& task_file, const std::string& data_dir,
                     uint64_t synth_seed) {
    WorldData world;
    if (task == "synthetic" && task_file.empty()) {
        SyntheticWorld synth = make_synthetic_task(synth_seed);
        world.spec = std::move(synth.spec);
        world.train = std::move(synth.train_pool);
        world.test = std::move(synth.test);
        world.corpus = std::move(synth.pretrain_corpus);
        return world;
    }
    if (data_dir.empty()) throw std::runtime_error("--data-dir is required for task '" + task + "'");
    world.spec = resolve_task(task, task_file);
    world.train = load_tsv(data_dir + "/train.tsv", world.spec);
    world.test = load_tsv(data_dir + "/test.tsv", world.spec);
    const std::string corpus_path = data_dir + "/corpus.txt";
    if (fs::exists(corpus_path)) {
        world.corpus = read_lines(corpus_path);
    } else {
        for (const auto& ex : world.train) {
            world.corpus.push_back(ex.sentence1);
            if (ex.sentence2) world.corpus.push_back(*ex.sentence2);
        }
    }
    return world;
}

// Vocabulary must cover the label words and template literals, not just the
// corpus, so prompts never map a label word to [UNK].
WordTokenizer tokenizer_for(const WorldData& world) {
    std::vector<std::string> texts = world.corpus;
    for (const auto& w : world.spec.verbalizer.words) texts.push_back(w);
    for (const auto& part : parse_template(world.spec.tmpl)) {
        if (part.kind == TemplatePart::Kind::Literal) texts.push_back(part.literal);
    }
    return WordTokenizer::from_corpus(texts);
}

std::string vocab_sidecar(const std::string& model_path) { return model_path + ".vocab"; }

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

struct CommonOpts {
    std::string task = "synthetic";
    std::string task_file;
    std::string data_dir;
    std::string cache_dir;
    uint64_t synth_seed = 7;
    size_t max_len = 64;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--task", o.task, "built-in task name or 'synthetic'")->capture_default_str();
    cmd->add_option("--task-file", o.task_file, "path to a task spec file");
    cmd->add_option("--data-dir", o.data_dir, "directory with train.tsv/test.tsv[/corpus.txt]");
    cmd->add_option("--cache-dir", o.cache_dir, "pretrained-scorer cache directory")
        ->envname("SCS_CACHE_DIR");
    cmd->add_option("--synth-seed", o.synth_seed, "generation seed for the synthetic world")
        ->capture_default_str();
    cmd->add_option("--max-len", o.max_len, "maximum prompt length in tokens")->capture_default_str();
}

struct EncoderOpts {
    ToyEncoderConfig cfg;
    long steps = 1500;
    double rate = 0.15;
    std::string sampler = "unigram";
    uint64_t seed = 13;
    double lr = 1e-3;
    int batch = 16;
};

void add_encoder(CLI::App* cmd, EncoderOpts& o) {
    cmd->add_option("--dim", o.cfg.embedding_dim, "embedding dimension")->capture_default_str();
    cmd->add_option("--layers", o.cfg.layers, "encoder layers")->capture_default_str();
    cmd->add_option("--heads", o.cfg.heads, "attention heads")->capture_default_str();
    cmd->add_option("--dropout", o.cfg.dropout, "dropout rate")->capture_default_str();
    cmd->add_option("--steps", o.steps, "pretraining steps")->capture_default_str();
    cmd->add_option("--rate", o.rate, "token replacement rate")->capture_default_str();
    cmd->add_option("--sampler", o.sampler, "replacement sampler: uniform or unigram")
        ->check(CLI::IsMember({"uniform", "unigram"}))
        ->capture_default_str();
    cmd->add_option("--pretrain-seed", o.seed, "pretraining seed")->capture_default_str();
    cmd->add_option("--pretrain-lr", o.lr, "pretraining learning rate")->capture_default_str();
    cmd->add_option("--pretrain-batch", o.batch, "pretraining batch size")->capture_default_str();
}

ReplacementSampler sampler_from(const std::string& name) {
    return name == "uniform" ? ReplacementSampler::UniformVocab : ReplacementSampler::UnigramFrequency;
}

RtdOptim rtd_optim_from(const EncoderOpts& e) {
    RtdOptim optim;
    optim.seed = e.seed;
    optim.learning_rate = e.lr;
    optim.batch_size = e.batch;
    return optim;
}

struct TrainOpts {
    double lr = 1e-5;
    int batch = 2;
    int epochs = 15;
    int eval_every = 50;
    double warmup = 0.05;
    int patience = 10;
};

void add_train(CLI::App* cmd, TrainOpts& o) {
    cmd->add_option("--lr", o.lr, "peak learning rate")->capture_default_str();
    cmd->add_option("--batch", o.batch, "batch size")->capture_default_str();
    cmd->add_option("--epochs", o.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--eval-every", o.eval_every, "steps between dev evaluations")->capture_default_str();
    cmd->add_option("--warmup", o.warmup, "warmup ratio of total steps")->capture_default_str();
    cmd->add_option("--patience", o.patience, "early-stop patience in evaluations")->capture_default_str();
}

TrainConfig train_config_from(const TrainOpts& o) {
    TrainConfig tc;
    tc.learning_rate = o.lr;
    tc.batch_size = o.batch;
    tc.epochs = o.epochs;
    tc.eval_every = o.eval_every;
    tc.warmup_ratio = o.warmup;
    tc.early_stop_patience = o.patience;
    return tc;
}

int cmd_pretrain(const CommonOpts& common, const EncoderOpts& enc, const std::string& corpus_file,
                 const std::string& out) {
    WorldData world = load_world(common.task, common.task_file, common.data_dir, common.synth_seed);
    if (!corpus_file.empty()) world.corpus = read_lines(corpus_file);
    const WordTokenizer tokenizer = tokenizer_for(world);

    RtdCorpusConfig rtd{world.corpus, enc.rate, sampler_from(enc.sampler)};
    ToyDiscriminator model = pretrain_rtd(rtd, enc.cfg, tokenizer, enc.steps, rtd_optim_from(enc));

    ensure_parent_dir(out);
    model.save_file(out);
    tokenizer.save_vocab(vocab_sidecar(out));

    RtdCorpusConfig held = rtd;
    std::vector<std::string> held_out(world.corpus.begin(),
                                      world.corpus.begin() + std::min<size_t>(world.corpus.size(), 200));
    const RtdEval eval = evaluate_rtd(model, held, held_out, tokenizer, 9);
    std::cout << "pretrained " << enc.steps << " steps; vocab " << tokenizer.vocab_size() << "; corpus AUC "
              << eval.auc << "\nsaved " << out << " and " << vocab_sidecar(out) << "\n";
    return 0;
}

int cmd_idf(const CommonOpts& common, const std::string& out) {
    WorldData world = load_world(common.task, common.task_file, common.data_dir, common.synth_seed);
    std::vector<std::string> texts;
    for (const auto& ex : world.train) {
        std::string t = ex.sentence1;
        if (ex.sentence2) t += " " + *ex.sentence2;
        texts.push_back(std::move(t));
    }
    const IdfTable table = IdfTable::compute_from_texts(texts);
    ensure_parent_dir(out);
    table.save(out);
    std::cout << "idf over " << table.corpus_size() << " documents, " << table.vocabulary_size()
              << " words -> " << out << "\n";
    return 0;
}

int cmd_train(const CommonOpts& common, const TrainOpts& topts, const std::string& model_path,
              uint64_t seed, int k, const std::string& mode_str, std::optional<double> lambda0,
              int jobs, const std::string& out) {
    const Mode mode = parse_mode(mode_str);
    WorldData world = load_world(common.task, common.task_file, common.data_dir, common.synth_seed);
    const WordTokenizer tokenizer = WordTokenizer::load_vocab(vocab_sidecar(model_path));
    const ToyDiscriminator base = ToyDiscriminator::load_file(model_path);

    auto [train, dev] = sample_few_shot(world.train, world.spec, k, seed);

    std::optional<IdfTable> idf;
    if (mode == Mode::Full) {
        std::vector<std::string> texts;
        for (const auto& ex : world.train) {
            std::string t = ex.sentence1;
            if (ex.sentence2) t += " " + *ex.sentence2;
            texts.push_back(std::move(t));
        }
        idf = IdfTable::compute_from_texts(texts);
    }
    const IdfTable* idf_ptr = idf ? &*idf : nullptr;

    TrainConfig tc = train_config_from(topts);
    tc.seed = seed;

    double chosen;
    ToyDiscriminator model = base;
    if (mode == Mode::LabelOnly || lambda0) {
        chosen = mode == Mode::LabelOnly ? 1.0 : *lambda0;
        const LambdaWeights lambda = LambdaWeights::for_task(world.spec, chosen);
        const FinetuneResult r =
            finetune(train, dev, world.spec, model, tokenizer, idf_ptr, lambda, tc, common.max_len);
        std::cout << "lambda0=" << chosen << " dev=" << r.best.dev_metric << " steps=" << r.steps_run << "\n";
    } else {
        const ScorerFactory factory = [&base]() { return std::make_unique<ToyDiscriminator>(base); };
        const GridSearchResult grid = grid_search_lambda0(train, dev, world.spec, factory, tokenizer,
                                                          idf_ptr, tc, common.max_len, jobs);
        chosen = grid.lambda0;
        std::copy(grid.best.params.begin(), grid.best.params.end(), model.parameters().begin());
        std::cout << "grid picked lambda0=" << chosen << " dev=" << grid.best.dev_metric << "\n";
    }

    ensure_parent_dir(out);
    CheckpointMeta meta;
    meta.lambda0 = chosen;
    meta.seed = seed;
    save_checkpoint(out, model, meta);
    tokenizer.save_vocab(vocab_sidecar(out));
    std::cout << "saved checkpoint " << out << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& model_path, std::optional<double> lambda0,
             const std::string& mode_str, const std::string& out) {
    const Mode mode = parse_mode(mode_str);
    WorldData world = load_world(common.task, common.task_file, common.data_dir, common.synth_seed);
    const WordTokenizer tokenizer = WordTokenizer::load_vocab(vocab_sidecar(model_path));
    auto [model, meta] = load_checkpoint(model_path);

    std::optional<IdfTable> idf;
    if (mode == Mode::Full) {
        std::vector<std::string> texts;
        for (const auto& ex : world.train) {
            std::string t = ex.sentence1;
            if (ex.sentence2) t += " " + *ex.sentence2;
            texts.push_back(std::move(t));
        }
        idf = IdfTable::compute_from_texts(texts);
    }

    const double l0 = mode == Mode::LabelOnly ? 1.0 : lambda0.value_or(meta.lambda0);
    const LambdaWeights lambda = LambdaWeights::for_task(world.spec, l0);

    RunRecord rec;
    rec.task = world.spec.name;
    rec.seed = meta.seed;
    rec.k = 0;
    rec.lambda0 = l0;
    rec.mode = mode_str;
    evaluate_into_record(model, world.test, world.spec, tokenizer, idf ? &*idf : nullptr, lambda,
                         common.max_len, rec);
    rec.config_hash = meta.config_hash;
    rec.timestamp = iso_timestamp();

    std::cout << format_report(std::vector<RunRecord>{rec});
    if (!out.empty()) {
        ensure_parent_dir(out);
        write_records(out, std::vector<RunRecord>{rec});
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_sweep(const CommonOpts& common, const EncoderOpts& enc, const TrainOpts& topts,
              std::vector<uint64_t> seeds, std::vector<int> ks, const std::string& mode_str,
              std::optional<double> lambda0, int jobs, const std::string& out) {
    WorldData world = load_world(common.task, common.task_file, common.data_dir, common.synth_seed);
    const WordTokenizer tokenizer = tokenizer_for(world);

    ExperimentConfig config;
    config.spec = std::move(world.spec);
    config.train_data = std::move(world.train);
    config.test_data = std::move(world.test);
    config.pretrain_corpus = std::move(world.corpus);
    if (!seeds.empty()) config.seeds = std::move(seeds);
    if (!ks.empty()) config.ks = std::move(ks);
    config.mode = parse_mode(mode_str);
    config.lambda0_override = lambda0;
    config.train = train_config_from(topts);
    config.encoder = enc.cfg;
    config.replacement_rate = enc.rate;
    config.sampler = sampler_from(enc.sampler);
    config.pretrain_steps = enc.steps;
    config.rtd_optim = rtd_optim_from(enc);
    config.max_len = common.max_len;
    config.cache_dir = common.cache_dir;
    config.jobs = jobs;

    const std::vector<RunRecord> records = run_experiment(config, tokenizer, &std::cerr);
    ensure_parent_dir(out);
    write_records(out, records);
    std::cout << format_report(records) << "wrote " << records.size() << " records to " << out << "\n";
    return 0;
}

int cmd_report(const std::string& in, const std::string& out) {
    const std::vector<RunRecord> records = read_records(in);
    const std::string text = format_report(records);
    std::cout << text;
    if (!out.empty()) {
        ensure_parent_dir(out);
        std::ofstream f(out);
        if (!f) throw std::runtime_error("cannot write " + out);
        f << text;
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_synth(uint64_t seed, int k, const std::string& out_dir) {
    const SyntheticWorld world = make_synthetic_task(seed, k);
    fs::create_directories(out_dir);
    save_tsv(out_dir + "/train.tsv", world.train_pool, world.spec);
    save_tsv(out_dir + "/test.tsv", world.test, world.spec);
    std::ofstream corpus(out_dir + "/corpus.txt");
    for (const auto& s : world.pretrain_corpus) corpus << s << '\n';
    save_task_file(world.spec, out_dir + "/task.txt");
    std::cout << "wrote " << out_dir << ": train.tsv (" << world.train_pool.size() << "), test.tsv ("
              << world.test.size() << "), corpus.txt (" << world.pretrain_corpus.size() << "), task.txt\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-shot text classification with a discriminative consistency scorer"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file");

    CommonOpts common;
    EncoderOpts enc;
    TrainOpts topts;

    std::string corpus_file, model_path, out, in, mode_str = "full";
    std::optional<double> lambda0;
    std::vector<uint64_t> seeds;
    std::vector<int> ks;
    uint64_t seed = 13;
    int k = 16;
    int jobs = 1;

    CLI::App* pretrain = app.add_subcommand("pretrain", "pretrain the toy scorer with replaced-token detection");
    add_common(pretrain, common);
    add_encoder(pretrain, enc);
    pretrain->add_option("--corpus", corpus_file, "plain-text corpus file, one sentence per line");
    pretrain->add_option("--out", out, "output model path")->required();

    CLI::App* idf = app.add_subcommand("idf", "compute an IDF table from the training data");
    add_common(idf, common);
    idf->add_option("--out", out, "output table path")->required();

    CLI::App* train = app.add_subcommand("train", "finetune from a pretrained scorer for one seed");
    add_common(train, common);
    add_train(train, topts);
    train->add_option("--model", model_path, "pretrained scorer path")->required();
    train->add_option("--seed", seed, "sampling/training seed")->capture_default_str();
    train->add_option("--k", k, "examples per class")->capture_default_str();
    train->add_option("--mode", mode_str, "full, no-idf, or label-only")->capture_default_str();
    train->add_option("--lambda0", lambda0, "fixed label-word weight (disables the grid search)");
    train->add_option("--jobs", jobs, "grid-search worker threads")->capture_default_str();
    train->add_option("--out", out, "checkpoint output path")->required();

    CLI::App* eval = app.add_subcommand("eval", "evaluate a finetuned checkpoint on the test set");
    add_common(eval, common);
    eval->add_option("--model", model_path, "checkpoint path")->required();
    eval->add_option("--mode", mode_str, "full, no-idf, or label-only")->capture_default_str();
    eval->add_option("--lambda0", lambda0, "label-word weight override");
    eval->add_option("--out", out, "results file (line-delimited records)");

    CLI::App* sweep = app.add_subcommand("sweep", "multi-seed, multi-K experiment");
    add_common(sweep, common);
    add_encoder(sweep, enc);
    add_train(sweep, topts);
    sweep->add_option("--seeds", seeds, "seed list (default 13 21 42 87 100)");
    sweep->add_option("--k", ks, "K values (default 16)");
    sweep->add_option("--mode", mode_str, "full, no-idf, or label-only")->capture_default_str();
    sweep->add_option("--lambda0", lambda0, "fixed label-word weight (disables the grid search)");
    sweep->add_option("--jobs", jobs, "grid-search worker threads")->capture_default_str();
    sweep->add_option("--out", out, "results file")->required();

    CLI::App* report = app.add_subcommand("report", "render tables from a results file");
    report->add_option("--in", in, "results file")->required();
    report->add_option("--out", out, "write the rendered report here as well");

    CLI::App* synth = app.add_subcommand("synth", "write the synthetic world as TSV files");
    synth->add_option("--seed", seed, "generation seed")->capture_default_str();
    synth->add_option("--k", k, "examples per class in the K-shot splits")->capture_default_str();
    synth->add_option("--out-dir", out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (pretrain->parsed()) return cmd_pretrain(common, enc, corpus_file, out);
        if (idf->parsed()) return cmd_idf(common, out);
        if (train->parsed())
            return cmd_train(common, topts, model_path, seed, k, mode_str, lambda0, jobs, out);
        if (eval->parsed()) return cmd_eval(common, model_path, lambda0, mode_str, out);
        if (sweep->parsed())
            return cmd_sweep(common, enc, topts, seeds, ks, mode_str, lambda0, jobs, out);
        if (report->parsed()) return cmd_report(in, out);
        if (synth->parsed()) return cmd_synth(seed, k, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
