#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "scs/data.hpp"
#include "scs/experiment.hpp"
#include "scs/metrics.hpp"
#include "scs/report.hpp"
#include "scs/synthetic.hpp"
#include "scs/tokenizer.hpp"

using namespace scs;

namespace {

TaskSpec sentiment_task() {
    TaskSpec spec;
    spec.name = "sentiment";
    spec.labels = {{0, "negative"}, {1, "positive"}};
    spec.verbalizer.words = {"terrible", "great"};
    spec.tmpl = {TemplateKind::SingleSentence, "<S1> It is <V>."};
    return spec;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

RunRecord demo_record(uint64_t seed, double overall) {
    RunRecord r;
    r.task = "synthetic";
    r.seed = seed;
    r.k = 16;
    r.lambda0 = 0.5;
    r.mode = "full";
    r.overall = overall;
    r.unanimous_ratio = 0.75;
    r.unanimous_metric = overall;
    r.disagreed_metric = overall / 2.0;
    r.unanimous_count = 300;
    r.test_size = 400;
    r.config_hash = "0123456789abcdef";
    r.timestamp = "2024-05-01T00:00:00Z";
    return r;
}

}  // namespace

TEST_CASE("default seeds") {
    CHECK(default_seeds() == std::vector<uint64_t>{13, 21, 42, 87, 100});
}

TEST_CASE("tsv loading for both task shapes") {
    const std::string path = "harness_data.tsv";

    SUBCASE("single-sentence rows with a header") {
        write_file(path, "sentence\tlabel\na fun ride\tpositive\nawful stuff\tnegative\n");
        auto rows = load_tsv(path, sentiment_task());
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].sentence1 == "a fun ride");
        CHECK(rows[0].gold_label == 1);
        CHECK(!rows[0].sentence2.has_value());
        CHECK(rows[1].gold_label == 0);
    }
    SUBCASE("headerless files and blank lines") {
        write_file(path, "a fun ride\tpositive\n\nawful stuff\tnegative\n");
        CHECK(load_tsv(path, sentiment_task()).size() == 2);
    }
    SUBCASE("pair rows carry both sentences") {
        TaskSpec pair = sentiment_task();
        pair.tmpl = {TemplateKind::SentencePair, "<S1>? <V>, <S2>"};
        write_file(path, "does it work\tit works\tpositive\n");
        auto rows = load_tsv(path, pair);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].sentence2 == "it works");
    }
    SUBCASE("column-count violations name the line") {
        write_file(path, "a fun ride\tpositive\nonly one column\n");
        CHECK_THROWS_WITH_AS(load_tsv(path, sentiment_task()), doctest::Contains(":2:"), std::runtime_error);
    }
    SUBCASE("unknown labels past the first row name the line") {
        write_file(path, "a fun ride\tpositive\nweird\tmeh\n");
        CHECK_THROWS_WITH_AS(load_tsv(path, sentiment_task()), doctest::Contains(":2:"), std::runtime_error);
    }
    std::remove(path.c_str());
    CHECK_THROWS(load_tsv("missing_file.tsv", sentiment_task()));
}

TEST_CASE("tsv writing sanitizes and round-trips") {
    const std::string path = "harness_save.tsv";
    std::vector<InputExample> examples = {
        {"tabbed\ttext", std::nullopt, 0},
        {"plain text", std::nullopt, 1},
    };
    save_tsv(path, examples, sentiment_task());
    auto back = load_tsv(path, sentiment_task());
    std::remove(path.c_str());
    REQUIRE(back.size() == 2);
    CHECK(back[0].sentence1 == "tabbed text");
    CHECK(back[0].gold_label == 0);
    CHECK(back[1].sentence1 == "plain text");

    std::vector<InputExample> unlabeled = {{"no label", std::nullopt, std::nullopt}};
    CHECK_THROWS_AS(save_tsv(path, unlabeled, sentiment_task()), std::invalid_argument);
    std::remove(path.c_str());
}

TEST_CASE("few-shot sampling is balanced, disjoint, and seeded") {
    auto spec = sentiment_task();
    std::vector<InputExample> data;
    for (int i = 0; i < 40; ++i) data.push_back({"neg " + std::to_string(i), std::nullopt, 0});
    for (int i = 0; i < 40; ++i) data.push_back({"pos " + std::to_string(i), std::nullopt, 1});

    auto [train, dev] = sample_few_shot(data, spec, 4, 21);
    REQUIRE(train.size() == 8);
    REQUIRE(dev.size() == 8);

    std::map<int, int> train_counts, dev_counts;
    std::set<std::string> seen;
    for (const auto& ex : train) {
        ++train_counts[*ex.gold_label];
        CHECK(seen.insert(ex.sentence1).second);
    }
    for (const auto& ex : dev) {
        ++dev_counts[*ex.gold_label];
        CHECK(seen.insert(ex.sentence1).second);  // disjoint from train
    }
    CHECK(train_counts[0] == 4);
    CHECK(train_counts[1] == 4);
    CHECK(dev_counts[0] == 4);
    CHECK(dev_counts[1] == 4);

    auto [train2, dev2] = sample_few_shot(data, spec, 4, 21);
    for (size_t i = 0; i < train.size(); ++i) CHECK(train[i].sentence1 == train2[i].sentence1);
    for (size_t i = 0; i < dev.size(); ++i) CHECK(dev[i].sentence1 == dev2[i].sentence1);

    auto [train3, dev3] = sample_few_shot(data, spec, 4, 22);
    bool all_same = true;
    for (size_t i = 0; i < train.size(); ++i) all_same = all_same && train[i].sentence1 == train3[i].sentence1;
    CHECK(!all_same);

    CHECK_THROWS_WITH_AS(sample_few_shot(data, spec, 21, 1), doctest::Contains("negative"), std::runtime_error);
}

TEST_CASE("accuracy and F1 oracles") {
    CHECK(accuracy(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 1}) == 1.0);
    CHECK(accuracy(std::vector<int>{0, 1, 0, 0}, std::vector<int>{0, 1, 1, 1}) == 0.5);
    CHECK_THROWS_AS(accuracy(std::vector<int>{0}, std::vector<int>{}), std::invalid_argument);
    CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);

    // Precision 1/2, recall 1 -> F1 = 2/3.
    CHECK(binary_f1(std::vector<int>{1, 1}, std::vector<int>{1, 0}, 1) == doctest::Approx(2.0 / 3.0));
    // No positive predictions: zero recall convention.
    CHECK(binary_f1(std::vector<int>{0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}, 1) == 0.0);
    // Perfect agreement.
    CHECK(binary_f1(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 1}, 1) == 1.0);
    // The positive class is whatever the task says it is.
    CHECK(binary_f1(std::vector<int>{0, 0}, std::vector<int>{0, 1}, 0) == doctest::Approx(2.0 / 3.0));

    CHECK(evaluate_metric(std::vector<int>{0, 1}, std::vector<int>{0, 0}, Metric::Accuracy) == 0.5);
    CHECK(evaluate_metric(std::vector<int>{1, 1}, std::vector<int>{1, 0}, Metric::BinaryF1, 1) ==
          doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(evaluate_metric(std::vector<int>{1}, std::vector<int>{1}, Metric::BinaryF1),
                    std::invalid_argument);
}

TEST_CASE("mean and population deviation") {
    std::vector<double> values = {0.8, 0.9, 0.85, 0.8, 0.9};
    MeanStd ms = mean_std(values);
    CHECK(ms.mean == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(ms.stddev == doctest::Approx(std::sqrt(0.002)).epsilon(1e-9));

    ms = mean_std(std::vector<double>{2.5});
    CHECK(ms.mean == 2.5);
    CHECK(ms.stddev == 0.0);

    CHECK_THROWS_AS(mean_std(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("run records survive json and jsonl round-trips") {
    RunRecord r = demo_record(13, 0.95);
    RunRecord back = record_from_json(record_to_json(r));
    CHECK(back.task == r.task);
    CHECK(back.seed == r.seed);
    CHECK(back.k == r.k);
    CHECK(back.lambda0 == r.lambda0);
    CHECK(back.overall == r.overall);
    CHECK(back.unanimous_metric == r.unanimous_metric);
    CHECK(back.disagreed_metric == r.disagreed_metric);
    CHECK(back.config_hash == r.config_hash);

    // Absent subsets serialize as nulls and come back absent.
    r.unanimous_metric.reset();
    r.disagreed_metric.reset();
    back = record_from_json(record_to_json(r));
    CHECK(!back.unanimous_metric.has_value());
    CHECK(!back.disagreed_metric.has_value());

    const std::string path = "harness_records.jsonl";
    std::vector<RunRecord> records = {demo_record(13, 0.9), demo_record(21, 0.8)};
    write_records(path, records);
    write_records(path, std::vector<RunRecord>{demo_record(42, 0.7)}, /*append=*/true);
    auto loaded = read_records(path);
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].seed == 13);
    CHECK(loaded[2].seed == 42);
    CHECK(loaded[1].overall == 0.8);

    write_file(path, "{not json\n");
    CHECK_THROWS_WITH_AS(read_records(path), doctest::Contains(":1:"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("timestamps are ISO-8601 UTC") {
    const std::string ts = iso_timestamp();
    REQUIRE(ts.size() == 20);
    CHECK(ts[4] == '-');
    CHECK(ts[10] == 'T');
    CHECK(ts[13] == ':');
    CHECK(ts.back() == 'Z');
}

TEST_CASE("mode names parse both ways") {
    CHECK(parse_mode("full") == Mode::Full);
    CHECK(parse_mode("no-idf") == Mode::NoIdf);
    CHECK(parse_mode("label-only") == Mode::LabelOnly);
    for (Mode m : {Mode::Full, Mode::NoIdf, Mode::LabelOnly}) CHECK(parse_mode(mode_name(m)) == m);
    CHECK_THROWS_AS(parse_mode("idf"), std::invalid_argument);
}

TEST_CASE("summaries group by task, mode, and K in first-seen order") {
    std::vector<RunRecord> records;
    const double metrics[] = {0.8, 0.9, 0.85, 0.8, 0.9};
    const uint64_t seeds[] = {13, 21, 42, 87, 100};
    for (int i = 0; i < 5; ++i) records.push_back(demo_record(seeds[i], metrics[i]));

    RunRecord other = demo_record(13, 0.5);
    other.k = 4;
    records.push_back(other);

    auto rows = summarize(records);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].task == "synthetic");
    CHECK(rows[0].k == 16);
    CHECK(rows[0].runs == 5);
    CHECK(rows[0].overall.mean == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(rows[0].unanimous_ratio.mean == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(rows[0].mean_lambda0 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rows[1].k == 4);
    CHECK(rows[1].runs == 1);

    // Runs without a unanimous subset stay out of that column's average.
    records[1].unanimous_metric.reset();
    rows = summarize(records);
    CHECK(rows[0].unanimous_metric.mean ==
          doctest::Approx((0.8 + 0.85 + 0.8 + 0.9) / 4.0).epsilon(1e-12));
}

TEST_CASE("report rendering") {
    SUBCASE("empty record lists render a placeholder") {
        CHECK(format_report({}) == "no records\n");
    }
    SUBCASE("tables carry the group row and per-seed columns") {
        std::vector<RunRecord> records;
        const uint64_t seeds[] = {13, 21, 42, 87, 100};
        for (uint64_t s : seeds) records.push_back(demo_record(s, 0.9));

        const std::string summary = format_summary_table(summarize(records));
        CHECK(summary.find("synthetic") != std::string::npos);
        CHECK(summary.find("0.9000") != std::string::npos);
        CHECK(summary.find("+/-") != std::string::npos);

        const std::string lambdas = format_lambda_table(records);
        CHECK(lambdas.find("seed 13") != std::string::npos);
        CHECK(lambdas.find("seed 100") != std::string::npos);
        CHECK(lambdas.find("0.500") != std::string::npos);

        const std::string reject = format_reject_table(records);
        CHECK(reject.find("O.M") != std::string::npos);
        CHECK(reject.find("U.R") != std::string::npos);
        CHECK(reject.find("mean") != std::string::npos);

        const std::string all = format_report(records);
        CHECK(all.find(summary) != std::string::npos);
        CHECK(all.find(lambdas) != std::string::npos);
        CHECK(all.find(reject) != std::string::npos);
    }
    SUBCASE("absent subset metrics render as dashes") {
        RunRecord r = demo_record(13, 1.0);
        r.unanimous_ratio = 1.0;
        r.disagreed_metric.reset();
        const std::string reject = format_reject_table(std::vector<RunRecord>{r});
        CHECK(reject.find('-') != std::string::npos);
    }
}

TEST_CASE("pretraining fingerprints key the cache correctly") {
    SyntheticWorld world = make_synthetic_task(3, 2, 5, 10, 60);
    auto tok = WordTokenizer::from_words(synthetic_vocabulary());

    RtdCorpusConfig rtd;
    rtd.corpus = world.pretrain_corpus;
    rtd.replacement_rate = 0.25;

    ToyEncoderConfig enc;
    enc.vocab_size = tok.vocab_size();
    enc.embedding_dim = 16;
    enc.layers = 1;
    enc.heads = 2;
    enc.max_positions = 32;
    enc.dropout = 0.0;

    RtdOptim optim;
    optim.batch_size = 4;
    optim.learning_rate = 2e-3;

    const uint64_t fp = pretrain_fingerprint(rtd, enc, tok, 40, optim);
    CHECK(fp == pretrain_fingerprint(rtd, enc, tok, 40, optim));
    CHECK(fp != pretrain_fingerprint(rtd, enc, tok, 41, optim));
    auto enc2 = enc;
    enc2.layers = 2;
    CHECK(fp != pretrain_fingerprint(rtd, enc2, tok, 40, optim));
    auto rtd2 = rtd;
    rtd2.replacement_rate = 0.15;
    CHECK(fp != pretrain_fingerprint(rtd2, enc, tok, 40, optim));

    const std::string cache_dir = "harness_cache_tmp";
    std::filesystem::remove_all(cache_dir);
    std::ostringstream log1, log2;
    ToyDiscriminator first = pretrain_or_load(rtd, enc, tok, 40, optim, cache_dir, &log1);
    ToyDiscriminator second = pretrain_or_load(rtd, enc, tok, 40, optim, cache_dir, &log2);
    CHECK(first.params().values() == second.params().values());
    CHECK(log1.str().find("pretraining") != std::string::npos);
    CHECK(log2.str().find("loading") != std::string::npos);
    std::filesystem::remove_all(cache_dir);
}

TEST_CASE("record evaluation decomposes by unanimity") {
    SyntheticWorld world = make_synthetic_task(11, 2, 10, 20, 60);
    auto tok = WordTokenizer::from_words(synthetic_vocabulary());
    ToyEncoderConfig enc;
    enc.vocab_size = tok.vocab_size();
    enc.embedding_dim = 16;
    enc.layers = 1;
    enc.heads = 2;
    enc.max_positions = 64;
    enc.dropout = 0.0;
    ToyDiscriminator model(enc, 31);
    auto lambda = LambdaWeights::for_task(world.spec, 0.5);

    RunRecord rec;
    evaluate_into_record(model, world.test, world.spec, tok, nullptr, lambda, 64, rec);

    CHECK(rec.test_size == 20);
    CHECK(rec.unanimous_count >= 0);
    CHECK(rec.unanimous_count <= rec.test_size);
    CHECK(rec.unanimous_ratio ==
          doctest::Approx(static_cast<double>(rec.unanimous_count) / 20.0).epsilon(1e-12));
    CHECK(rec.overall == evaluate_scorer(model, world.test, world.spec, tok, nullptr, lambda, 64));

    // The overall metric is a convex mixture of the two subset metrics.
    if (rec.unanimous_metric && rec.disagreed_metric) {
        const double lo = std::min(*rec.unanimous_metric, *rec.disagreed_metric);
        const double hi = std::max(*rec.unanimous_metric, *rec.disagreed_metric);
        CHECK(rec.overall >= lo - 1e-12);
        CHECK(rec.overall <= hi + 1e-12);
    }
    if (rec.unanimous_count == rec.test_size) CHECK(!rec.disagreed_metric.has_value());
    if (rec.unanimous_count == 0) CHECK(!rec.unanimous_metric.has_value());
}

TEST_CASE("tiny end-to-end experiment produces one record per seed") {
    SyntheticWorld world = make_synthetic_task(17, 4, 10, 30, 80);
    auto tok = WordTokenizer::from_words(synthetic_vocabulary());

    ExperimentConfig cfg;
    cfg.spec = world.spec;
    cfg.train_data = world.train_pool;
    cfg.test_data = world.test;
    cfg.pretrain_corpus = world.pretrain_corpus;
    cfg.seeds = {13, 21};
    cfg.ks = {2};
    cfg.mode = Mode::Full;
    cfg.lambda0_override = 0.5;
    cfg.train.learning_rate = 1e-3;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 2;
    cfg.encoder.embedding_dim = 16;
    cfg.encoder.layers = 1;
    cfg.encoder.heads = 2;
    cfg.encoder.dropout = 0.0;
    cfg.pretrain_steps = 30;
    cfg.rtd_optim.batch_size = 4;

    auto records = run_experiment(cfg, tok);
    REQUIRE(records.size() == 2);
    CHECK(records[0].task == "synthetic");
    CHECK(records[0].seed == 13);
    CHECK(records[1].seed == 21);
    for (const auto& r : records) {
        CHECK(r.k == 2);
        CHECK(r.lambda0 == 0.5);
        CHECK(r.mode == "full");
        CHECK(r.test_size == 20);
        CHECK(r.config_hash.size() == 16);
        CHECK(!r.timestamp.empty());
    }
    CHECK(records[0].config_hash != records[1].config_hash);  // seed is part of the signature

    // Label-only runs pin the mixture weight to 1.
    cfg.mode = Mode::LabelOnly;
    cfg.lambda0_override.reset();
    auto label_only = run_experiment(cfg, tok);
    REQUIRE(label_only.size() == 2);
    CHECK(label_only[0].lambda0 == 1.0);
    CHECK(label_only[0].mode == "label-only");
}
