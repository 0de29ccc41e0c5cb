#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dimabsa/dataset.hpp"
#include "dimabsa/errors.hpp"
#include "dimabsa/stats/tests.hpp"
#include "dimabsa/util.hpp"

using namespace dimabsa;

namespace {

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "dimabsa_dataset_test";
    std::filesystem::create_directories(dir);
    return dir;
}

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    auto path = temp_dir() / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    return path;
}

SentimentTuple make_tuple(std::string aspect, std::string opinion, double v, double a) {
    SentimentTuple t;
    t.aspect = std::move(aspect);
    t.opinion = std::move(opinion);
    t.va = {v, a};
    return t;
}

}  // namespace

TEST_CASE("load_dataset reads packed and object VA forms") {
    const auto path = write_temp("ds_basic.jsonl",
        R"({"ID": "a1", "Text": "Pasta was great.", "Tuples": [{"Aspect": "pasta", "Opinion": "great", "VA": "8.00#6.50"}]})"
        "\n"
        R"({"ID": 17, "Text": "Battery lasts.", "Tuples": [{"Aspect": "Battery", "Opinion": "lasts", "VA": {"Valence": 7.25, "Arousal": "5.00"}}]})"
        "\n\n");
    const auto ds = load_dataset(path, TaskKind::Triplet);
    REQUIRE(ds.instances.size() == 2);
    CHECK(ds.instances[0].id == "a1");
    CHECK(ds.instances[0].text == "Pasta was great.");
    REQUIRE(ds.instances[0].gold.has_value());
    REQUIRE(ds.instances[0].gold->size() == 1);
    CHECK((*ds.instances[0].gold)[0].aspect == "pasta");
    CHECK((*ds.instances[0].gold)[0].opinion == "great");
    CHECK((*ds.instances[0].gold)[0].va.valence == doctest::Approx(8.0));
    CHECK((*ds.instances[0].gold)[0].va.arousal == doctest::Approx(6.5));
    CHECK_FALSE((*ds.instances[0].gold)[0].category.has_value());
    CHECK(ds.instances[1].id == "17");
    CHECK((*ds.instances[1].gold)[0].va.valence == doctest::Approx(7.25));
    CHECK((*ds.instances[1].gold)[0].va.arousal == doctest::Approx(5.0));
}

TEST_CASE("load_dataset trims gold spans and keeps instance order") {
    const auto path = write_temp("ds_trim.jsonl",
        R"({"ID": "z", "Text": "t", "Tuples": [{"Aspect": "  staff ", "Opinion": " rude", "VA": "2.00#7.00"}]})"
        "\n"
        R"({"ID": "a", "Text": "t2"})"
        "\n");
    const auto ds = load_dataset(path, TaskKind::Triplet);
    REQUIRE(ds.instances.size() == 2);
    CHECK(ds.instances[0].id == "z");  // file order, not sorted
    CHECK((*ds.instances[0].gold)[0].aspect == "staff");
    CHECK((*ds.instances[0].gold)[0].opinion == "rude");
    CHECK_FALSE(ds.instances[1].gold.has_value());  // unannotated row
}

TEST_CASE("load_dataset quadruplet task requires categories") {
    const auto good = write_temp("ds_quad.jsonl",
        R"({"ID": "q1", "Text": "t", "Tuples": [{"Aspect": "pasta", "Category": "FOOD#QUALITY", "Opinion": "great", "VA": "8.00#6.00"}]})"
        "\n");
    const auto ds = load_dataset(good, TaskKind::Quadruplet);
    CHECK((*ds.instances[0].gold)[0].category.value() == "FOOD#QUALITY");

    const auto missing = write_temp("ds_quad_missing.jsonl",
        R"({"ID": "q2", "Text": "t", "Tuples": [{"Aspect": "a", "Opinion": "o", "VA": "5.00#5.00"}]})"
        "\n");
    CHECK_THROWS_AS(load_dataset(missing, TaskKind::Quadruplet), DataError);
}

TEST_CASE("load_dataset rejects a category on the triplet task") {
    const auto path = write_temp("ds_tri_cat.jsonl",
        R"({"ID": "x", "Text": "t", "Tuples": [{"Aspect": "a", "Category": "FOOD", "Opinion": "o", "VA": "5.00#5.00"}]})"
        "\n");
    CHECK_THROWS_WITH_AS(load_dataset(path, TaskKind::Triplet),
                         doctest::Contains("line 1"), DataError);
}

TEST_CASE("load_dataset reports the failing line number") {
    const auto path = write_temp("ds_badline.jsonl",
        R"({"ID": "ok", "Text": "fine"})"
        "\n"
        "\n"
        R"({"ID": "bad", "Text": "x", "Tuples": [{"Aspect": "a", "Opinion": "o", "VA": "9.50#5.00"}]})"
        "\n");
    try {
        load_dataset(path, TaskKind::Triplet);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("1..9") != std::string::npos);
    }
}

TEST_CASE("load_dataset malformed rows raise DataError") {
    const char* bad_lines[] = {
        "not json at all",
        "[1, 2, 3]",
        R"({"Text": "no id"})",
        R"({"ID": "a"})",
        R"({"ID": true, "Text": "t"})",
        R"({"ID": "a", "Text": 5})",
        R"({"ID": "a", "Text": "t", "Tuples": {}})",
        R"({"ID": "a", "Text": "t", "Tuples": ["x"]})",
        R"({"ID": "a", "Text": "t", "Tuples": [{"Opinion": "o", "VA": "5.00#5.00"}]})",
        R"({"ID": "a", "Text": "t", "Tuples": [{"Aspect": "a", "Opinion": "o"}]})",
        R"({"ID": "a", "Text": "t", "Tuples": [{"Aspect": "a", "Opinion": "o", "VA": "5.00"}]})",
        R"({"ID": "a", "Text": "t", "Tuples": [{"Aspect": "a", "Opinion": "o", "VA": "x#y"}]})",
        R"({"ID": "a", "Text": "t", "Tuples": [{"Aspect": "a", "Opinion": "o", "VA": "5.0#5.0#5.0"}]})",
        R"({"ID": "a", "Text": "t", "Tuples": [{"Aspect": "a", "Opinion": "o", "VA": 5}]})",
        R"({"ID": "a", "Text": "t", "Tuples": [{"Aspect": "", "Opinion": "o", "VA": "5.00#5.00"}]})",
        R"({"ID": "a", "Text": "t", "Tuples": [{"Aspect": "a", "Opinion": "   ", "VA": "5.00#5.00"}]})",
        R"({"ID": "a", "Text": "t", "Tuples": [{"Aspect": "a", "Opinion": "o", "VA": {"Valence": 5}}]})",
    };
    int index = 0;
    for (const auto* line : bad_lines) {
        CAPTURE(index);
        CAPTURE(line);
        const auto path = write_temp("ds_bad_" + std::to_string(index) + ".jsonl",
                                     std::string(line) + "\n");
        CHECK_THROWS_AS(load_dataset(path, TaskKind::Triplet), DataError);
        ++index;
    }
}

TEST_CASE("load_dataset rejects duplicate ids") {
    const auto path = write_temp("ds_dup.jsonl",
        R"({"ID": "a", "Text": "t"})"
        "\n"
        R"({"ID": "a", "Text": "u"})"
        "\n");
    try {
        load_dataset(path, TaskKind::Triplet);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("load_dataset empty file warns instead of failing") {
    const auto path = write_temp("ds_empty.jsonl", "");
    std::vector<std::string> warnings;
    const auto ds = load_dataset(path, TaskKind::Triplet, &warnings);
    CHECK(ds.instances.empty());
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("no instances") != std::string::npos);
}

TEST_CASE("dataset save then load is the identity on canonical data") {
    Dataset ds;
    ds.task = TaskKind::Quadruplet;
    ReviewInstance inst;
    inst.id = "r1";
    inst.text = "Great pasta, shame about the noise.";
    auto t1 = make_tuple("pasta", "great", 8.25, 6.0);
    t1.category = "FOOD#QUALITY";
    auto t2 = make_tuple("noise", "shame", 3.0, 6.5);
    t2.category = "AMBIENCE#GENERAL";
    inst.gold = {t1, t2};
    ds.instances.push_back(inst);
    ReviewInstance bare;
    bare.id = "r2";
    bare.text = "No annotations here.";
    ds.instances.push_back(bare);

    const auto path = temp_dir() / "ds_roundtrip.jsonl";
    save_dataset(ds, path);
    const auto back = load_dataset(path, TaskKind::Quadruplet);
    REQUIRE(back.instances.size() == 2);
    CHECK(back.instances[0].gold.value() == ds.instances[0].gold.value());
    CHECK_FALSE(back.instances[1].gold.has_value());

    // Saving the reloaded dataset must reproduce the bytes.
    const auto path2 = temp_dir() / "ds_roundtrip2.jsonl";
    save_dataset(back, path2);
    CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("gold_by_id extracts annotations and rejects unannotated instances") {
    Dataset ds;
    ds.task = TaskKind::Triplet;
    ReviewInstance inst;
    inst.id = "a";
    inst.text = "t";
    inst.gold = {make_tuple("x", "y", 5.0, 5.0)};
    ds.instances.push_back(inst);
    const auto gold = gold_by_id(ds);
    REQUIRE(gold.count("a") == 1);
    CHECK(gold.at("a").size() == 1);

    ReviewInstance bare;
    bare.id = "b";
    bare.text = "no gold";
    ds.instances.push_back(bare);
    CHECK_THROWS_WITH_AS(gold_by_id(ds), doctest::Contains("\"b\""), DataError);
}

TEST_CASE("generations round-trip, sorted and byte-stable") {
    GenerationsFile gens;
    gens["s2"] = {{1, "second run", true, ""}, {0, "first run", true, ""}};
    gens["s1"] = {{0, "[]", true, ""},
                  {1, "", false, "connection refused"},
                  {2, "tail with \"quotes\" and \xE2\x82\xAC", true, ""}};

    const auto path = temp_dir() / "gens.jsonl";
    save_generations(gens, path);
    const auto back = load_generations(path);
    REQUIRE(back.size() == 2);
    REQUIRE(back.at("s1").size() == 3);
    CHECK(back.at("s1")[0].run == 0);
    CHECK(back.at("s1")[1].ok == false);
    CHECK(back.at("s1")[1].error == "connection refused");
    CHECK(back.at("s1")[2].text == "tail with \"quotes\" and \xE2\x82\xAC");
    CHECK(back.at("s2")[0].text == "first run");  // sorted by run index

    const auto path2 = temp_dir() / "gens2.jsonl";
    save_generations(back, path2);
    CHECK(read_file(path) == read_file(path2));

    // File starts with the lexicographically first id even though it was
    // inserted second.
    const auto text = read_file(path);
    CHECK(text.find("\"s1\"") < text.find("\"s2\""));
}

TEST_CASE("load_generations rejects duplicate id and run pairs") {
    const auto path = write_temp("gens_dup.jsonl",
        R"({"ID": "a", "Run": 0, "Text": "x", "OK": true})"
        "\n"
        R"({"ID": "a", "Run": 0, "Text": "y", "OK": true})"
        "\n");
    CHECK_THROWS_AS(load_generations(path), DataError);
}

TEST_CASE("load_generations validates the run index") {
    const auto bad = write_temp("gens_badrun.jsonl",
        R"({"ID": "a", "Run": -1, "Text": "x", "OK": true})"
        "\n");
    CHECK_THROWS_AS(load_generations(bad), DataError);
    const auto missing = write_temp("gens_norun.jsonl",
        R"({"ID": "a", "Text": "x", "OK": true})"
        "\n");
    CHECK_THROWS_AS(load_generations(missing), DataError);
}

TEST_CASE("runs round-trip normalizes line order") {
    RunsFile runs;
    PredictionRun r0;
    r0.run = 0;
    r0.tuples = {make_tuple("pasta", "great", 8.0, 6.0)};
    PredictionRun r1;
    r1.run = 1;  // a run that extracted nothing is still a run
    PredictionRun r2;
    r2.run = 2;
    r2.tuples = {make_tuple("pasta", "great", 7.9, 6.1),
                 make_tuple("waiter", "rude", 2.0, 7.0)};
    runs["s1"] = {r2, r0, r1};  // deliberately unsorted

    const auto path = temp_dir() / "runs.jsonl";
    save_runs(runs, TaskKind::Triplet, path);
    const auto back = load_runs(path, TaskKind::Triplet);
    REQUIRE(back.at("s1").size() == 3);
    CHECK(back.at("s1")[0].run == 0);
    CHECK(back.at("s1")[1].run == 1);
    CHECK(back.at("s1")[1].tuples.empty());
    CHECK(back.at("s1")[2].run == 2);
    REQUIRE(back.at("s1")[2].tuples.size() == 2);
    CHECK(back.at("s1")[2].tuples[1].aspect == "waiter");
    // VA survives via the canonical two-decimal form.
    CHECK(back.at("s1")[2].tuples[0].va.valence == doctest::Approx(7.9));

    const auto path2 = temp_dir() / "runs2.jsonl";
    save_runs(back, TaskKind::Triplet, path2);
    CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("load_runs rejects run index gaps") {
    const auto path = write_temp("runs_gap.jsonl",
        R"({"ID": "a", "Run": 0, "Tuples": []})"
        "\n"
        R"({"ID": "a", "Run": 2, "Tuples": []})"
        "\n");
    CHECK_THROWS_WITH_AS(load_runs(path, TaskKind::Triplet),
                         doctest::Contains("gap"), DataError);
    const auto no_zero = write_temp("runs_nozero.jsonl",
        R"({"ID": "a", "Run": 1, "Tuples": []})"
        "\n");
    CHECK_THROWS_AS(load_runs(no_zero, TaskKind::Triplet), DataError);
}

TEST_CASE("load_runs flags malformed tuples with the line number") {
    const auto path = write_temp("runs_bad.jsonl",
        R"({"ID": "a", "Run": 0, "Tuples": []})"
        "\n"
        R"({"ID": "a", "Run": 1, "Tuples": [{"aspect": "x"}]})"
        "\n");
    try {
        load_runs(path, TaskKind::Triplet);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("Tuples") != std::string::npos);
    }
}

TEST_CASE("predictions round-trip and reject duplicates") {
    PredictionsFile preds;
    preds["s1"] = {make_tuple("pasta", "great", 8.0, 6.0)};
    preds["s2"] = {};
    const auto path = temp_dir() / "preds.jsonl";
    save_predictions(preds, TaskKind::Triplet, path);
    const auto back = load_predictions(path, TaskKind::Triplet);
    REQUIRE(back.size() == 2);
    CHECK(back.at("s1") == preds.at("s1"));
    CHECK(back.at("s2").empty());

    const auto dup = write_temp("preds_dup.jsonl",
        R"({"ID": "a", "Tuples": []})"
        "\n"
        R"({"ID": "a", "Tuples": []})"
        "\n");
    CHECK_THROWS_AS(load_predictions(dup, TaskKind::Triplet), DataError);
}

TEST_CASE("save_support writes the vote ledger deterministically") {
    std::map<std::string, ConsensusResult> support;
    ConsensusResult res;
    res.k = 5;
    res.threshold = 3;
    res.support[CategoricalKey{{"pasta", "great"}}] = 4;
    res.support[CategoricalKey{{"waiter", "rude"}}] = 2;
    support["s1"] = res;
    const auto path = temp_dir() / "support.json";
    save_support(support, path);
    const auto text = read_file(path);
    CHECK(text.find("\"kept\": true") != std::string::npos);
    CHECK(text.find("\"kept\": false") != std::string::npos);
    CHECK(text.find("\"votes\": 4") != std::string::npos);
    CHECK(text.back() == '\n');
    save_support(support, path);
    CHECK(read_file(path) == text);
}

TEST_CASE("eval report JSON round-trips its corpus fields") {
    EvalReport report;
    report.n_pred = 4;
    report.n_gold = 4;
    report.sum_ctp = 3.96875;
    report.c_prec = report.c_rec = report.c_f1 = 0.9921875;
    InstanceEval inst;
    inst.id = "s1";
    inst.n_pred = 2;
    inst.n_gold = 2;
    inst.sum_ctp = 2.0;
    inst.assignment.pairs = {{0, 1, 1.0}, {1, 0, 1.0}};
    report.instances.push_back(inst);

    const auto path = temp_dir() / "eval.json";
    save_eval_report(report, path);
    const auto back = load_eval_report_summary(path);
    CHECK(back.n_pred == 4);
    CHECK(back.n_gold == 4);
    CHECK(back.sum_ctp == 3.96875);  // exact: doubles survive the JSON trip
    CHECK(back.c_f1 == 0.9921875);
    CHECK(back.instances.empty());

    const auto text = read_file(path);
    CHECK(text.find("\"c_f1\": \"99.22\"") != std::string::npos);

    save_eval_report(report, path);
    CHECK(read_file(path) == text);
}

TEST_CASE("render_eval_table shows two-decimal percentages") {
    EvalReport report;
    report.n_pred = 4;
    report.n_gold = 4;
    report.sum_ctp = 3.96875;
    report.c_prec = report.c_rec = report.c_f1 = 0.9921875;
    const auto table = render_eval_table(report);
    CHECK(table.find("99.22%") != std::string::npos);
    CHECK(table.find("cF1") != std::string::npos);
    CHECK(table.find("sum cTP") != std::string::npos);
}

TEST_CASE("empty eval report renders explicit n/a scores") {
    EvalReport report;  // nothing predicted, nothing gold
    const auto table = render_eval_table(report);
    CHECK(table.find("n/a") != std::string::npos);
    CHECK(table.find("%") == std::string::npos);
}

TEST_CASE("significance report serializes and renders every section") {
    stats::ScoreTable table;
    table.conditions = {"baseline", "5 views", "10 views"};
    table.scores = {
        {0.40, 0.41, 0.39, 0.42, 0.40, 0.41, 0.40, 0.39, 0.41, 0.40},
        {0.50, 0.52, 0.49, 0.51, 0.50, 0.52, 0.51, 0.50, 0.49, 0.51},
        {0.55, 0.56, 0.54, 0.57, 0.55, 0.56, 0.55, 0.54, 0.56, 0.55},
    };
    const auto report = stats::significance_pipeline(table);
    REQUIRE(report.pairwise_done);

    const auto path = temp_dir() / "significance.json";
    save_significance_report(report, path);
    const auto text = read_file(path);
    CHECK(text.find("\"alpha\": 0.05") != std::string::npos);
    CHECK(text.find("\"baseline\"") != std::string::npos);
    CHECK(text.find("\"p_holm\"") != std::string::npos);
    CHECK(text.find("\"stars\"") != std::string::npos);
    save_significance_report(report, path);
    CHECK(read_file(path) == text);

    const auto rendered = render_significance_table(report);
    CHECK(rendered.find("normality") != std::string::npos);
    CHECK(rendered.find("omnibus") != std::string::npos);
    CHECK(rendered.find("baseline vs 5 views") != std::string::npos);
    CHECK(rendered.find("pairwise") != std::string::npos);
}

TEST_CASE("significance rendering stops after a quiet omnibus") {
    stats::ScoreTable table;
    table.conditions = {"baseline", "5 views"};
    table.scores = {
        {0.40, 0.41, 0.39, 0.42, 0.40, 0.41, 0.40, 0.39},
        {0.40, 0.42, 0.39, 0.41, 0.40, 0.42, 0.41, 0.39},
    };
    const auto report = stats::significance_pipeline(table);
    REQUIRE_FALSE(report.pairwise_done);
    const auto rendered = render_significance_table(report);
    CHECK(rendered.find("stop") != std::string::npos);
    CHECK(rendered.find("n/a") != std::string::npos);
    CHECK(rendered.find(" vs ") == std::string::npos);

    const auto path = temp_dir() / "significance_quiet.json";
    save_significance_report(report, path);
    CHECK(read_file(path).find("\"pairwise_done\": false") != std::string::npos);
}

TEST_CASE("degenerate condition renders as a constant sample") {
    stats::ScoreTable table;
    table.conditions = {"baseline", "5 views"};
    table.scores = {
        {0.40, 0.40, 0.40, 0.40, 0.40},
        {0.50, 0.52, 0.49, 0.51, 0.53},
    };
    const auto report = stats::significance_pipeline(table);
    const auto rendered = render_significance_table(report);
    CHECK(rendered.find("constant sample") != std::string::npos);
}

TEST_CASE("write_file_atomic creates parents and leaves no temp files") {
    const auto dir = temp_dir() / "nested" / "deeper";
    std::filesystem::remove_all(temp_dir() / "nested");
    const auto path = dir / "out.txt";
    write_file_atomic(path, "payload");
    CHECK(read_file(path) == "payload");
    int entries = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        (void)entry;
        ++entries;
    }
    CHECK(entries == 1);
    write_file_atomic(path, "replaced");
    CHECK(read_file(path) == "replaced");
}
