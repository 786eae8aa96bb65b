#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cobol/engine.hpp"
#include "cobol/harness.hpp"
#include "cobol/records.hpp"

using namespace cobol;
namespace fs = std::filesystem;

namespace {

RunRecord sample_record() {
    RunRecord r;
    r.run_id = "demo_cobol_a1_s3";
    r.method = "cobol";
    r.benchmark = "rastrigin2";
    r.accuracy = 1.0;
    r.seed = 3;
    r.horizon = 3;
    r.config.window = 7;
    r.config.radius_rule = "lemma";
    r.init_points = {Vec::Constant(2, 0.25), Vec::Constant(2, -1.5)};
    r.init_values = {1.0 / 3.0, 2.0e-17};
    r.init_label_points = {Vec::Constant(2, 0.1)};
    r.init_labels = {1};
    StepRecord a;
    a.t = 1;
    a.arm = Arm::ExpertAugmented;
    a.x = Vec::Constant(2, 0.123456789012345678);
    a.queried = true;
    a.label = 1;
    a.z_star = -0.7;
    a.no_harm = true;
    a.handover = true;
    a.lambda = 1.0;
    a.bound_g = 2.0;
    a.p_lower = 0.1;
    a.p_upper = 0.9;
    a.overhead_ms = 12.5;
    StepRecord b = a;
    b.t = 2;
    b.label = 0;
    b.evaluated = true;
    b.y = 4.2;
    b.lambda = 0.986;
    StepRecord c;
    c.t = 3;
    c.arm = Arm::Vanilla;
    c.x = Vec::Constant(2, 5.12);
    c.evaluated = true;
    c.y = -1e-300;
    c.fallback = true;
    r.steps = {a, b, c};
    return r;
}

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("cobol_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("jsonl round trip is lossless") {
    const RunRecord r = sample_record();
    const auto back = records_from_jsonl(record_to_jsonl(r));
    REQUIRE(back.size() == 1);
    CHECK(back[0] == r);

    RunRecord failed = sample_record();
    failed.error = "solver blew up";
    failed.steps.pop_back();
    const fs::path dir = temp_dir("jsonl");
    export_records({r, failed}, "jsonl", (dir / "all.jsonl").string());
    const auto both = import_records((dir / "all.jsonl").string());
    REQUIRE(both.size() == 2);
    CHECK(both[0] == r);
    CHECK(both[1] == failed);
}

TEST_CASE("every jsonl line carries the schema tag") {
    std::istringstream in(record_to_jsonl(sample_record()));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const json j = json::parse(line);
        CHECK(j.at("schema") == 1);
        CHECK(j.at("run_id") == "demo_cobol_a1_s3");
        CHECK(j.at("type") == (n == 0 ? "header" : "step"));
        ++n;
    }
    CHECK(n == 4);
}

TEST_CASE("malformed jsonl is reported") {
    CHECK_THROWS(records_from_jsonl("{not json}\n"));
    CHECK_THROWS(records_from_jsonl(R"({"schema":1,"type":"step","run_id":"x","t":1})" "\n"));
    CHECK_THROWS(records_from_jsonl(R"({"schema":2,"type":"header","run_id":"x"})" "\n"));
    CHECK_THROWS(read_jsonl("/nonexistent/dir/file.jsonl"));
}

TEST_CASE("metrics csv schema") {
    CHECK(metrics_csv({}) == "run_id,t,arm,queried,label,y,SR,R,Qg,overhead_ms\n");
    const RunRecord r = sample_record();
    const std::string csv = metrics_csv({r});
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "run_id,t,arm,queried,label,y,SR,R,Qg,overhead_ms");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        CHECK(std::count(lines[i].begin(), lines[i].end(), ',') == 9);
        CHECK(lines[i].rfind("demo_cobol_a1_s3," + std::to_string(i) + ",", 0) == 0);
    }
    const fs::path dir = temp_dir("csv");
    export_records({}, "csv", (dir / "empty.csv").string());
    CHECK(slurp(dir / "empty.csv") == "run_id,t,arm,queried,label,y,SR,R,Qg,overhead_ms\n");
    CHECK_THROWS_AS(export_records({}, "xml", (dir / "x.xml").string()), std::invalid_argument);
}

TEST_CASE("config parsing collects every problem") {
    const EngineConfig d = config_from_json(json::object());
    CHECK(d == EngineConfig{});
    const EngineConfig c = config_from_json(json{{"eta", 5}, {"window", 4}, {"g_thr_scale", "probability"}});
    CHECK(c.eta == 5.0);
    CHECK(c.window == 4);
    CHECK(c.g_thr_scale == "probability");
    CHECK(config_from_json(config_to_json(c)) == c);
    try {
        config_from_json(json{{"eta", 0.5}, {"zeta", "fast"}, {"bogus", 1}, {"radius_rule", "wild"}});
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("zeta") != std::string::npos);
        CHECK(msg.find("bogus") != std::string::npos);
    }
    try {
        config_from_json(json{{"eta", 0.5}, {"radius_rule", "wild"}});
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("eta") != std::string::npos);
        CHECK(msg.find("radius_rule") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json(json::array()), std::invalid_argument);
}
