#include "segwise/cli.hpp"
#include "segwise/error.hpp"
#include "segwise/experiment.hpp"
#include "segwise/multiwindow.hpp"
#include "segwise/random.hpp"
#include "segwise/segmenter.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace segwise;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("segwise_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        const auto p = path / name;
        std::ofstream(p, std::ios::binary) << content;
        return p.string();
    }
};

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "segwise");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string shortest(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string to_csv(const TimeSeries& s, bool header) {
    std::string out = header ? "value\n" : "";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += shortest(s(i, 0)) + "\n";
    }
    return out;
}

TimeSeries parse(const std::string& text, std::vector<std::string> cols = {}, std::optional<bool> header = {}) {
    std::istringstream in(text);
    return cli::parse_csv(in, cols, header);
}

ExperimentConfig three_regime() {
    ExperimentConfig c;
    c.generator = Generator::segmentwise_ar;
    c.fractions = {0.1, 0.3};
    c.filters = {{0.0, 0.8, -0.3}, {0.0, -0.5, 0.1}, {0.0, 0.5, -0.5}};
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("CSV record splitting") {
    CHECK(cli::split_csv_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(cli::split_csv_line("\"x,y\", 2 ,\"he said \"\"hi\"\"\"") ==
          std::vector<std::string>{"x,y", "2", "he said \"hi\""});
    CHECK(cli::split_csv_line("1,,3") == std::vector<std::string>{"1", "", "3"});
}

TEST_CASE("CSV ingestion") {
    SUBCASE("single column without header") {
        const auto s = parse("1\n2\n3");
        CHECK(s == TimeSeries::from_rows({{1}, {2}, {3}}));
    }
    SUBCASE("header with a named column") {
        const auto s = parse("time,temp\n1,20.5\n2,21.5\n", {"temp"});
        CHECK(s == TimeSeries::from_rows({{20.5}, {21.5}}));
    }
    SUBCASE("index selection, several columns") {
        const auto s = parse("1,2,3\n4,5,6\n", {"2", "0"});
        CHECK(s == TimeSeries::from_rows({{3, 1}, {6, 4}}));
    }
    SUBCASE("BOM, CRLF, blank lines and quoting") {
        const auto s = parse("\xEF\xBB\xBF\"a\",b\r\n\r\n\"1.5\",2\r\n\n3,4\r\n", {"a"});
        CHECK(s == TimeSeries::from_rows({{1.5}, {3}}));
    }
    SUBCASE("explicit header flags") {
        CHECK(parse("1\n2\n3", {}, true).size() == 2);
        CHECK_THROWS_AS(parse("x\n2\n", {}, false), DataError);
    }
    SUBCASE("NaN is rejected with its line number") {
        try {
            parse("v\n1\n\nNaN\n", {"v"});
            FAIL("expected a DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("line 4") != std::string::npos);
        }
    }
    SUBCASE("other bad input") {
        CHECK_THROWS_AS(parse("v\n1\nabc\n"), DataError);
        CHECK_THROWS_AS(parse("v\n1\ninf\n"), DataError);
        CHECK_THROWS_AS(parse("a,b\n1\n", {"b"}), DataError);
        CHECK_THROWS_AS(parse("a,b\n1,2\n", {"c"}), ConfigError);
        CHECK_THROWS_AS(parse("1,2\n", {"5"}), ConfigError);
        CHECK_THROWS_AS(parse(""), DataError);
        CHECK_THROWS_AS(parse("a,b\n"), DataError);
        CHECK_THROWS_AS(cli::ingest_csv("/nonexistent/file.csv", {}), DataError);
    }
}

TEST_CASE("detect command matches the library") {
    TempDir tmp;
    ExperimentConfig c;
    Rng rng = make_rng(11);
    const auto data = generate(c, 300, rng).series;
    const auto path = tmp.file("iid.csv", to_csv(data, true));

    const auto r = invoke({"detect", "--input", path, "--penalty", "log:2"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);

    DetectOptions opt;
    opt.penalty.multiplier = 2.0;
    const auto lib = detect(cli::ingest_csv(path, {}), opt);
    CHECK(cli::ingest_csv(path, {}) == data);
    CHECK(j["result"]["m_hat"] == lib.m_hat);
    CHECK(j["result"]["change_points"].get<std::vector<std::size_t>>() == lib.change_points);
    CHECK(j["result"]["losses"].get<std::vector<double>>() == lib.losses);
    CHECK(j["result"]["penalty"].get<double>() == lib.penalty);
    CHECK(j["result"]["variance_scale"].get<double>() == lib.variance_scale);
    CHECK(j["meta"]["version"] == cli::version);
    CHECK(j["meta"]["params"]["penalty"] == "log:2");
    CHECK(j["meta"]["seed"].is_null());

    const auto csv = invoke({"detect", "-i", path, "--penalty", "bic:2", "--format", "csv"});
    REQUIRE(csv.code == 0);
    std::string want = "change_point\n";
    for (const auto cp : lib.change_points) {
        want += std::to_string(cp) + "\n";
    }
    CHECK(csv.out == want);

    const auto unscaled = invoke({"detect", "-i", path, "--penalty", "hq:1", "--no-rescale-var", "--beta", "5"});
    REQUIRE(unscaled.code == 0);
    const auto u = json::parse(unscaled.out)["result"];
    CHECK(u["variance_scale"] == 1.0);
    CHECK(u["beta"] == 5);
}

TEST_CASE("simulate then mw round trip") {
    TempDir tmp;
    const auto csv_path = (tmp.path / "ar.csv").string();
    const auto sim = invoke({"simulate", "--generator", "ar", "--filters", "0.8,-0.3;-0.5,0.1;0.5,-0.5",
                             "--fractions", "0.1,0.3", "-n", "1000", "--seed", "3", "--output", csv_path});
    REQUIRE(sim.code == 0);
    CHECK(sim.out.empty());

    // the file holds exactly the library's draw
    Rng rng = make_rng(3);
    const auto data = generate(three_regime(), 1000, rng).series;
    CHECK(cli::ingest_csv(csv_path, {}) == data);

    const auto mw = invoke({"mw", "-i", csv_path, "--windows", "100,50,20,10", "--penalty", "log:1", "--tau", "1",
                            "--emit-scores"});
    REQUIRE(mw.code == 0);
    const auto j = json::parse(mw.out);

    WindowPlan plan;
    plan.windows = {100, 50, 20, 10};
    plan.penalty.multiplier = 1.0;
    const auto lib = mw_detect(data.data(), plan);
    const auto ranges = j["result"]["ranges"].get<std::vector<std::vector<std::size_t>>>();
    REQUIRE(ranges.size() == lib.peaks.ranges.size());
    bool has100 = false, has300 = false;
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        CHECK(ranges[i] == std::vector<std::size_t>{lib.peaks.ranges[i].first, lib.peaks.ranges[i].last});
        has100 = has100 || lib.peaks.ranges[i].contains(100);
        has300 = has300 || lib.peaks.ranges[i].contains(300);
    }
    CHECK(ranges.size() == 2);
    CHECK(has100);
    CHECK(has300);
    CHECK(j["result"]["m_hat"] == ranges.size());
    REQUIRE(j["result"]["rounds"].size() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(j["result"]["rounds"][r]["scores"].get<std::vector<int>>() == lib.board.rounds[r].scores);
        CHECK(j["result"]["rounds"][r]["window"] == plan.windows[r]);
    }

    const auto table = invoke({"mw", "-i", csv_path, "--windows", "100,50,20,10", "--emit-scores", "--format",
                               "csv"});
    REQUIRE(table.code == 0);
    CHECK(std::count(table.out.begin(), table.out.end(), '\n') == 4 * 1000 + 1);
    CHECK(table.out.rfind("round,window,index,score\n1,100,1,", 0) == 0);

    const auto autow = invoke({"mw", "-i", csv_path});
    REQUIRE(autow.code == 0);
    CHECK(json::parse(autow.out)["meta"]["params"]["windows"].get<std::vector<std::size_t>>() ==
          std::vector<std::size_t>{100, 50, 20, 10});
}

TEST_CASE("pacf and bs commands") {
    TempDir tmp;
    Rng rng = make_rng(31);
    const auto data = generate(three_regime(), 600, rng).series;
    const auto path = tmp.file("ar.csv", to_csv(data, false));

    const auto p = invoke({"pacf", "-i", path, "--max-lag", "10"});
    REQUIRE(p.code == 0);
    const auto lib = pacf(data.data(), 10);
    std::istringstream lines(p.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "lag,pacf");
    for (std::size_t k = 1; k <= 10; ++k) {
        REQUIRE(std::getline(lines, line));
        const auto comma = line.find(',');
        CHECK(std::stoul(line.substr(0, comma)) == k);
        double v = 0.0;
        std::from_chars(line.data() + comma + 1, line.data() + line.size(), v);
        CHECK(v == lib.values[k - 1]);
    }

    const auto b = invoke({"bs", "-i", path, "-L", "2", "--mmax", "3"});
    REQUIRE(b.code == 0);
    BsOptions opt;
    opt.m_max = 3;
    const auto bs = binary_segmentation(data.data(), opt);
    const auto j = json::parse(b.out);
    CHECK(j["result"]["change_points"].get<std::vector<std::size_t>>() == bs.change_points);
    CHECK(j["result"]["reductions"].get<std::vector<double>>() == bs.reductions);
    CHECK(j["meta"]["params"]["min_len"] == 20);
}

TEST_CASE("experiment and benchmark commands") {
    const auto e = invoke({"experiment", "--ns", "100,200", "--reps", "5", "--seed", "3", "--penalty", "log:2"});
    REQUIRE(e.code == 0);
    const auto j = json::parse(e.out);
    CHECK(j["result"]["per_n"].size() == 2);
    CHECK(j["meta"]["seed"] == 3);

    ExperimentConfig c;
    c.ns = {100, 200};
    c.reps = 5;
    c.seed = 3;
    CHECK(j["result"] == to_json(run_experiment(c)));

    const auto csv = invoke({"experiment", "--ns", "100", "--reps", "4", "--seed", "3", "--format", "csv"});
    REQUIRE(csv.code == 0);
    CHECK(csv.out.rfind("n,f_under,f_exact,f_over", 0) == 0);

    const auto b = invoke({"benchmark", "--ns", "200,400", "--reps", "3", "--no-warmup", "--seed", "1"});
    REQUIRE(b.code == 0);
    CHECK(json::parse(b.out)["result"]["timings"].size() == 4);
}

TEST_CASE("exit codes and diagnostics") {
    TempDir tmp;
    const auto good = tmp.file("good.csv", "1\n2\n3\n4\n5\n6\n");
    const auto nan = tmp.file("nan.csv", "v\n1\nNaN\n");

    auto r = invoke({"detect", "-i", nan});
    CHECK(r.code == cli::data_error);
    CHECK(r.err == "segwise: data error: line 3: non-finite cell 'NaN'\n");
    CHECK(r.out.empty());

    CHECK(invoke({"detect", "-i", (tmp.path / "missing.csv").string()}).code == cli::data_error);
    CHECK(invoke({"detect", "-i", good, "--penalty", "xyz:1"}).code == cli::config_error);
    CHECK(invoke({"detect", "-i", good, "--penalty", "custom:1"}).code == cli::config_error);
    CHECK(invoke({"detect", "-i", good, "--penalty", "custom:1:0.5"}).code == cli::ok);
    CHECK(invoke({"detect", "-i", good, "--windows", "10"}).code == cli::config_error);
    CHECK(invoke({"detect", "-i", good, "--format", "xml"}).code == cli::config_error);
    CHECK(invoke({"detect", "-i", good, "--engine", "okm", "--restarts", "3"}).code == cli::config_error);
    CHECK(invoke({"detect", "-i", good, "--engine", "okm", "--restarts", "3", "--seed", "1"}).code == cli::ok);
    CHECK(invoke({"detect"}).code == cli::config_error);
    CHECK(invoke({}).code == cli::config_error);
    CHECK(invoke({"simulate", "-n", "10"}).code == cli::config_error);
    CHECK(invoke({"experiment", "--reps", "2"}).code == cli::config_error);
    CHECK(invoke({"mw", "-i", good, "--order", "0", "--windows", "2"}).code == cli::config_error);
    CHECK(invoke({"mw", "-i", good, "--windows", "3,5"}).code == cli::config_error);
    CHECK(invoke({"mw", "-i", good, "--windows", "100"}).code == cli::data_error);

    const auto bad = invoke({"bs", "-i", good, "--bogus"});
    CHECK(bad.code == cli::config_error);
    CHECK(std::count(bad.err.begin(), bad.err.end(), '\n') == 1);
    CHECK(bad.err.rfind("segwise: config error: ", 0) == 0);

    const auto two = tmp.file("two.csv", "a,b\n1,2\n3,4\n5,6\n");
    CHECK(invoke({"pacf", "-i", two, "--max-lag", "1"}).code == cli::config_error);
    CHECK(invoke({"pacf", "-i", two, "--columns", "b", "--max-lag", "1"}).code == cli::ok);

    const auto help = invoke({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("detect") != std::string::npos);
}

TEST_CASE("output files are written whole") {
    TempDir tmp;
    const auto target = (tmp.path / "out.json").string();
    const auto good = tmp.file("good.csv", "1\n2\n3\n4\n5\n6\n");
    std::ofstream(target) << "stale";
    REQUIRE(invoke({"detect", "-i", good, "-o", target}).code == 0);
    CHECK(json::parse(slurp(target))["result"].contains("m_hat"));
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path)) {
        ++entries;
    }
    CHECK(entries == 2);
    CHECK(invoke({"detect", "-i", good, "-o", (tmp.path / "no" / "such" / "dir.json").string()}).code ==
          cli::data_error);
}

TEST_CASE("the installed binary") {
    TempDir tmp;
    const auto out = (tmp.path / "sim.csv").string();
    const std::string bin = SEGWISE_CLI;
    int status = std::system((bin + " simulate -n 200 --seed 5 --generator iid -o " + out).c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
    ExperimentConfig c;
    Rng rng = make_rng(5);
    CHECK(cli::ingest_csv(out, {}) == generate(c, 200, rng).series);

    const auto nan = tmp.file("nan.csv", "1\nnan\n");
    status = std::system((bin + " detect -i " + nan + " 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(status) == 1);
    status = std::system((bin + " detect -i " + nan + " --penalty nope:1 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(status) == 2);
}
