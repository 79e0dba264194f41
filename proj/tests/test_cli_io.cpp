#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dpfair/cli_io.hpp"

using namespace dpfair;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("dpfair_cli_" + std::to_string(std::hash<const void*>{}(this)) + "_" +
             std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

  fs::path write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

private:
  fs::path path_;
  static inline int counter_ = 0;
};

std::string read(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string error_of(const std::string& csv) {
  try {
    parse_dataset_csv(csv);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

RunConfig base_config(Command command, const fs::path& input, const fs::path& out) {
  RunConfig c;
  c.command = command;
  c.input_path = input;
  c.output_path = out;
  c.scale = 10.0;
  c.trials = 2000;
  c.threads = 1;
  return c;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

const std::string kCentroid = "entity,count\nA,1000\nB,1000\nC,1000\nD,1000\nE,1000\n";
const std::string kSpread = "entity,count,weight\nsmall,2,1.5\nmid,30,1.0\nbig,400,1.2\nzero,0,1.9\n";

}  // namespace

TEST_CASE("parse_dataset_csv examples") {
  const auto a = parse_dataset_csv("entity,count\nA,100\nB,50");
  CHECK(a.size() == 2);
  CHECK(a.counts() == std::vector<double>{100, 50});
  CHECK(a.weights() == std::vector<double>{1, 1});
  CHECK(a.entity_ids() == std::vector<std::string>{"A", "B"});
  CHECK(a.total() == 150.0);

  const auto b = parse_dataset_csv("entity,count,weight\nA,10,1.5\nB,2,2\n");
  CHECK(b.weights() == std::vector<double>{1.5, 2});

  // BOM, CRLF line endings, blank lines and surrounding spaces.
  const auto c = parse_dataset_csv("\xEF\xBB\xBF" "entity,count\r\n\r\n A , 1.5e2 \r\nB,0\r\n");
  CHECK(c.entity_ids() == std::vector<std::string>{"A", "B"});
  CHECK(c.counts() == std::vector<double>{150, 0});
}

TEST_CASE("parse_dataset_csv errors name the line or the entity") {
  CHECK_THROWS_AS(parse_dataset_csv("entity,count\nA,-3"), ValidationError);
  CHECK(error_of("entity,count\nA,-3").find("'A'") != std::string::npos);
  CHECK_THROWS_AS(parse_dataset_csv("A,100\nB,50"), FormatError);
  CHECK(error_of("A,100\nB,50").find("line 1") != std::string::npos);
  CHECK(error_of("").find("line 1") != std::string::npos);
  CHECK(error_of("entity,count\nA,1\nB,x\n").find("line 3") != std::string::npos);
  CHECK(error_of("entity,count\nA,1\nB,1,2\n").find("line 3") != std::string::npos);
  CHECK(error_of("entity,count\nA,1,000\n").find("line 2") != std::string::npos);
  CHECK_THROWS_AS(parse_dataset_csv("entity,count,weight\nA,1,0\nB,1,1"), ValidationError);
  CHECK(error_of("entity,count,weight\nA,1,1\nB,1,-2").find("'B'") != std::string::npos);
  CHECK_THROWS_AS(parse_dataset_csv("entity,count\nA,1\nA,2"), ValidationError);
  CHECK_THROWS_AS(parse_dataset_csv("entity,count\nA,1"), ValidationError);  // n < 2
  CHECK_THROWS_AS(parse_dataset_csv("entity,count\nA,0\nB,0"), ValidationError);
}

TEST_CASE("load_dataset and the shipped fixtures") {
  const fs::path data = DPFAIR_DATA_DIR;
  const auto hawaii = load_dataset(data / "hawaii_2010_households.csv", 453558.0);
  CHECK(hawaii.size() == 5);
  CHECK(hawaii.total() == 453558.0);
  CHECK_THROWS_AS(load_dataset(data / "hawaii_2010_households.csv", 453559.0), ValidationError);
  const auto weighted = load_dataset(data / "districts_weighted.csv");
  CHECK(weighted.weights().size() == weighted.size());
  CHECK_THROWS(load_dataset(data / "does_not_exist.csv"));
}

TEST_CASE("format_double keeps 17 significant digits") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-7) == "-2.4999999999999999e-07");
  CHECK(std::stod(format_double(M_PI)) == M_PI);
}

TEST_CASE("noise_spec_from requires exactly one of scale and epsilon") {
  RunConfig c;
  c.scale = 2.0;
  CHECK(noise_spec_from(c).scale() == 2.0);
  c.epsilon = 0.5;
  CHECK_THROWS_AS(noise_spec_from(c), ArgumentError);
  c.scale.reset();
  CHECK(noise_spec_from(c).scale() == 2.0);
  c.epsilon.reset();
  CHECK_THROWS_AS(noise_spec_from(c), ArgumentError);
  c.scale = 1.0;
  c.trials = 99;
  CHECK_THROWS_AS(noise_spec_from(c), ArgumentError);
  RunConfig g;
  g.kind = NoiseKind::Gaussian;
  g.epsilon = 1.0;
  CHECK_THROWS_AS(noise_spec_from(g), InvalidBudgetError);
  g.delta = 1e-6;
  CHECK(noise_spec_from(g).scale() > 5.29);
}

TEST_CASE("parse_command_line") {
  const char* argv[] = {"dp-postfair", "alloc",      "--input",   "x.csv",     "--mechanism",
                        "gaussian",    "--epsilon",  "0.5",       "--delta",   "1e-5",
                        "--trials",    "5000",       "--seed",    "17",        "--budget",
                        "6.5e9",       "--alloc-mech", "pos",     "--out",     "r.json",
                        "--plot-data", "p.csv",      "--threads", "3"};
  const auto c = parse_command_line(static_cast<int>(std::size(argv)), argv);
  REQUIRE(c.has_value());
  CHECK(c->command == Command::Alloc);
  CHECK(c->kind == NoiseKind::Gaussian);
  CHECK(c->epsilon == 0.5);
  CHECK_FALSE(c->scale.has_value());
  CHECK(c->delta == 1e-5);
  CHECK(c->trials == 5000);
  CHECK(c->master_seed == 17);
  CHECK(c->budget == 6.5e9);
  CHECK(c->alloc_mechanism == AllocChoice::ProjectionOntoSimplex);
  CHECK(c->output_path == "r.json");
  CHECK(c->plot_data_path == fs::path("p.csv"));
  CHECK(c->threads == 3);

  const char* minimal[] = {"dp-postfair", "release", "--input", "x.csv", "--mechanism",
                           "laplace",     "--scale", "10",      "--out", "r.json"};
  const auto m = parse_command_line(static_cast<int>(std::size(minimal)), minimal);
  REQUIRE(m.has_value());
  CHECK(m->master_seed == kDefaultSeed);
  CHECK(m->trials == 100000);
  CHECK(m->alloc_mechanism == AllocChoice::Both);

  const char* both[] = {"dp-postfair", "release", "--input",   "x.csv", "--mechanism", "laplace",
                        "--scale",     "10",      "--epsilon", "1",     "--out",       "r.json"};
  CHECK_THROWS_AS(parse_command_line(static_cast<int>(std::size(both)), both), ArgumentError);
  const char* bad[] = {"dp-postfair", "publish", "--input", "x.csv", "--mechanism",
                       "laplace",     "--scale", "1",       "--out", "r.json"};
  CHECK_THROWS_AS(parse_command_line(static_cast<int>(std::size(bad)), bad), ArgumentError);
  const char* seeds[] = {"dp-postfair", "release", "--input", "x.csv",         "--mechanism", "laplace",
                         "--scale",     "1",       "--seed",  "3", "--random-seed", "--out", "r.json"};
  CHECK_THROWS_AS(parse_command_line(static_cast<int>(std::size(seeds)), seeds), ArgumentError);
}

TEST_CASE("release on the centroid") {
  TempDir dir;
  const auto input = dir.write("centroid.csv", kCentroid);
  auto config = base_config(Command::Release, input, dir.path() / "r.json");
  config.trials = 100000;
  config.threads = 0;
  config.plot_data_path = dir.path() / "plot.csv";
  REQUIRE(run(config, std::cerr) == 0);
  const auto j = nlohmann::json::parse(read(config.output_path));
  CHECK(j.contains("config_echo"));
  CHECK(j.contains("bias_report"));
  CHECK(j.contains("bounds_report"));
  CHECK_FALSE(j.contains("allocation_reports"));
  const auto& b = j["bias_report"];
  // Counts of 1000 never clamp at this scale: both are exactly zero.
  CHECK(b["alpha_fairness"].get<double>() <= 4.0 * b["alpha_stderr"].get<double>());
  CHECK(j["bounds_report"]["lower"].get<double>() == 0.0);
  CHECK(j["bounds_report"]["upper"].get<double>() == 0.0);
  CHECK(j["config_echo"]["seed"].get<std::uint64_t>() == kDefaultSeed);
  CHECK(j["config_echo"]["total"].get<double>() == 5000.0);
  CHECK(csv_rows(read(*config.plot_data_path)).size() == 6);
}

TEST_CASE("release JSON layout and plot data") {
  TempDir dir;
  const auto input = dir.write("spread.csv", kSpread);
  auto config = base_config(Command::Release, input, dir.path() / "r.json");
  config.trials = 10000;
  config.plot_data_path = dir.path() / "plot.csv";
  const auto out = execute(config);
  const auto j = nlohmann::ordered_json::parse(out.report_json);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"config_echo", "bias_report", "bounds_report"});
  // Fewer than 1e4 Laplace trials: no bounds.
  config.trials = 1000;
  const auto small = nlohmann::json::parse(execute(config).report_json);
  CHECK_FALSE(small.contains("bounds_report"));
  CHECK(small["bias_report"]["lower_bound"].is_null());

  // Raw text: every float has up to 17 significant digits and round-trips.
  CHECK(out.report_json.find("\"alpha_fairness\": ") != std::string::npos);
  CHECK(out.report_json.back() == '\n');

  REQUIRE(out.plot_files.size() == 1);
  const auto rows = csv_rows(out.plot_files[0].second);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"entity", "true_count", "bias", "stderr"});
  CHECK(rows[1][0] == "zero");
  CHECK(rows[4][0] == "big");
  const auto& b = j["bias_report"];
  const auto ids = b["entities"].get<std::vector<std::string>>();
  const auto bias = b["per_entity_bias"].get<std::vector<double>>();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto it = std::find(ids.begin(), ids.end(), rows[r][0]);
    REQUIRE(it != ids.end());
    CHECK(std::stod(rows[r][2]) == bias[static_cast<std::size_t>(it - ids.begin())]);
  }
}

TEST_CASE("bounds uses the analytic path for Gaussian noise") {
  TempDir dir;
  const auto input = dir.write("spread.csv", kSpread);
  auto config = base_config(Command::Bounds, input, dir.path() / "b.json");
  config.kind = NoiseKind::Gaussian;
  const auto j = nlohmann::json::parse(execute(config).report_json);
  CHECK(j["bounds_report"]["method"] == "gaussian_analytic");
  CHECK(j["bounds_report"]["bracket"].size() == 2);
  CHECK_FALSE(j.contains("bias_report"));
  config.kind = NoiseKind::Laplace;
  config.trials = 10000;
  const auto e = nlohmann::json::parse(execute(config).report_json);
  CHECK(e["bounds_report"]["method"] == "monte_carlo_empirical");
  config.trials = 9999;
  CHECK_THROWS_AS(execute(config), ArgumentError);
}

TEST_CASE("alloc with both mechanisms") {
  TempDir dir;
  const auto input = dir.write("spread.csv", kSpread);
  auto config = base_config(Command::Alloc, input, dir.path() / "a.json");
  config.budget = 1e6;
  config.plot_data_path = dir.path() / "alloc.csv";
  REQUIRE(run(config, std::cerr) == 0);
  const auto j = nlohmann::json::parse(read(config.output_path));
  REQUIRE(j["allocation_reports"].size() == 2);
  const auto& bl = j["allocation_reports"][0];
  const auto& pos = j["allocation_reports"][1];
  CHECK(bl["mechanism"] == "BL");
  CHECK(pos["mechanism"] == "PoS");
  CHECK(bl["trials"] == pos["trials"]);
  CHECK(bl["seed"] == pos["seed"]);
  CHECK(j["config_echo"]["budget"].get<double>() == 1e6);
  CHECK(fs::exists(dir.path() / "alloc_bl.csv"));
  CHECK(fs::exists(dir.path() / "alloc_pos.csv"));
  const auto rows = csv_rows(read(dir.path() / "alloc_pos.csv"));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].size() == 5);
  CHECK(rows[0][4] == "misallocated_funds");
  const auto bias = pos["per_entity_bias"].get<std::vector<double>>();
  CHECK(std::stod(rows[4][2]) == bias[2]);  // "big" has the largest share

  config.alloc_mechanism = AllocChoice::Baseline;
  const auto single = execute(config);
  CHECK(nlohmann::json::parse(single.report_json)["allocation_reports"].size() == 1);
  REQUIRE(single.plot_files.size() == 1);
  CHECK(single.plot_files[0].first == *config.plot_data_path);
}

TEST_CASE("reports are byte-identical across thread counts") {
  TempDir dir;
  const auto input = dir.write("spread.csv", kSpread);
  for (auto command : {Command::Release, Command::Alloc, Command::Bounds}) {
    auto config = base_config(command, input, dir.path() / "x.json");
    config.trials = 3 * 4096 + 77;
    config.threads = 1;
    const auto one = execute(config);
    for (unsigned t : {2u, 8u}) {
      config.threads = t;
      CHECK(execute(config).report_json == one.report_json);
    }
    CHECK(one.report_json.find("threads") == std::string::npos);
  }
}

TEST_CASE("run reports errors with a nonzero status") {
  TempDir dir;
  std::ostringstream err;
  auto config = base_config(Command::Release, dir.path() / "missing.csv", dir.path() / "r.json");
  CHECK(run(config, err) != 0);
  CHECK(err.str().rfind("dp-postfair: error: ", 0) == 0);
  CHECK(err.str().find('\n') == err.str().size() - 1);

  const auto bad = dir.write("bad.csv", "entity,count\nA,5\nB,-1\n");
  config.input_path = bad;
  err.str("");
  CHECK(run(config, err) != 0);
  CHECK(err.str().find("'B'") != std::string::npos);

  config.input_path = dir.write("ok.csv", kSpread);
  config.output_path = dir.path() / "no_such_dir" / "r.json";
  CHECK(run(config, err) != 0);
}
