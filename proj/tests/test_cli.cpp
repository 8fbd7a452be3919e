#include <doctest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "helpers.hpp"
#include "oracle.hpp"
#include "radlabel/cli.hpp"
#include "radlabel/corpus.hpp"
#include "radlabel/errors.hpp"

using namespace radlabel;
using namespace radlabel::testing;
using nlohmann::json;

#include "fixture6.hpp"

namespace {

using Fixture = radlabel::testing::SixReportFixture;

}  // namespace

TEST_CASE("config validation is total and precedes any IO") {
  TempDir dir;

  SUBCASE("unreadable config") {
    CHECK_THROWS_AS(load_config(dir.file("nope.json")), ConfigError);
  }
  SUBCASE("unknown key") {
    write_file(dir.file("c.json"), R"({"datasets": [], "tpyo": 1})");
    CHECK_THROWS_AS(load_config(dir.file("c.json")), ConfigError);
  }
  SUBCASE("empty datasets") {
    write_file(dir.file("c.json"), R"({"datasets": []})");
    CHECK_THROWS_AS(load_config(dir.file("c.json")), ConfigError);
  }
  SUBCASE("bad mention class") {
    write_file(dir.file("c.json"),
               R"({"datasets": [{"id": "d", "path": "x.jsonl",
                   "taxonomy": {"findings": ["a"], "mention_classes": ["sometimes"]}}]})");
    CHECK_THROWS_AS(load_config(dir.file("c.json")), ConfigError);
  }
  SUBCASE("fractions must sum to one") {
    write_file(dir.file("c.json"),
               R"({"datasets": [{"id": "d", "path": "x.jsonl",
                   "taxonomy": {"findings": ["a"], "mention_classes": ["positive"]}}],
                   "split": {"fractions": [0.5, 0.2, 0.2]}})");
    CHECK_THROWS_AS(load_config(dir.file("c.json")), ConfigError);
  }
  SUBCASE("endpoint kind is checked") {
    write_file(dir.file("c.json"),
               R"({"datasets": [{"id": "d", "path": "x.jsonl",
                   "taxonomy": {"findings": ["a"], "mention_classes": ["positive"]}}],
                   "endpoint": {"kind": "carrier-pigeon"}})");
    CHECK_THROWS_AS(load_config(dir.file("c.json")), ConfigError);
  }
  SUBCASE("http endpoints need base_url and model") {
    write_file(dir.file("c.json"),
               R"({"datasets": [{"id": "d", "path": "x.jsonl",
                   "taxonomy": {"findings": ["a"], "mention_classes": ["positive"]}}],
                   "endpoint": {"kind": "http", "model": "m"}})");
    CHECK_THROWS_AS(load_config(dir.file("c.json")), ConfigError);
    write_file(dir.file("c.json"),
               R"({"datasets": [{"id": "d", "path": "x.jsonl",
                   "taxonomy": {"findings": ["a"], "mention_classes": ["positive"]}}],
                   "endpoint": {"kind": "http", "base_url": "http://h"}})");
    CHECK_THROWS_AS(load_config(dir.file("c.json")), ConfigError);
  }
  SUBCASE("bad shot sampling name") {
    write_file(dir.file("c.json"),
               R"({"datasets": [{"id": "d", "path": "x.jsonl",
                   "taxonomy": {"findings": ["a"], "mention_classes": ["positive"]}}],
                   "shot_sampling": "sometimes"})");
    CHECK_THROWS_AS(load_config(dir.file("c.json")), ConfigError);
  }
  SUBCASE("referencing an undeclared dataset fails before IO") {
    const Fixture fx;
    const auto config = load_config(fx.config_path);
    CHECK_THROWS_AS(config.dataset("not-declared"), ConfigError);
  }
}

TEST_CASE("cmd_ingest reports counts, supports and average characters") {
  const Fixture fx;
  const auto config = load_config(fx.config_path);
  const auto summary = cmd_ingest(config);
  CHECK(summary.n_reports == 6);
  CHECK(summary.supports.at("pneumonia") == 3);
  CHECK(summary.supports.at("effusion") == 3);

  double expected_chars = 0;
  for (int i = 1; i <= 6; ++i) {
    expected_chars += static_cast<double>(("report number " + std::to_string(i)).size());
  }
  CHECK(summary.avg_chars == doctest::Approx(expected_chars / 6.0).epsilon(1e-12));
}

TEST_CASE("cmd_split writes a reproducible manifest") {
  const Fixture fx({0.5, 0.0, 0.5});
  const auto config = load_config(fx.config_path);
  const auto path = cmd_split(config);
  const auto first = read_file(path);
  CHECK(first.find("\"fractions\"") != std::string::npos);

  cmd_split(config);
  CHECK(read_file(path) == first);

  const auto manifest = load_manifest(path);
  CHECK(manifest.assignment.size() == 6);
  long train = 0;
  for (const auto& [_, subset] : manifest.assignment) {
    if (subset == Subset::Train) ++train;
  }
  CHECK(train == 3);
}

TEST_CASE("dev_count flows from the config into the manifest") {
  const Fixture fx({0.5, 0.25, 0.25});
  auto config = load_config(fx.config_path);
  config.dev_count = 2;
  const auto path = cmd_split(config);
  const auto manifest = load_manifest(path);
  REQUIRE(manifest.dev_count.has_value());
  CHECK(*manifest.dev_count == 2);
  long dev = 0;
  for (const auto& [_, subset] : manifest.assignment) {
    if (subset == Subset::Dev) ++dev;
  }
  CHECK(dev == 2);
}

TEST_CASE("classify-eval round trip over the mock endpoint") {
  const Fixture fx;
  const auto config = load_config(fx.config_path);
  cmd_split(config);

  const auto result = cmd_classify(config, "", Subset::Test);
  CHECK(result.n_reports == 6);
  CHECK(result.invalid_rate == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(result.backend_errors == 0);

  SUBCASE("predictions file carries labels, validity and repairs") {
    std::ifstream in(result.predictions_path);
    std::string line;
    std::size_t lines = 0;
    long invalid = 0;
    while (std::getline(in, line)) {
      const auto record = json::parse(line);
      CHECK(record.contains("labels"));
      CHECK(record.contains("repairs"));
      if (!record["valid"].get<bool>()) ++invalid;
      if (record["id"] == "r3") {
        CHECK(record["repairs"] == json::array({"missing_key_filled(effusion)"}));
      }
      if (record["id"] == "r6") {
        CHECK(record["repairs"] == json::array({"unknown_key_dropped(extra)"}));
      }
      if (record["id"] == "r4") {
        CHECK_FALSE(record["valid"].get<bool>());
        CHECK(record["labels"] == json({{"pneumonia", -1}, {"effusion", -1}}));
      }
      ++lines;
    }
    CHECK(lines == 6);
    CHECK(invalid == 1);
  }

  SUBCASE("rerunning produces a byte-identical predictions file") {
    const auto bytes = read_file(result.predictions_path);
    const auto again = cmd_classify(config, "", Subset::Test);
    CHECK(read_file(again.predictions_path) == bytes);
  }

  SUBCASE("evaluation matches the hand-computed oracle") {
    EvalPaths paths;
    const auto report = cmd_eval(config, "", result.predictions_path, Subset::Test, &paths);
    CHECK(report.n_reports == 6);
    REQUIRE(report.macro_pos_f1.has_value());
    CHECK(*report.macro_pos_f1 == doctest::Approx(11.0 / 15.0).epsilon(1e-12));
    REQUIRE(report.weighted_f1.has_value());
    CHECK(*report.weighted_f1 == doctest::Approx(11.0 / 15.0).epsilon(1e-12));
    CHECK(report.invalid_rate == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(report.mismatches == 3);
    CHECK(report.mismatch_rate == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(report.per_finding.at("pneumonia").at(1).f1 == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(report.per_finding.at("effusion").at(1).f1 ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(std::filesystem::exists(paths.jsonl));
    CHECK(std::filesystem::exists(paths.table));
    const auto table = read_file(paths.table);
    CHECK(table.find("pneumonia") != std::string::npos);

    // re-running from the persisted artifacts reproduces the report bytes
    const auto jsonl_bytes = read_file(paths.jsonl);
    cmd_eval(config, "", result.predictions_path, Subset::Test, &paths);
    CHECK(read_file(paths.jsonl) == jsonl_bytes);
  }
}

TEST_CASE("three-shot classification doubles the token budget and draws from train") {
  const Fixture fx({0.5, 0.0, 0.5}, 3);
  const auto config = load_config(fx.config_path);
  cmd_split(config);
  const auto result = cmd_classify(config, "", Subset::Test);
  CHECK(result.n_reports == 3);

  // the run log summary records the doubled budget
  std::ifstream in(result.run_log_path);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  const auto summary = json::parse(last);
  REQUIRE(summary.contains("summary"));
  CHECK(summary["shots"] == 3);
  CHECK(summary["max_tokens"] == 4096);
}

TEST_CASE("cmd_export_sft writes one pair per subset record") {
  const Fixture fx({0.5, 0.0, 0.5});
  const auto config = load_config(fx.config_path);
  cmd_split(config);
  const auto result = cmd_export_sft(config, "", Subset::Train);
  CHECK(result.count == 3);
  const auto bytes = read_file(result.out_path);
  CHECK(std::count(bytes.begin(), bytes.end(), '\n') == 3);

  const auto again = cmd_export_sft(config, "", Subset::Train);
  CHECK(read_file(again.out_path) == bytes);
}

TEST_CASE("cmd_augment translates, filters and persists a loadable dataset") {
  const Fixture fx;
  auto config = load_config(fx.config_path);

  // echo-style translation answers keyed by report id
  std::string answers;
  for (int i = 1; i <= 6; ++i) {
    json record = {{"id", "r" + std::to_string(i)},
                   {"text", "translated report number " + std::to_string(i)}};
    answers += record.dump() + "\n";
  }
  write_file(fx.dir.file("answers.jsonl"), answers);

  const auto result = cmd_augment(config, "", "en", std::nullopt);
  CHECK(result.translated == 6);
  CHECK(result.kept == 6);
  CHECK(result.dropped == 0);
  CHECK(result.failed == 0);

  const auto& ds = config.dataset("");
  const auto augmented = load_dataset(result.out_path, ds.taxonomy);
  CHECK(augmented.size() == 12);  // union of originals and translations
  CHECK(augmented[6].report.id == "r1::en");
  CHECK(augmented[6].report.language == "en");
  CHECK(augmented[6].labels == augmented[0].labels);

  SUBCASE("translated_only mode keeps just the translations") {
    config.augment.mode = "translated_only";
    const auto only = cmd_augment(config, "", "en", std::nullopt);
    const auto translated = load_dataset(only.out_path, ds.taxonomy);
    CHECK(translated.size() == 6);
  }
  SUBCASE("a failing translation is reported but does not abort") {
    std::string with_failure = answers;
    with_failure += json({{"id", "r1"}, {"error", "down"}}).dump() + "\n";
    // failure registrations take precedence inside the mock: r1 now fails
    write_file(fx.dir.file("answers.jsonl"), with_failure);
    const auto partial = cmd_augment(config, "", "en", std::nullopt);
    CHECK(partial.failed == 1);
    CHECK(partial.translated == 5);
  }
}

TEST_CASE("classify works against a live http endpoint configured by file") {
  const Fixture fx;

  // chat-completions stand-in that echoes a fixed valid answer per request
  httplib::Server server;
  std::atomic<long> authorized{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("Authorization") == "Bearer local-test-key") ++authorized;
    const auto body = json::parse(req.body);
    const std::string target = body["messages"].back()["content"];
    // derive the answer from the report number so predictions vary
    const bool positive = target.back() % 2 == 0;
    json content_labels = {{"pneumonia", positive ? 1 : -1}, {"effusion", -1}};
    json response = {{"choices",
                      {{{"message", {{"role", "assistant"}, {"content", content_labels.dump()}}},
                        {"finish_reason", "stop"}}}},
                     {"usage", {{"completion_tokens", 9}}}};
    res.set_content(response.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("RADLABEL_TEST_KEY", "local-test-key", 1);
  auto config = load_config(fx.config_path);
  config.endpoint.kind = "http";
  config.endpoint.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.endpoint.model = "local-model";
  config.endpoint.api_key_env = "RADLABEL_TEST_KEY";
  cmd_split(config);
  const auto result = cmd_classify(config, "", Subset::Test);

  server.stop();
  listener.join();

  CHECK(result.n_reports == 6);
  CHECK(result.backend_errors == 0);
  CHECK(result.invalid_rate == 0.0);
  CHECK(authorized.load() == 6);
}

TEST_CASE("run_cli drives the full pipeline through argv") {
  const Fixture fx;
  const std::string config = fx.config_path.string();

  auto run = [&](std::vector<std::string> args) {
    std::vector<const char*> argv = {"radlabel"};
    for (const auto& arg : args) argv.push_back(arg.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
  };

  CHECK(run({"ingest", "--config", config}) == 0);
  CHECK(run({"split", "--config", config}) == 0);
  CHECK(run({"classify", "--config", config, "--subset", "test"}) == 0);
  const auto predictions =
      (fx.dir.path() / "runs" / "fixture_test_shots0_predictions.jsonl").string();
  CHECK(run({"eval", "--config", config, "--predictions", predictions, "--subset", "test"}) == 0);
  CHECK(run({"export-sft", "--config", config, "--subset", "test"}) == 0);

  SUBCASE("usage errors do not crash") {
    CHECK(run({"classify"}) != 0);                        // missing --config
    CHECK(run({"no-such-command"}) != 0);
    CHECK(run({"classify", "--config", config, "--subset", "nope"}) != 0);
  }
  SUBCASE("a missing manifest is a clean failure") {
    const Fixture fresh;
    CHECK(run({"classify", "--config", fresh.config_path.string(), "--subset", "test"}) == 1);
  }
}
