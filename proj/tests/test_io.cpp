// Persistence: checkpoint container byte-stability and corruption handling,
// model/sampler checkpoint fidelity, strict config parsing, csv helpers.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ddss/checkpoint_io.hpp"
#include "ddss/config.hpp"
#include "ddss/csv.hpp"
#include "ddss/errors.hpp"
#include "ddss/ggdm.hpp"
#include "ddss/rng.hpp"
#include "ddss/schedule.hpp"
#include "ddss/score_network.hpp"
#include "ddss/toml.hpp"
#include "doctest.h"

using ddss::tg::Tensor;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  REQUIRE(f.good());
  f.write(bytes.data(), std::streamsize(bytes.size()));
}

// in-place substring patch that must preserve the byte length
std::string patched(std::string bytes, const std::string& from, const std::string& to) {
  REQUIRE(from.size() == to.size());
  const std::size_t at = bytes.find(from);
  REQUIRE(at != std::string::npos);
  bytes.replace(at, from.size(), to);
  return bytes;
}

Tensor rnd(std::vector<std::size_t> shape, std::uint64_t salt) {
  Tensor t = Tensor::zeros(shape);
  ddss::NoiseStream rng(99);
  for (std::size_t i = 0; i < t.size(); ++i)
    t.mut()[i] = -1.0 + 2.0 * rng.uniform(ddss::NoiseStream::data, salt, i);
  return t;
}

bool same_tensor(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void expect_config_error(const std::string& text, const std::string& needle) {
  try {
    ddss::parse_toml(text);
    FAIL_CHECK("expected a config error containing '" << needle << "'");
  } catch (const ddss::ConfigError& e) {
    CAPTURE(e.what());
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("checkpoint container: save-load-save is byte identical") {
  TempFile a("ckpt_a.bin"), b("ckpt_b.bin");
  ddss::Checkpoint c;
  c.arrays["weights"] = rnd({3, 4}, 1);
  c.arrays["bias"] = rnd({4}, 2);
  c.metadata["note"] = "round trip";
  c.metadata["count"] = 12;
  ddss::save_checkpoint(a.path, c);

  ddss::Checkpoint back = ddss::load_checkpoint(a.path);
  REQUIRE(back.arrays.size() == 2);
  CHECK(same_tensor(back.arrays.at("weights"), c.arrays.at("weights")));
  CHECK(same_tensor(back.arrays.at("bias"), c.arrays.at("bias")));
  CHECK(back.metadata["note"] == "round trip");
  CHECK(back.metadata["count"] == 12);

  ddss::save_checkpoint(b.path, back);
  CHECK(slurp(a.path) == slurp(b.path));

  ddss::Checkpoint empty_arr;
  empty_arr.arrays["nothing"] = Tensor();
  CHECK_THROWS_AS(ddss::save_checkpoint(b.path, empty_arr), ddss::IoError);
}

TEST_CASE("checkpoint loader rejects corrupted files") {
  TempFile good("ckpt_good.bin"), bad("ckpt_bad.bin");
  ddss::Checkpoint c;
  c.arrays["w"] = rnd({2, 3}, 3);
  ddss::save_checkpoint(good.path, c);
  const std::string bytes = slurp(good.path);

  CHECK_THROWS_AS(ddss::load_checkpoint("does_not_exist.bin"), ddss::IoError);

  spit(bad.path, "short");
  CHECK_THROWS_AS(ddss::load_checkpoint(bad.path), ddss::IoError);

  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  spit(bad.path, wrong_magic);
  CHECK_THROWS_AS(ddss::load_checkpoint(bad.path), ddss::IoError);

  std::string huge_header = bytes;
  for (std::size_t i = 8; i < 16; ++i) huge_header[i] = char(0xff);
  spit(bad.path, huge_header);
  CHECK_THROWS_AS(ddss::load_checkpoint(bad.path), ddss::IoError);

  spit(bad.path, patched(bytes, "\"format_version\":1", "\"format_version\":9"));
  CHECK_THROWS_AS(ddss::load_checkpoint(bad.path), ddss::IoError);

  spit(bad.path, patched(bytes, "\"dtype\":\"f64\"", "\"dtype\":\"f32\""));
  CHECK_THROWS_AS(ddss::load_checkpoint(bad.path), ddss::IoError);

  spit(bad.path, bytes.substr(0, bytes.size() - 8));  // payload cut short
  CHECK_THROWS_AS(ddss::load_checkpoint(bad.path), ddss::IoError);

  std::string garbled = bytes;
  garbled[17] = '!';  // break the JSON header
  spit(bad.path, garbled);
  CHECK_THROWS_AS(ddss::load_checkpoint(bad.path), ddss::IoError);
}

TEST_CASE("model checkpoint restores weights, ema, and the schedule exactly") {
  TempFile a("model_a.bin"), b("model_b.bin"), bad("model_bad.bin");
  auto s = ddss::make_cosine_logsnr_schedule(16);
  auto net = ddss::ScoreNetwork::init(2, 16, 8, 2, 16.0, 5);
  auto ema = net.clone();
  for (std::size_t pi = 0; pi < net.params.size(); ++pi)
    for (std::size_t i = 0; i < net.params[pi].size(); ++i) {
      net.params[pi].mut()[i] += 0.01 * double((pi + i) % 5);
      ema.params[pi].mut()[i] -= 0.02 * double((pi + 3 * i) % 7);
    }

  nlohmann::json extra;
  extra["train_steps"] = 4000;
  ddss::save_model_checkpoint(a.path, net, ema, s, extra);

  auto m = ddss::load_model_checkpoint(a.path);
  REQUIRE(m.net.params.size() == net.params.size());
  for (std::size_t pi = 0; pi < net.params.size(); ++pi) {
    CHECK(same_tensor(m.net.params[pi], net.params[pi]));
    CHECK(same_tensor(m.ema.params[pi], ema.params[pi]));
  }
  CHECK(m.net.weights_hash() == net.weights_hash());
  CHECK(m.schedule.T == s.T);
  CHECK(m.schedule.kind == s.kind);
  CHECK(m.schedule.alpha_bar == s.alpha_bar);
  CHECK(m.schedule.beta == s.beta);
  CHECK(m.schedule.fingerprint() == s.fingerprint());
  CHECK(m.metadata["train_steps"] == 4000);

  // resaving the loaded model reproduces the file byte for byte
  ddss::save_model_checkpoint(b.path, m.net, m.ema, m.schedule, extra);
  CHECK(slurp(a.path) == slurp(b.path));

  // a stamp that disagrees with the stored schedule is rejected
  ddss::Checkpoint raw = ddss::load_checkpoint(a.path);
  raw.metadata["fingerprint"] = raw.metadata["fingerprint"].get<std::uint64_t>() ^ 1;
  ddss::save_checkpoint(bad.path, raw);
  CHECK_THROWS_AS(ddss::load_model_checkpoint(bad.path), ddss::FingerprintError);

  raw = ddss::load_checkpoint(a.path);
  raw.arrays.erase("net." + net.names[0]);
  ddss::save_checkpoint(bad.path, raw);
  CHECK_THROWS_AS(ddss::load_model_checkpoint(bad.path), ddss::IoError);

  raw = ddss::load_checkpoint(a.path);
  raw.arrays["ema." + net.names[0]] = Tensor::zeros({1, 1});
  ddss::save_checkpoint(bad.path, raw);
  CHECK_THROWS_AS(ddss::load_model_checkpoint(bad.path), ddss::IoError);

  raw = ddss::load_checkpoint(a.path);
  raw.metadata.erase("T_embed");
  ddss::save_checkpoint(bad.path, raw);
  CHECK_THROWS_AS(ddss::load_model_checkpoint(bad.path), ddss::IoError);
}

TEST_CASE("sampler checkpoint restores the searched parameters exactly") {
  TempFile a("samp_a.bin"), bad("samp_bad.bin");
  auto s = ddss::make_cosine_logsnr_schedule(32);
  auto p = ddss::init_from_ddpm(s, 4, "linear", ddss::Family::ggdm, /*learn_time=*/true);
  // nudge the raw values so we are not saving a symmetric special case
  for (auto& [key, vec] : p.raw)
    for (std::size_t i = 0; i < vec.size(); ++i) vec[i] += 0.001 * double(i + key.size());

  nlohmann::json extra;
  extra["search_steps"] = 2000;
  ddss::save_sampler_checkpoint(a.path, p, extra);

  auto back = ddss::load_sampler_checkpoint(a.path);
  CHECK(back.family == p.family);
  CHECK(back.learn_time == p.learn_time);
  CHECK(back.K == p.K);
  CHECK(back.schedule_fingerprint == p.schedule_fingerprint);
  CHECK(back.base_times == p.base_times);
  REQUIRE(back.raw.size() == p.raw.size());
  for (const auto& [key, vec] : p.raw) {
    REQUIRE(back.raw.count(key) == 1);
    CHECK(back.raw.at(key) == vec);
  }
  back.validate(s.T);  // still a coherent parameter set

  ddss::SamplerParams incomplete;
  CHECK_THROWS_AS(ddss::save_sampler_checkpoint(bad.path, incomplete), ddss::ShapeError);

  ddss::Checkpoint raw = ddss::load_checkpoint(a.path);
  raw.arrays.erase("base_times");
  ddss::save_checkpoint(bad.path, raw);
  CHECK_THROWS_AS(ddss::load_sampler_checkpoint(bad.path), ddss::IoError);

  raw = ddss::load_checkpoint(a.path);
  raw.metadata.erase("family");
  ddss::save_checkpoint(bad.path, raw);
  CHECK_THROWS_AS(ddss::load_sampler_checkpoint(bad.path), ddss::IoError);
}

TEST_CASE("strict config text: accepted forms") {
  const std::string text =
      "# leading comment\n"
      "[alpha]\n"
      "name = \"he said \\\"hi\\\"\\n\"  # trailing comment\n"
      "count = 42\n"
      "ratio = -2.5e-2\n"
      "flag = true\n"
      "off = false\n"
      "ids = [1, 2, 3]\n"
      "mixed_ws\t = \t 7\n"
      "empty = []\n"
      "\n"
      "[beta]\n"
      "count = 1\n";
  auto table = ddss::parse_toml(text);
  REQUIRE(table.size() == 2);
  const auto& a = table.at("alpha");
  CHECK(a.at("name").s == "he said \"hi\"\n");
  CHECK(a.at("count").i == 42);
  CHECK(a.at("ratio").f == doctest::Approx(-0.025).epsilon(1e-15));
  CHECK(a.at("flag").b == true);
  CHECK(a.at("off").b == false);
  REQUIRE(a.at("ids").items.size() == 3);
  CHECK(a.at("ids").items[2].i == 3);
  CHECK(a.at("empty").items.empty());
  CHECK(a.at("mixed_ws").i == 7);
  CHECK(table.at("beta").at("count").i == 1);
  CHECK(a.at("count").as_number() == 42.0);
  CHECK(a.at("ratio").as_number() == doctest::Approx(-0.025));
  CHECK_THROWS_AS(a.at("name").as_number(), ddss::ConfigError);
}

TEST_CASE("strict config text: rejected forms name the offending line") {
  expect_config_error("[s]\nk = 1\nk = 2\n", "line 3");
  expect_config_error("[s]\nk = 1\nk = 2\n", "duplicate key 'k'");
  expect_config_error("[s]\n[s]\n", "duplicate section");
  expect_config_error("k = 1\n", "before any [section]");
  expect_config_error("[s]\nk = 1 2\n", "trailing characters");
  expect_config_error("[s]\nk = \"a\\qb\"\n", "unsupported escape");
  expect_config_error("[s]\nk = \"open\n", "unterminated string");
  expect_config_error("[s]\nk = [1, 2\n", "unterminated array");
  expect_config_error("[s]\nk = [1 2]\n", "expected ',' or ']'");
  expect_config_error("[s]\nk = 1.2.3\n", "malformed float");
  expect_config_error("[s]\nk = +\n", "malformed number");
  expect_config_error("[s]\nk = maybe\n", "unrecognized value");
  expect_config_error("[s]\nk =\n", "missing value");
  expect_config_error("[bad name]\nk = 1\n", "bad section name");
  expect_config_error("[s\nk = 1\n", "malformed section header");
  expect_config_error("[s]\nbad key = 1\n", "bad key");
  expect_config_error("[s]\nnovalue\n", "expected 'key = value'");
}

TEST_CASE("run config: defaults, overrides, and unknown names") {
  auto defaults = ddss::RunConfig::from_toml(ddss::parse_toml(""));
  CHECK(defaults.schedule.T == 128);
  CHECK(defaults.search.K == 5);
  CHECK(defaults.search.kernel == "linear");
  CHECK(defaults.out.dir == "out");

  auto c = ddss::RunConfig::from_toml(
      ddss::parse_toml("[search]\nK = 7\nkernel = \"cubic\"\ntime = true\n"
                       "[schedule]\nkind = \"linear_beta\"\nT = 64\n"));
  CHECK(c.search.K == 7);
  CHECK(c.search.kernel == "cubic");
  CHECK(c.search.time == true);
  CHECK(c.schedule.kind == "linear_beta");
  CHECK(c.schedule.T == 64);
  CHECK(c.search.n == 512);  // untouched defaults survive

  try {
    ddss::RunConfig::from_toml(ddss::parse_toml("[search]\nfrobnicate = 1\n"));
    FAIL_CHECK("expected unknown-key rejection");
  } catch (const ddss::ConfigError& e) {
    CHECK(std::string(e.what()).find("frobnicate") != std::string::npos);
    CHECK(std::string(e.what()).find("[search]") != std::string::npos);
  }
  try {
    ddss::RunConfig::from_toml(ddss::parse_toml("[warp]\nspeed = 9\n"));
    FAIL_CHECK("expected unknown-section rejection");
  } catch (const ddss::ConfigError& e) {
    CHECK(std::string(e.what()).find("[warp]") != std::string::npos);
  }

  CHECK_THROWS_AS(ddss::RunConfig::from_toml(ddss::parse_toml("[search]\nrff_dim = 7\n")),
                  ddss::ConfigError);
  CHECK_THROWS_AS(ddss::RunConfig::from_toml(ddss::parse_toml("[search]\nfamily = \"vae\"\n")),
                  ddss::ConfigError);
  CHECK_THROWS_AS(
      ddss::RunConfig::from_toml(ddss::parse_toml("[sample]\nsampler = \"searched\"\n")),
      ddss::ConfigError);
  CHECK_THROWS_AS(
      ddss::RunConfig::from_toml(ddss::parse_toml("[dataset]\nkind = \"csv\"\n")),
      ddss::ConfigError);
  CHECK_THROWS_AS(ddss::RunConfig::from_toml(ddss::parse_toml("[search]\nK = 0\n")),
                  ddss::ConfigError);
}

TEST_CASE("run config: resolution is a byte-stable fixed point") {
  auto c = ddss::RunConfig::from_toml(
      ddss::parse_toml("[search]\nK = 9\n[eval]\nseeds = [4, 5]\nsamplers = [\"ddpm\"]\n"));
  const std::string text = c.resolved_toml();
  auto again = ddss::RunConfig::from_toml(ddss::parse_toml(text));
  CHECK(again.resolved_toml() == text);
  CHECK(again.config_hash() == c.config_hash());
  CHECK(again.search.K == 9);
  REQUIRE(again.eval.seeds.size() == 2);
  CHECK(again.eval.seeds[1] == 5);
  REQUIRE(again.eval.samplers.size() == 1);

  auto other = ddss::RunConfig::from_toml(ddss::parse_toml("[search]\nK = 10\n"));
  CHECK(other.config_hash() != c.config_hash());

  TempFile f("cfg_tmp.toml");
  ddss::write_text_file(f.path, text);
  auto loaded = ddss::RunConfig::load(f.path);
  CHECK(loaded.resolved_toml() == text);
  CHECK_THROWS_AS(ddss::RunConfig::load("missing_config.toml"), ddss::IoError);
}

TEST_CASE("csv and text helpers round trip") {
  TempFile f("table_tmp.csv");
  std::vector<std::vector<std::string>> rows = {{"a", "1", "2.5"}, {"b", "-3", "0.125"}};
  ddss::write_csv(f.path, "name,count,x", rows);
  auto back = ddss::read_csv(f.path);
  REQUIRE(back.size() == 3);
  CHECK(back[0] == std::vector<std::string>{"name", "count", "x"});
  CHECK(back[1] == rows[0]);
  CHECK(back[2] == rows[1]);

  CHECK_THROWS_AS(ddss::read_csv("missing_table.csv"), ddss::IoError);
  ddss::write_text_file(f.path, "");
  CHECK_THROWS_AS(ddss::read_csv(f.path), ddss::IoError);
  CHECK_THROWS_AS(ddss::read_text_file("missing_text.txt"), ddss::IoError);

  const std::string text = "line one\nline two\n";
  ddss::write_text_file(f.path, text);
  CHECK(ddss::read_text_file(f.path) == text);

  for (double x : {0.1, 1.0 / 3.0, -2.5e-2, 1e300, 1e-300, 3.141592653589793,
                   4.9406564584124654e-324, -0.0, 42.0}) {
    const std::string s = ddss::fmt_g17(x);
    const double back_x = std::strtod(s.c_str(), nullptr);
    CHECK(std::memcmp(&back_x, &x, sizeof x) == 0);
  }
}
