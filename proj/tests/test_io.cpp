#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "npglm/data.hpp"
#include "npglm/errors.hpp"
#include "npglm/gibbs.hpp"
#include "npglm/io.hpp"
#include "npglm/model.hpp"
#include "npglm/sha256.hpp"

using namespace npglm;

namespace {

RawRow row(int y, long long group, double age, int level, int x3) {
  RawRow r;
  r.y = y;
  r.group = group;
  r.age = age;
  r.level = level;
  r.factor_codes = {x3};
  return r;
}

Dataset small_panel() {
  // The x3 code mixes group and age so the quadratic-curve design stays
  // full rank.
  std::vector<RawRow> rows;
  int i = 0;
  for (int g = 1; g <= 3; ++g)
    for (int k = 0; k < 3; ++k)
      for (int t = 20; t <= 22; ++t, ++i)
        rows.push_back(row((i * 7 % 5) < 2, g, t, k, (g + t) % 3));
  return build_dataset(rows, {known_factors().back()});
}

PosteriorDraws tiny_run(InterceptMode im, FunctionalMode fm) {
  ModelSpec spec;
  spec.intercepts = im;
  spec.functional = fm;
  ChainConfig cfg;
  cfg.iterations = 12;
  cfg.burnin = 4;
  cfg.thin = 2;
  cfg.seed = 77;
  return run_chain(small_panel(), spec, cfg);
}

}  // namespace

TEST_CASE("printed doubles read back bit-for-bit", "[io]") {
  const std::vector<double> cases = {
      1.0 / 3.0, 0.1,  -0.0, 2.2250738585072014e-308, 1.7976931348623157e308,
      3.141592653589793, 1e-300, -123456.789, 5.0, 0.0};
  for (double v : cases) {
    const double back = parse_double(format_double(v), "test");
    REQUIRE(std::memcmp(&back, &v, sizeof v) == 0);
  }
}

TEST_CASE("token parsers reject junk with context", "[io]") {
  REQUIRE(parse_int("-42", "t") == -42);
  REQUIRE(parse_double("1e3", "t") == 1000.0);
  REQUIRE_THROWS_AS(parse_double("abc", "t"), FormatError);
  REQUIRE_THROWS_AS(parse_double("1.5x", "t"), FormatError);
  REQUIRE_THROWS_AS(parse_double("", "t"), FormatError);
  REQUIRE_THROWS_AS(parse_int("3.5", "t"), FormatError);
  REQUIRE_THROWS_AS(parse_int("99999999999999999999999", "t"), FormatError);
  REQUIRE_THROWS_WITH(parse_double("abc", "row 4"),
                      Catch::Matchers::ContainsSubstring("row 4"));
}

TEST_CASE("observation files accept a factor subset and flag strangers", "[io]") {
  const std::string text =
      "y,state,age,child,area,mystery\n"
      "1,5,20,0,0,9\n"
      "0,5,21.4,2,1,9\n";
  const ParsedData pd = parse_data_csv(text);
  REQUIRE(pd.rows.size() == 2u);
  REQUIRE(pd.factors.size() == 1u);
  REQUIRE(pd.factors[0].name == "area");
  REQUIRE(pd.warnings.size() == 1u);
  REQUIRE(pd.warnings[0].find("mystery") != std::string::npos);
  REQUIRE(pd.rows[1].age == 21.4);
  REQUIRE(pd.rows[1].factor_codes == std::vector<int>{1});
}

TEST_CASE("observation files fail loudly on structural problems", "[io]") {
  REQUIRE_THROWS_AS(parse_data_csv(""), SchemaError);
  REQUIRE_THROWS_AS(parse_data_csv("y,state,age\n1,2,3\n"), SchemaError);
  // Second data row (file line 3) has a missing field.
  REQUIRE_THROWS_WITH(
      parse_data_csv("y,state,age,child\n1,1,20,0\n1,1,20\n"),
      Catch::Matchers::ContainsSubstring("row 3"));
  // Non-numeric response on the first data row.
  REQUIRE_THROWS_AS(parse_data_csv("y,state,age,child\nyes,1,20,0\n"), SchemaError);
  REQUIRE_THROWS_WITH(
      parse_data_csv("y,state,age,child\nyes,1,20,0\n"),
      Catch::Matchers::ContainsSubstring("row 2"));
}

TEST_CASE("datasets survive a write and re-read", "[io]") {
  const Dataset ds = small_panel();
  const std::string csv = data_to_csv(ds);
  const ParsedData pd = parse_data_csv(csv);
  REQUIRE(pd.warnings.empty());
  const Dataset back = build_dataset(pd.rows, pd.factors);
  REQUIRE(back.n == ds.n);
  REQUIRE(back.group_labels == ds.group_labels);
  REQUIRE(back.beta_names == ds.beta_names);
  REQUIRE((back.y - ds.y).cwiseAbs().maxCoeff() == 0);
  REQUIRE((back.age - ds.age).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.x - ds.x).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.cell - ds.cell).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("key-value files round trip and reject malformed lines", "[io]") {
  const std::vector<std::pair<std::string, std::string>> kv = {
      {"iterations", "5000"}, {"kappa", "0.02"}, {"note", "a=b"}};
  const auto back = parse_keyvalue(render_keyvalue(kv));
  REQUIRE(back == kv);

  const auto parsed = parse_keyvalue("# comment\n\n  key =  spaced value \n");
  REQUIRE(parsed.size() == 1u);
  REQUIRE(parsed[0].first == "key");
  REQUIRE(parsed[0].second == "spaced value");

  REQUIRE_THROWS_AS(parse_keyvalue("just words\n"), FormatError);
  REQUIRE_THROWS_AS(parse_keyvalue("= value\n"), FormatError);
  REQUIRE_THROWS_WITH(parse_keyvalue("ok = 1\nbad line\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
}

TEST_CASE("draws files round trip byte-for-byte", "[io]") {
  const std::vector<std::pair<InterceptMode, FunctionalMode>> combos = {
      {InterceptMode::dp, FunctionalMode::gp},
      {InterceptMode::gaussian, FunctionalMode::parabolic},
      {InterceptMode::none, FunctionalMode::none}};
  for (const auto& [im, fm] : combos) {
    PosteriorDraws d = tiny_run(im, fm);
    d.data_digest = sha256_hex("demo");
    const std::string text = render_draws(d);
    const PosteriorDraws back = parse_draws(text);
    REQUIRE(render_draws(back) == text);
    REQUIRE(back.intercepts == d.intercepts);
    REQUIRE(back.functional == d.functional);
    REQUIRE(back.truncation == d.truncation);
    REQUIRE(back.kept() == d.kept());
    REQUIRE(back.iteration == d.iteration);
    REQUIRE(back.config.seed == d.config.seed);
    REQUIRE(back.data_digest == d.data_digest);
    for (int r = 0; r < d.kept(); ++r) {
      REQUIRE((back.beta[r] - d.beta[r]).cwiseAbs().maxCoeff() == 0.0);
      if (im != InterceptMode::none) REQUIRE(back.sigma_inv[r] == d.sigma_inv[r]);
      if (im == InterceptMode::dp) REQUIRE(back.alpha[r] == d.alpha[r]);
      if (fm != FunctionalMode::none)
        for (int k = 0; k < kNumLevels; ++k)
          REQUIRE((back.f[r][k] - d.f[r][k]).cwiseAbs().maxCoeff() == 0.0);
      if (im == InterceptMode::dp) {
        REQUIRE((back.atoms[r] - d.atoms[r]).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((back.sticks[r] - d.sticks[r]).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((back.assign[r] - d.assign[r]).cwiseAbs().maxCoeff() == 0);
      } else if (im == InterceptMode::gaussian) {
        REQUIRE((back.mu[r] - d.mu[r]).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
}

TEST_CASE("draws parser refuses corrupted files", "[io]") {
  PosteriorDraws d = tiny_run(InterceptMode::dp, FunctionalMode::gp);
  const std::string good = render_draws(d);

  REQUIRE_THROWS_AS(parse_draws("not a draws file\n"), FormatError);
  REQUIRE_THROWS_AS(parse_draws(""), FormatError);

  // Drop a required header key.
  std::string no_kappa = good;
  const auto kpos = no_kappa.find("# kappa");
  no_kappa.erase(kpos, no_kappa.find('\n', kpos) - kpos + 1);
  REQUIRE_THROWS_WITH(parse_draws(no_kappa),
                      Catch::Matchers::ContainsSubstring("kappa"));

  // Tamper with the column header.
  std::string bad_cols = good;
  const auto cpos = bad_cols.find("iter,beta.");
  bad_cols.replace(cpos, 4, "itrr");
  REQUIRE_THROWS_AS(parse_draws(bad_cols), FormatError);

  // Truncate the last record.
  std::string short_rec = good;
  while (short_rec.back() == '\n') short_rec.pop_back();
  short_rec.erase(short_rec.rfind(','));
  REQUIRE_THROWS_WITH(parse_draws(short_rec),
                      Catch::Matchers::ContainsSubstring("record"));

  // A cluster label outside the truncation bound.
  std::string bad_label = good;
  const auto spos = bad_label.find(",S.1,");
  REQUIRE(spos != std::string::npos);
  // Find the matching field in the first record: count commas up to S.1.
  const std::string header_line = good.substr(good.rfind('\n', spos) + 1,
                                              good.find('\n', spos) - good.rfind('\n', spos) - 1);
  const std::vector<std::string> cols = split(header_line, ',');
  std::size_t s_col = 0;
  while (cols[s_col] != "S.1") ++s_col;
  std::size_t rec_start = good.find('\n', spos) + 1;
  std::size_t field_start = rec_start;
  for (std::size_t c = 0; c < s_col; ++c) field_start = good.find(',', field_start) + 1;
  std::string bad = good.substr(0, field_start) + "99" +
                    good.substr(good.find(',', field_start));
  REQUIRE_THROWS_WITH(parse_draws(bad),
                      Catch::Matchers::ContainsSubstring("truncation"));
}

TEST_CASE("digests match the published test vectors", "[io]") {
  REQUIRE(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  REQUIRE(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  REQUIRE(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");

  const std::string million(1000000, 'a');
  const std::string want =
      "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0";
  REQUIRE(sha256_hex(million) == want);

  // Chunked updates must agree with the one-shot digest.
  Sha256 h;
  for (std::size_t off = 0; off < million.size(); off += 64 * 1024)
    h.update(million.data() + off, std::min<std::size_t>(64 * 1024, million.size() - off));
  REQUIRE(h.hex_digest() == want);
  h.reset();
  h.update(std::string("abc"));
  REQUIRE(h.hex_digest() ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("file helpers report path problems", "[io]") {
  REQUIRE_THROWS_AS(read_text_file("/nonexistent/nowhere.txt"), IoError);
  REQUIRE_THROWS_AS(write_text_file("/nonexistent/nowhere.txt", "x"), IoError);
}
