#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "ssl_lab/augment.hpp"

using namespace ssl_lab;

namespace {

SynonymLexicon demo_lexicon() {
  std::istringstream in("prost\tnatang,idiot\nbun\tgrozav\nfrumos\tminunat\n");
  return parse_synonyms(in);
}

std::string twenty_tokens() {
  return "azi a fost un meci bun si frumos dar arbitrul a fost prost iar publicul a plecat acasa foarte trist";
}

// Mean of max(l, 1-l) for l ~ Beta(a, a). Substituting t = (1-x)^a removes
// the endpoint singularity: E = 2 / (a B(a,a)) * int_0^{0.5^a} (1 - t^{1/a})^a dt.
double beta_max_mean(double a) {
  const double beta = std::exp(2 * std::lgamma(a) - std::lgamma(2 * a));
  const double upper = std::pow(0.5, a);
  const int n = 20000;
  const double h = upper / n;
  auto f = [&](double t) { return std::pow(1.0 - std::pow(t, 1.0 / a), a); };
  double s = f(0.0) + f(upper);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return 2.0 / (a * beta) * s * h / 3.0;
}

}  // namespace

TEST(Spec, Validation) {
  AugmenterSpec s;
  EXPECT_NO_THROW(s.validate());
  s.sigma_weak = 0.5;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.eda_alpha = 1.0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.kind = AugmentKind::Cache;
  EXPECT_THROW(s.validate(), Error);
  EXPECT_EQ(parse_augment_kind("manifold_mixup"), AugmentKind::ManifoldMixup);
  EXPECT_THROW(parse_augment_kind("t5"), Error);
}

TEST(Synonyms, ParseNormalizesAndDropsSelfMaps) {
  std::istringstream in("Prost\tnătâng,prost, idiot\n\nbun\tbun\n");
  SynonymLexicon lex = parse_synonyms(in);
  ASSERT_NE(lex.synonyms("prost"), nullptr);
  EXPECT_EQ(*lex.synonyms("prost"), (std::vector<std::string>{"natang", "idiot"}));
  EXPECT_EQ(lex.synonyms("bun"), nullptr);
  std::istringstream bad("no tab here\n");
  EXPECT_THROW(parse_synonyms(bad), Error);
}

TEST(Eda, IntensityRule) {
  EXPECT_EQ(eda_intensity(0.1, 20), 2u);
  EXPECT_EQ(eda_intensity(0.1, 3), 1u);
  EXPECT_EQ(eda_intensity(0.1, 25), 3u);
  EXPECT_EQ(eda_intensity(0.3, 1), 1u);
}

TEST(Eda, TwentyTokensGiveTwoEditsAndFourVariants) {
  const auto lex = demo_lexicon();
  const std::string s = twenty_tokens();
  ASSERT_EQ(text::tokenize(s).size(), 20u);
  Rng rng(3);
  std::array<int, 4> seen{};
  for (int rep = 0; rep < 200; ++rep) {
    auto vs = eda_augment_detailed(s, lex, 0.1, 4, rng);
    ASSERT_EQ(vs.size(), 4u);
    for (const auto& v : vs) {
      ++seen[static_cast<int>(v.op)];
      EXPECT_EQ(v.intensity, 2u);
      EXPECT_FALSE(v.text.empty());
      const std::size_t len = text::tokenize(v.text).size();
      if (v.op == EdaOp::RandomDeletion) {
        EXPECT_EQ(len, 20u - v.edits);
      } else {
        EXPECT_EQ(v.edits, 2u) << eda_op_name(v.op);
        EXPECT_EQ(len, v.op == EdaOp::RandomInsertion ? 22u : 20u);
      }
    }
  }
  for (int c : seen) EXPECT_GT(c, 100);
}

TEST(Eda, DeletionRemovesAlphaFractionOnAverage) {
  SynonymLexicon empty;
  const auto tokens = text::tokenize(twenty_tokens());
  Rng rng(5);
  double total = 0.0;
  const int reps = 20000;
  for (int i = 0; i < reps; ++i) total += static_cast<double>(eda_apply(tokens, EdaOp::RandomDeletion, 0.1, empty, rng).edits);
  EXPECT_NEAR(total / reps, 2.0, 0.05);
}

TEST(Eda, SwapPreservesMultiset) {
  const auto tokens = text::tokenize(twenty_tokens());
  Rng rng(1);
  auto v = eda_apply(tokens, EdaOp::RandomSwap, 0.1, {}, rng);
  auto got = text::tokenize(v.text);
  auto a = tokens;
  std::sort(a.begin(), a.end());
  std::sort(got.begin(), got.end());
  EXPECT_EQ(a, got);
}

TEST(Eda, OneTokenSentenceSurvivesDeletion) {
  Rng rng(0);
  for (int rep = 0; rep < 100; ++rep) {
    auto v = eda_apply({"nasol"}, EdaOp::RandomDeletion, 0.9, {}, rng);
    EXPECT_EQ(v.text, "nasol");
  }
  for (int rep = 0; rep < 200; ++rep) {
    auto v = eda_apply({"a", "b"}, EdaOp::RandomDeletion, 0.9, {}, rng);
    EXPECT_FALSE(v.text.empty());
  }
}

TEST(Eda, EmptyLexiconDrawsOnlySwapAndDeletion) {
  Rng rng(8);
  for (int rep = 0; rep < 200; ++rep)
    for (const auto& v : eda_augment_detailed(twenty_tokens(), {}, 0.1, 4, rng))
      EXPECT_TRUE(v.op == EdaOp::RandomSwap || v.op == EdaOp::RandomDeletion);
}

TEST(Eda, DeterministicUnderSeedAndRejectsEmpty) {
  const auto lex = demo_lexicon();
  Rng a(42), b(42);
  EXPECT_EQ(eda_augment(twenty_tokens(), lex, 0.1, 4, a), eda_augment(twenty_tokens(), lex, 0.1, 4, b));
  EXPECT_THROW(eda_augment("   ", lex, 0.1, 4, a), Error);
}

TEST(Mixup, RangeAndMoments) {
  Rng rng(11);
  const int n = 100000;
  double mean = 0.0, raw_mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const double l = sample_mixup(0.3, rng);
    ASSERT_GE(l, 0.5);
    ASSERT_LE(l, 1.0);
    mean += l;
    raw_mean += sample_beta(0.3, 0.3, rng);
  }
  mean /= n;
  raw_mean /= n;
  const double analytic = beta_max_mean(0.3);
  EXPECT_NEAR(mean / analytic, 1.0, 0.01);
  EXPECT_NEAR(raw_mean, 0.5, 0.01);
  EXPECT_THROW(sample_mixup(0.0, rng), Error);
}

TEST(Mixup, IntegrationOracleSanity) {
  // Beta(1,1) is uniform, so E[max] = 3/4.
  EXPECT_NEAR(beta_max_mean(1.0), 0.75, 1e-9);
  // sqrt-type endpoint behaviour limits Simpson accuracy here
  EXPECT_NEAR(beta_max_mean(2.0), 0.5 + 3.0 / 16.0, 1e-6);
}

TEST(Cache, VariantSchemaAndLookup) {
  std::istringstream in("{\"id\":7,\"variants\":[\"a\",\"b\"]}\n{\"id\":9,\"variants\":[\"c\"]}\n");
  AugmentCache c = parse_cache(in, AugmentMode::Paraphrase);
  EXPECT_EQ(c.lookup(7), (std::vector<std::string>{"a", "b"}));
  try {
    c.lookup(8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingAugmentation);
  }
}

TEST(Cache, GenerateSchema) {
  std::istringstream in("{\"text\":\"t\",\"label\":\"INSULT\"}\n");
  AugmentCache c = parse_cache(in, AugmentMode::Generate);
  ASSERT_EQ(c.generated.size(), 1u);
  EXPECT_EQ(c.generated[0], (GeneratedSample{"t", ClassLabel::Insult}));
  std::istringstream bad("{\"text\":\"t\",\"label\":\"SPAM\"}\n");
  EXPECT_THROW(parse_cache(bad, AugmentMode::Generate), Error);
  std::istringstream malformed("{\"id\":1,\"variants\":[]}\n");
  EXPECT_THROW(parse_cache(malformed, AugmentMode::Backtranslate), Error);
}

TEST(Cache, RoundTrip) {
  AugmentCache c;
  c.mode = AugmentMode::Backtranslate;
  c.variants[3] = {"unu", "doi, \"trei\""};
  c.variants[-1] = {"ăîș"};
  std::stringstream io;
  write_cache(io, c);
  EXPECT_EQ(parse_cache(io, AugmentMode::Backtranslate), c);

  AugmentCache g;
  g.mode = AugmentMode::Generate;
  g.generated = {{"x", ClassLabel::Other}, {"y", ClassLabel::Profanity}};
  std::stringstream gio;
  write_cache(gio, g);
  EXPECT_EQ(parse_cache(gio, AugmentMode::Generate), g);
}

class HttpAugmenter : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/augment", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      auto j = nlohmann::json::parse(req.body);
      nlohmann::json variants = nlohmann::json::array();
      for (const auto& t : j["texts"]) variants.push_back({t.get<std::string>() + " v1", j["mode"].get<std::string>()});
      res.set_content(nlohmann::json{{"variants", variants}}.dump(), "application/json");
    });
    server_.Post("/broken", [this](const httplib::Request&, httplib::Response& res) {
      ++hits_;
      res.status = 503;
    });
    server_.Post("/short", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"variants\":[[\"only\"]]}", "application/json");
    });
    server_.Post("/slow", [this](const httplib::Request&, httplib::Response& res) {
      ++hits_;
      std::this_thread::sleep_for(std::chrono::milliseconds(600));
      res.set_content("{\"variants\":[[\"late\"]]}", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  std::string url(const std::string& path = "") const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
};

TEST_F(HttpAugmenter, AlignedVariants) {
  auto out = fetch_http(url(), {"ce zi", "hai acasa"}, AugmentMode::Backtranslate);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (std::vector<std::string>{"ce zi v1", "backtranslate"}));
  EXPECT_EQ(out[1][0], "hai acasa v1");
}

TEST_F(HttpAugmenter, EmptyInputSendsNothing) {
  EXPECT_TRUE(fetch_http(url(), {}, AugmentMode::Paraphrase).empty());
  EXPECT_EQ(hits_.load(), 0);
}

TEST_F(HttpAugmenter, NonOkStatusIsReported) {
  try {
    fetch_http(url("/broken"), {"x"}, AugmentMode::Paraphrase);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Http);
    EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
  }
}

TEST_F(HttpAugmenter, MisalignedResponseIsRejected) {
  EXPECT_THROW(fetch_http(url("/short"), {"a", "b"}, AugmentMode::Paraphrase), Error);
}

TEST_F(HttpAugmenter, TimeoutRetriesThenFails) {
  HttpOptions opts{0.2, 2};
  try {
    fetch_http(url("/slow"), {"a"}, AugmentMode::Paraphrase, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Http);
  }
  EXPECT_EQ(hits_.load(), 3);
}

TEST_F(HttpAugmenter, ResponsePersistsAsCache) {
  std::vector<RawRecord> recs{{4, "salut", ClassLabel::Other}, {6, "pa", ClassLabel::Abuse}};
  AugmentCache c = fetch_http_cache(url(), recs, AugmentMode::Paraphrase);
  std::stringstream io;
  write_cache(io, c);
  AugmentCache back = parse_cache(io, AugmentMode::Paraphrase);
  EXPECT_EQ(back.lookup(6)[0], "pa v1");
  EXPECT_EQ(back, c);
}
