#include <doctest.h>

#include <random>

#include "support.hpp"

using namespace wmtrace;

namespace {

VocabularyPtr ab_vocab() { return std::make_shared<const Vocabulary>(std::vector<std::string>{"a", "b"}); }

Corpus text_corpus(const VocabularyPtr& vocab, std::vector<std::string> lines) {
  return Corpus::from_text(vocab, lines);
}

TokenSequence ids(std::initializer_list<TokenId> v) { return TokenSequence(v); }

}  // namespace

TEST_CASE("unigram closed form") {
  const double alpha = 0.1;
  const auto model = train_ngram(text_corpus(ab_vocab(), {"a b a"}), 1, alpha);
  // Vocabulary is {a, b, <unk>}: V = 3, N = 3.
  const double denom = 3.0 + 3.0 * alpha;
  for (const auto& ctx : {ids({}), ids({0}), ids({1, 0, 1})}) {
    const ProbVector p = model.next_distribution(ctx);
    CHECK(p(0) == doctest::Approx((2.0 + alpha) / denom).epsilon(1e-15));
    CHECK(p(1) == doctest::Approx((1.0 + alpha) / denom).epsilon(1e-15));
    CHECK(p(2) == doctest::Approx(alpha / denom).epsilon(1e-15));
  }
  CHECK_THROWS_AS(train_ngram(Corpus(ab_vocab(), {}), 1), Error);
  CHECK_THROWS_AS(train_ngram(text_corpus(ab_vocab(), {"a"}), 0), Error);
  CHECK_THROWS_AS(train_ngram(text_corpus(ab_vocab(), {"a"}), 1, 0.0), Error);
}

TEST_CASE("bigram puts most mass on the only observed successor") {
  const auto model = train_ngram(text_corpus(ab_vocab(), {"a b a b"}), 2);
  const ProbVector p = model.next_distribution(ids({0}));
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  CHECK(best == 1);
  // Observed successor scores 1; others back off at 0.4 x unigram.
  const ProbVector uni = model.next_distribution(ids({}));
  const double z = 1.0 + kBackoffFactor * (uni(0) + uni(2));
  CHECK(p(1) == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK(p(0) == doctest::Approx(kBackoffFactor * uni(0) / z).epsilon(1e-14));
}

TEST_CASE("unseen trigram context backs off to the bigram distribution") {
  const auto model = train_ngram(text_corpus(ab_vocab(), {"a b a b b a"}), 3);
  // Context (b, b) is seen; (a, a) is not, so P(.|a a) = P(.|a).
  CHECK(model.context_total(ids({0, 0})) == 0);
  CHECK(model.next_distribution(ids({0, 0})) == model.next_distribution(ids({0})));
  // Unseen at every level falls all the way to the unigram.
  CHECK(model.next_distribution(ids({2, 2})) == model.next_distribution(ids({})));
  // Contexts longer than order-1 are truncated to the trailing window.
  CHECK(model.next_distribution(ids({1, 1, 0, 1})) == model.next_distribution(ids({0, 1})));
}

TEST_CASE("next_distribution is normalized and strictly positive everywhere") {
  std::mt19937_64 gen(17);
  auto vocab = testing::numbered_vocabulary(12);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<TokenSequence> docs(3);
    for (auto& d : docs) {
      for (int i = 0; i < 40; ++i) d.push_back(static_cast<TokenId>(gen() % 6));
    }
    const int order = 1 + static_cast<int>(gen() % 4);
    const auto model = train_ngram(Corpus(vocab, docs), order, 0.05);
    for (int probe = 0; probe < 50; ++probe) {
      TokenSequence ctx;
      for (std::size_t k = gen() % 5; k > 0; --k) ctx.push_back(static_cast<TokenId>(gen() % 12));
      const ProbVector p = model.next_distribution(ctx);
      CHECK(std::abs(p.sum() - 1.0) < 1e-9);
      CHECK(p.minCoeff() > 0.0);
    }
  }
}

TEST_CASE("watermarked model reweights the base distribution") {
  auto vocab = std::make_shared<const Vocabulary>(std::vector<std::string>{"a", "<unk>"});
  auto base = testing::uniform_unigram(vocab);
  const WatermarkedModel identity = identity_watermark(base);
  CHECK(identity.next_distribution({}) == base->next_distribution({}));

  ProbVector ratio(2);
  ratio << 1.2, 0.8;
  const WatermarkedModel wm(base, std::make_shared<const ReweightTable>(vocab, ratio, kDefaultFloorEpsilon));
  const ProbVector p = wm.next_distribution({});
  CHECK(p(0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p(1) == doctest::Approx(0.4).epsilon(1e-15));

  auto other = testing::numbered_vocabulary(2);
  CHECK_THROWS_AS(WatermarkedModel(base, std::make_shared<const ReweightTable>(other, ratio, 1e-8)), Error);
}

TEST_CASE("per-step KL of the watermark is bounded by the largest log ratio") {
  std::mt19937_64 gen(23);
  auto vocab = testing::numbered_vocabulary(20);
  std::vector<TokenSequence> docs(5);
  for (auto& d : docs) {
    for (int i = 0; i < 200; ++i) d.push_back(static_cast<TokenId>(gen() % 20));
  }
  auto base = std::make_shared<const NGramModel>(train_ngram(Corpus(vocab, docs), 3));
  std::uniform_real_distribution<double> r(0.3, 3.0);
  for (int t = 0; t < 20; ++t) {
    ProbVector ratio(20);
    for (Eigen::Index i = 0; i < 20; ++i) ratio(i) = r(gen);
    const WatermarkedModel wm(base, std::make_shared<const ReweightTable>(vocab, ratio, 1e-8));
    const double bound = wm.reweight_table().max_abs_log_ratio();
    for (int probe = 0; probe < 50; ++probe) {
      const TokenSequence ctx{static_cast<TokenId>(gen() % 20), static_cast<TokenId>(gen() % 20)};
      CHECK(kl_divergence(wm.next_distribution(ctx), base->next_distribution(ctx)) <= bound + 1e-12);
    }
  }
}

TEST_CASE("generation is seeded and honors its length contract") {
  const auto bundle = testing::uniform_bundle(30, 0.005, 4);
  const auto wm = bundle.model();
  const auto a = generate(wm, GenerationConfig(200, 99));
  const auto b = generate(wm, GenerationConfig(200, 99));
  CHECK(a == b);
  CHECK(a.size() == 200);
  CHECK(generate(wm, GenerationConfig(200, 100)) != a);
  CHECK(generate(wm, GenerationConfig(1, 5)).size() == 1);
  CHECK_THROWS_AS(GenerationConfig(0, 1), Error);

  const TokenId stop = a[10];
  const auto stopped = generate(wm, GenerationConfig(200, 99, stop));
  CHECK(stopped.back() == stop);
  CHECK(stopped.size() <= 11);
  CHECK(std::equal(stopped.begin(), stopped.end(), a.begin()));

  // The prompt conditions a bigram model but is not echoed back.
  auto vocab = ab_vocab();
  const auto bigram = train_ngram(text_corpus(vocab, {"a b a b a b"}), 2);
  const TokenSequence prompt{0};
  CHECK(generate(bigram, GenerationConfig(5, 1), prompt).size() == 5);
}

TEST_CASE("unigram watermarked generation reproduces the noised frequency") {
  const auto bundle = testing::uniform_bundle(100, 0.002, 8);
  const auto wm = bundle.model();
  const auto tokens = generate(wm, GenerationConfig(100000, 31));
  const auto empirical = estimate_frequency(Corpus(wm.vocabulary(), {tokens}));
  CHECK((empirical.freq() - bundle.noised().noised()).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("model_frequency of a unigram model is its own distribution") {
  auto vocab = testing::numbered_vocabulary(5);
  const auto model = testing::unigram_from_counts(vocab, {5, 3, 1, 1, 0});
  const auto f = model_frequency(*model, Corpus(vocab, {{0, 1, 2}, {3, 3}}));
  CHECK((f.freq() - model->next_distribution({})).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("model_frequency averages bigram distributions over corpus positions") {
  auto vocab = ab_vocab();
  const auto model = train_ngram(text_corpus(vocab, {"a b b a b"}), 2);
  const Corpus data = text_corpus(vocab, {"a b", "b"});
  // Positions: (doc0, ctx {}), (doc0, ctx {a}), (doc1, ctx {}).
  const ProbVector expected =
      (2.0 * model.next_distribution(ids({})) + model.next_distribution(ids({0}))) / 3.0;
  CHECK((model_frequency(model, data).freq() - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("model serialization round-trips") {
  std::mt19937_64 gen(8);
  auto vocab = testing::numbered_vocabulary(10);
  std::vector<TokenSequence> docs(4);
  for (auto& d : docs) {
    for (int i = 0; i < 60; ++i) d.push_back(static_cast<TokenId>(gen() % 10));
  }
  const auto model = train_ngram(Corpus(vocab, docs), 3, 0.25);
  const auto j = model.to_json();
  CHECK(j.at("version") == 1);
  CHECK(j.at("order") == 3);
  CHECK(j.at("counts").contains(""));
  const auto back = NGramModel::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(j.dump() == train_ngram(Corpus(vocab, docs), 3, 0.25).to_json().dump());
  for (int probe = 0; probe < 200; ++probe) {
    TokenSequence ctx;
    for (std::size_t k = gen() % 4; k > 0; --k) ctx.push_back(static_cast<TokenId>(gen() % 10));
    CHECK(back.next_distribution(ctx) == model.next_distribution(ctx));
  }
  auto broken = j;
  broken["counts"]["t00"]["nope"] = 1;
  CHECK_THROWS_AS(NGramModel::from_json(broken), Error);
}

TEST_CASE("simulate_extraction: a unigram student learns the noised frequency") {
  const auto bundle = testing::uniform_bundle(100, 0.002, 8);
  const auto teacher = bundle.model();
  const auto student = simulate_extraction(teacher, 1, 500000, GenerationConfig(1000, 77));
  const double kl = kl_divergence(bundle.noised().noised(), student.next_distribution({}));
  // Golden value from this fixed seed; the bound is the contract.
  CHECK(kl < 0.005);
  CHECK(kl == doctest::Approx(WMTRACE_GOLDEN_STUDENT_KL).epsilon(1e-9));
  CHECK(student.context_total({}) == 500000);

  CHECK_THROWS_AS(simulate_extraction(teacher, 1, 999, GenerationConfig(100, 1)), Error);
}

TEST_CASE("extraction_gap is zero for an exact copy and shrinks with more queries") {
  const auto bundle = testing::uniform_bundle(50, 0.003, 12);
  const auto teacher = bundle.model();
  // A student whose tables equal the teacher's watermarked unigram: build a
  // watermarked model over a copied base with the same reweight table.
  const WatermarkedModel copy(std::make_shared<const NGramModel>(*bundle.base), bundle.reweight);
  CHECK(extraction_gap(teacher, copy, 500, 3) == 0.0);

  double gap10k = 0.0, gap100k = 0.0, gap500k = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GenerationConfig gen(1000, derive_seed(1234, seed));
    gap10k += extraction_gap(teacher, simulate_extraction(teacher, 1, 10000, gen), 200, seed);
    gap100k += extraction_gap(teacher, simulate_extraction(teacher, 1, 100000, gen), 200, seed);
    gap500k += extraction_gap(teacher, simulate_extraction(teacher, 1, 500000, gen), 200, seed);
  }
  CHECK(gap10k > gap100k);
  CHECK(gap100k > gap500k);
}
