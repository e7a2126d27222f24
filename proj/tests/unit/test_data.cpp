#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "fednlp/data/batching.hpp"
#include "fednlp/data/corpus.hpp"
#include "fednlp/data/masking.hpp"
#include "fednlp/data/partition.hpp"
#include "fednlp/data/vocabulary.hpp"
#include "fednlp/tensor/errors.hpp"

using namespace fednlp;
using namespace fednlp::data;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("fednlp_test_data_" + name);
}

}  // namespace

TEST(Vocabulary, TokenizeLowercasesAndSplits) {
  EXPECT_EQ(tokenize("  Rx CLOPIDOGREL\tdose_75 \n"), (std::vector<std::string>{"rx", "clopidogrel", "dose_75"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(Vocabulary, FrequencyOrderWithLexicographicTies) {
  std::vector<std::string> lines{"b a c", "a b d", "a e e"};
  auto v = Vocabulary::build(lines, 100);
  // a:3, b:2, e:2, c:1, d:1
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"a", "b", "e", "c", "d"}));
  EXPECT_EQ(v.size(), 9u);
  EXPECT_EQ(v.id("a"), 4);
  EXPECT_EQ(v.id("zzz"), kUnkId);
  EXPECT_EQ(v.token(kMaskId).empty(), false);

  auto capped = Vocabulary::build(lines, 6);
  EXPECT_EQ(capped.tokens(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(capped.encode("a e b"), (std::vector<std::int32_t>{4, kUnkId, 5}));
  EXPECT_THROW(v.token(99), IndexError);
  EXPECT_THROW(Vocabulary::build(lines, 3), ConfigError);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  auto v = Vocabulary::from_tokens({"x", "y", "z"});
  auto path = temp_file("vocab.txt");
  v.save(path);
  EXPECT_EQ(Vocabulary::load(path), v);
  std::filesystem::remove(path);
  EXPECT_THROW(Vocabulary::from_tokens({"x", "x"}), ConfigError);
}

TEST(Corpus, DeterministicAndSeedSensitive) {
  auto g = GrammarParams::clinical_defaults();
  auto a = generate_corpus(5, 200, g);
  auto b = generate_corpus(5, 200, g);
  auto c = generate_corpus(6, 200, g);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  // Records are generated independently, so a prefix is stable under n.
  auto shorter = generate_corpus(5, 50, g);
  EXPECT_TRUE(std::equal(shorter.begin(), shorter.end(), a.begin()));
}

TEST(Corpus, LengthsWithinRange) {
  auto g = GrammarParams::clinical_defaults();
  g.min_len = 12;
  g.max_len = 30;
  std::set<std::size_t> seen;
  for (const auto& r : generate_corpus(1, 2000, g)) {
    EXPECT_GE(r.tokens.size(), 12u);
    EXPECT_LE(r.tokens.size(), 30u);
    seen.insert(r.tokens.size());
  }
  EXPECT_EQ(seen.size(), 19u);
}

TEST(Corpus, PlantedRuleNoiseAndPrevalence) {
  auto g = GrammarParams::clinical_defaults();
  const std::size_t n = 20000;
  auto records = generate_corpus(11, n, g);
  std::size_t flips = 0, positives = 0, rule_pos = 0;
  for (const auto& r : records) {
    const bool rule = planted_rule(r.tokens, g);
    rule_pos += rule;
    flips += (rule ? 1 : 0) != r.label;
    positives += r.label;
  }
  const double q = (g.prevalence - g.label_noise) / (1 - 2 * g.label_noise);
  // binomial 4-sigma bands
  auto band = [&](double p) { return 4 * std::sqrt(p * (1 - p) / n); };
  EXPECT_NEAR(double(flips) / n, g.label_noise, band(g.label_noise));
  EXPECT_NEAR(double(positives) / n, g.prevalence, band(g.prevalence));
  EXPECT_NEAR(double(rule_pos) / n, q, band(q));
}

TEST(Corpus, DecoysCarryOneRuleToken) {
  auto g = GrammarParams::clinical_defaults();
  g.label_noise = 0.0;
  g.prevalence = 0.3;
  g.decoy_rate = 1.0;
  for (const auto& r : generate_corpus(3, 500, g)) {
    const bool a = std::count(r.tokens.begin(), r.tokens.end(), g.rule_token_a) > 0;
    const bool b = std::count(r.tokens.begin(), r.tokens.end(), g.rule_token_b) > 0;
    EXPECT_EQ(r.label, a && b ? 1 : 0);
    EXPECT_TRUE(a || b);
  }
}

TEST(Corpus, InventoryBoundsDistinctTokens) {
  auto g = GrammarParams::clinical_defaults();
  std::set<std::string> distinct;
  for (const auto& r : generate_corpus(2, 3000, g)) distinct.insert(r.tokens.begin(), r.tokens.end());
  EXPECT_LE(distinct.size(), g.token_inventory());
  EXPECT_GT(distinct.size(), 100u);
}

TEST(Corpus, FormatParseAndFileRoundTrip) {
  auto g = GrammarParams::clinical_defaults();
  auto records = generate_corpus(4, 30, g);
  for (const auto& r : records) EXPECT_EQ(parse_record(format_record(r)), r);
  auto path = temp_file("corpus.tsv");
  write_corpus(path, records);
  EXPECT_EQ(read_corpus(path), records);
  std::filesystem::remove(path);
  EXPECT_THROW(parse_record("1 a b"), ConfigError);
  EXPECT_THROW(parse_record("2\ta b"), ConfigError);
}

TEST(Corpus, InvalidGrammarRejected) {
  auto g = GrammarParams::clinical_defaults();
  g.label_noise = 0.5;
  EXPECT_THROW(g.validate(), ConfigError);
  g = GrammarParams::clinical_defaults();
  g.prevalence = 0.01;
  EXPECT_THROW(g.validate(), ConfigError);
  g = GrammarParams::clinical_defaults();
  g.max_len = g.min_len - 1;
  EXPECT_THROW(g.validate(), ConfigError);
  g = GrammarParams::clinical_defaults();
  g.templates.front().slots.push_back(g.rule_token_a);
  EXPECT_THROW(g.validate(), ConfigError);
}

namespace {

TokenBatch uniform_batch(std::size_t rows, std::size_t cols, std::size_t vocab, std::uint64_t seed) {
  Rng rng(seed);
  TokenBatch b;
  b.batch_size = rows;
  b.seq_len = cols + 1;
  for (std::size_t r = 0; r < rows; ++r) {
    b.ids.push_back(kClsId);
    b.attention_mask.push_back(1);
    for (std::size_t c = 0; c < cols; ++c) {
      b.ids.push_back(static_cast<std::int32_t>(4 + rng.below(vocab - 4)));
      b.attention_mask.push_back(1);
    }
    b.lengths.push_back(cols + 1);
  }
  return b;
}

}  // namespace

TEST(Masking, StatisticsOverHundredThousandTokens) {
  const std::size_t V = 2000;
  auto batch = uniform_batch(1000, 100, V, 7);
  Rng rng(8);
  auto masked = mask_batch(batch, V, MaskingConfig::standard(), rng);
  std::size_t eligible = 0, selected = 0, kept = 0, masks = 0, randomized = 0;
  for (std::size_t i = 0; i < batch.ids.size(); ++i) {
    if (batch.ids[i] == kClsId) {
      EXPECT_EQ(masked.labels[i], kIgnoreLabel);
      EXPECT_EQ(masked.inputs.ids[i], kClsId);
      continue;
    }
    ++eligible;
    if (masked.labels[i] == kIgnoreLabel) {
      EXPECT_EQ(masked.inputs.ids[i], batch.ids[i]);
      continue;
    }
    ++selected;
    EXPECT_EQ(masked.labels[i], batch.ids[i]);
    const auto out = masked.inputs.ids[i];
    if (out == kMaskId) {
      ++masks;
    } else if (out == batch.ids[i]) {
      ++kept;
    } else {
      ++randomized;
      EXPECT_GE(out, kFirstTokenId);
      EXPECT_LT(out, static_cast<std::int32_t>(V));
    }
  }
  ASSERT_EQ(eligible, 100000u);
  const double sel = double(selected) / eligible;
  EXPECT_GE(sel, 0.14);
  EXPECT_LE(sel, 0.16);
  // A random replacement can coincide with the original (1 / 1996), so the
  // kept bucket is 10% plus a negligible share of the random draws.
  EXPECT_GE(double(kept) / selected, 0.09);
  EXPECT_LE(double(kept) / selected, 0.11);
  EXPECT_NEAR(double(masks) / selected, 0.8, 0.02);
  EXPECT_NEAR(double(randomized) / selected, 0.1, 0.015);
}

TEST(Masking, PaddingAndReservedNeverSelected) {
  TokenBatch b;
  b.batch_size = 2;
  b.seq_len = 4;
  b.ids = {kClsId, 7, kUnkId, 9, kClsId, 8, kPadId, kPadId};
  b.attention_mask = {1, 1, 1, 1, 1, 1, 0, 0};
  b.lengths = {4, 2};
  Rng rng(1);
  auto m = mask_batch(b, 20, MaskingConfig{1.0, 1.0, 0.0, 0.0}, rng);
  EXPECT_EQ(m.labels, (std::vector<std::int32_t>{-1, 7, -1, 9, -1, 8, -1, -1}));
  EXPECT_EQ(m.inputs.ids, (std::vector<std::int32_t>{kClsId, kMaskId, kUnkId, kMaskId, kClsId, kMaskId, 0, 0}));
}

TEST(Masking, DeterministicForSeed) {
  auto batch = uniform_batch(20, 30, 100, 3);
  Rng r1(5), r2(5);
  auto a = mask_batch(batch, 100, MaskingConfig::standard(), r1);
  auto b = mask_batch(batch, 100, MaskingConfig::standard(), r2);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.inputs.ids, b.inputs.ids);
}

TEST(Masking, InvalidConfigsRejected) {
  EXPECT_THROW((MaskingConfig{1.5, 0.8, 0.1, 0.1}.validate()), ConfigError);
  EXPECT_THROW((MaskingConfig{0.15, 0.8, 0.1, 0.2}.validate()), ConfigError);
  EXPECT_THROW((MaskingConfig{0.15, 0.8, 0.1, 0.1, 0}.validate()), ConfigError);
  EXPECT_NO_THROW(MaskingConfig::without_random().validate());
}

TEST(Partition, DefaultRatiosOnThousandRecords) {
  auto spec = PartitionSpec::imbalanced();
  EXPECT_EQ(partition_sizes(1000, spec), (std::vector<std::size_t>{290, 220, 170, 140, 90, 40, 30, 20}));
}

namespace {

// Hamilton's method written out independently: floors, then one extra to the
// largest remainders, lower index first on ties.
std::vector<std::size_t> hamilton(std::size_t total, const std::vector<double>& ratios) {
  std::vector<std::size_t> out;
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double exact = ratios[i] * double(total);
    out.push_back(static_cast<std::size_t>(std::floor(exact)));
    used += out.back();
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; k < total - used; ++k) ++out[rem[k].second];
  return out;
}

}  // namespace

TEST(Partition, ApportionMatchesReferenceMethod) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(10);
    std::vector<double> r(k);
    double s = 0;
    for (auto& x : r) s += (x = rng.uniform(0.05, 1.0));
    for (auto& x : r) x /= s;
    const std::size_t total = rng.below(5000);
    auto got = apportion(total, r);
    EXPECT_EQ(got, hamilton(total, r));
    EXPECT_EQ(std::accumulate(got.begin(), got.end(), std::size_t{0}), total);
  }
}

TEST(Partition, TiesGoToLowerIndex) {
  std::vector<double> r{0.25, 0.25, 0.25, 0.25};
  EXPECT_EQ(apportion(6, r), (std::vector<std::size_t>{2, 2, 1, 1}));
}

TEST(Partition, UnionAndDisjointnessOverSeeds) {
  for (auto spec : {PartitionSpec::imbalanced(), PartitionSpec::balanced(8)}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      auto shards = partition_indices(1000, spec, seed);
      ASSERT_EQ(shards.size(), 8u);
      std::vector<int> hits(1000, 0);
      auto sizes = partition_sizes(1000, spec);
      for (std::size_t s = 0; s < shards.size(); ++s) {
        EXPECT_EQ(shards[s].size(), sizes[s]);
        for (auto i : shards[s]) ++hits.at(i);
      }
      EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; })) << seed;
    }
  }
}

TEST(Partition, SeedsChangeAssignment) {
  auto spec = PartitionSpec::balanced(4);
  EXPECT_EQ(partition_indices(100, spec, 1), partition_indices(100, spec, 1));
  EXPECT_NE(partition_indices(100, spec, 1), partition_indices(100, spec, 2));
}

TEST(Partition, BalancedAndSmallModes) {
  EXPECT_EQ(partition_sizes(1003, PartitionSpec::balanced(4)), (std::vector<std::size_t>{251, 251, 251, 250}));
  auto small = PartitionSpec::small();
  EXPECT_EQ(small.shard_count(), 1u);
  EXPECT_EQ(partition_sizes(1000, small), (std::vector<std::size_t>{20}));
  auto shards = partition_indices(1000, small, 3);
  ASSERT_EQ(shards.size(), 1u);
  EXPECT_EQ(shards[0].size(), 20u);
}

TEST(Partition, TemplateCopiesRecords) {
  std::vector<int> items(50);
  std::iota(items.begin(), items.end(), 0);
  auto spec = PartitionSpec::balanced(5);
  auto shards = partition<int>(items, spec, 4);
  auto idx = partition_indices(50, spec, 4);
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t j = 0; j < idx[s].size(); ++j) EXPECT_EQ(shards[s][j], static_cast<int>(idx[s][j]));
}

TEST(Partition, InvalidSpecsRejected) {
  PartitionSpec bad = PartitionSpec::imbalanced({0.5, 0.6});
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(PartitionSpec::imbalanced({0.5, 0.0, 0.5}).validate(), ConfigError);
  EXPECT_THROW(partition_sizes(5, PartitionSpec::balanced(8)), ConfigError);
}

TEST(Partition, ShuffleIsPermutation) {
  auto p = shuffled_indices(500, 3);
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 500; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(p, sorted);
}

TEST(Batching, PrependsClsPadsAndTruncates) {
  std::vector<EncodedRecord> recs{{1, {5, 6}}, {0, {7, 8, 9, 10, 11}}, {1, {12}}};
  BatchOptions opts;
  opts.batch_size = 2;
  opts.max_seq_len = 4;
  opts.shuffle = false;
  auto batches = make_batches(recs, opts);
  ASSERT_EQ(batches.size(), 2u);
  const auto& b0 = batches[0];
  EXPECT_EQ(b0.seq_len, 4u);
  EXPECT_EQ(b0.ids, (std::vector<std::int32_t>{kClsId, 5, 6, kPadId, kClsId, 7, 8, 9}));
  EXPECT_EQ(b0.attention_mask, (std::vector<std::uint8_t>{1, 1, 1, 0, 1, 1, 1, 1}));
  EXPECT_EQ(b0.lengths, (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(b0.labels, (std::vector<std::int32_t>{1, 0}));
  const auto& b1 = batches[1];
  EXPECT_EQ(b1.batch_size, 1u);
  EXPECT_EQ(b1.seq_len, 2u);
  EXPECT_EQ(b1.ids, (std::vector<std::int32_t>{kClsId, 12}));
}

TEST(Batching, ShuffleIsSeededPermutation) {
  std::vector<EncodedRecord> recs;
  for (int i = 0; i < 40; ++i) recs.push_back({i % 2, {4 + i}});
  BatchOptions opts;
  opts.batch_size = 7;
  opts.seed = 3;
  auto order = [&](std::uint64_t epoch) {
    opts.epoch = epoch;
    std::vector<std::int32_t> seen;
    for (const auto& b : make_batches(recs, opts))
      for (std::size_t r = 0; r < b.batch_size; ++r) seen.push_back(b.ids[r * b.seq_len + 1]);
    return seen;
  };
  auto e0 = order(0);
  EXPECT_EQ(e0, order(0));
  EXPECT_NE(e0, order(1));
  auto sorted = e0;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 40; ++i) EXPECT_EQ(sorted[i], 4 + i);
}

TEST(Batching, InvalidOptions) {
  std::vector<EncodedRecord> recs{{0, {5}}};
  BatchOptions opts;
  opts.batch_size = 0;
  EXPECT_THROW(make_batches(recs, opts), ConfigError);
  opts.batch_size = 1;
  opts.max_seq_len = 1;
  EXPECT_THROW(make_batches(recs, opts), ConfigError);
}
