#include <gtest/gtest.h>

#include <sstream>

#include "pointpred/encoding.hpp"
#include "pointpred/encoding_io.hpp"
#include "pointpred/random.hpp"

using namespace pointpred;

namespace {

BinarySeries random_series(std::uint64_t seed, std::size_t bins_per_day, std::size_t n_days, double p = 0.3) {
  Rng rng(seed);
  Bits bits(bins_per_day * n_days);
  for (auto& b : bits) b = rng.bernoulli(p) ? 1 : 0;
  return BinarySeries(std::move(bits), 600, bins_per_day, n_days);
}

}  // namespace

TEST(Binarize, SingleEventLandsInFirstBin) {
  EventLog log{"u", {1000 + 5}};
  const auto s = binarize(log, 1000, 1, DayWindow{0, 1200}, 600);
  EXPECT_EQ(s.bits(), (Bits{1, 0}));
}

TEST(Binarize, NoEventsGivesZeros) {
  EventLog log{"u", {}};
  const auto s = binarize(log, 0, 3, DayWindow{}, 600);
  EXPECT_EQ(s.size(), 3 * s.bins_per_day());
  EXPECT_EQ(s.ones(), 0u);
}

TEST(Binarize, SixteenHourWindowHasNinetySixBins) {
  const DayWindow w{7 * 3600, 23 * 3600};
  EXPECT_EQ(w.length(), 57600);
  const auto s = binarize(EventLog{"u", {}}, 0, 1, w, 600);
  EXPECT_EQ(s.bins_per_day(), 96u);
  EXPECT_EQ(DayWindow{}.length(), 57600);
}

TEST(Binarize, HalfOpenBinsAndWindowEdges) {
  const std::int64_t t0 = 86400 * 10;
  const DayWindow w{3600, 3600 + 1800};
  // Exactly on the boundary between bins 0 and 1, then outside the window.
  EventLog log{"u", {t0 + 3600 + 600, t0 + 3600 + 1800, t0 + 3599, t0 + 86400 + 3600}};
  const auto s = binarize(log, t0, 2, w, 600);
  EXPECT_EQ(s.to_string(), "010" "100");
}

TEST(Binarize, SeveralEventsInOneBinGiveOne) {
  EventLog log{"u", {10, 20, 30}};
  const auto s = binarize(log, 0, 1, DayWindow{0, 600}, 600);
  EXPECT_EQ(s.bits(), Bits{1});
}

TEST(Binarize, EventsBeforeT0OrAfterLastDayIgnored) {
  EventLog log{"u", {5, 86400 * 3 + 10}};
  const auto s = binarize(log, 100, 2, DayWindow{0, 1200}, 600);
  EXPECT_EQ(s.ones(), 0u);
}

TEST(Binarize, RejectsBadGeometry) {
  EventLog log{"u", {}};
  EXPECT_THROW(binarize(log, 0, 1, DayWindow{0, 1000}, 600), ConfigError);
  EXPECT_THROW(binarize(log, 0, 1, DayWindow{600, 600}, 600), ConfigError);
  EXPECT_THROW(binarize(log, 0, 1, DayWindow{0, 600}, 0), ConfigError);
  EXPECT_THROW(binarize(log, 0, 0, DayWindow{0, 600}, 600), ConfigError);
}

TEST(Binarize, LengthPropertyOverRandomGeometry) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t bin = 60 * static_cast<std::int64_t>(1 + rng.below(20));
    const std::int64_t start = bin * static_cast<std::int64_t>(rng.below(10));
    const std::int64_t end = start + bin * static_cast<std::int64_t>(1 + rng.below(50));
    const std::size_t days = 1 + rng.below(5);
    EventLog log{"u", {}};
    for (int k = 0; k < 30; ++k) log.timestamps.push_back(static_cast<std::int64_t>(rng.below(86400 * 6)));
    std::sort(log.timestamps.begin(), log.timestamps.end());
    const auto s = binarize(log, 0, days, DayWindow{start, end}, bin);
    EXPECT_EQ(s.size(), days * static_cast<std::size_t>((end - start) / bin));
  }
}

TEST(EventLog, ValidateRejectsUnsortedAndNegative) {
  EXPECT_THROW((EventLog{"u", {3, 1}}.validate()), DataError);
  EXPECT_THROW((EventLog{"u", {-1, 2}}.validate()), DataError);
  EXPECT_NO_THROW((EventLog{"u", {1, 1, 2}}.validate()));
}

TEST(BinarySeriesType, ConstructionChecksInvariants) {
  EXPECT_THROW(BinarySeries(Bits{0, 1, 0}, 600, 2, 2), DataError);
  EXPECT_THROW(BinarySeries(Bits{0, 2}, 600, 2, 1), DataError);
  EXPECT_THROW(BinarySeries(Bits{0, 1}, 0, 2, 1), ConfigError);
  EXPECT_THROW(BinarySeries::from_string("0101x", 5), DataError);
  EXPECT_THROW(BinarySeries::from_string("010", 2), DataError);
  const auto s = BinarySeries::from_string("0110", 2);
  EXPECT_EQ(s.n_days(), 2u);
  EXPECT_EQ(s.to_string(), "0110");
}

TEST(Coarsen, OrSemantics) {
  const auto s = BinarySeries::from_string("0010", 4, 1);
  const auto c = coarsen(s, 2);
  EXPECT_EQ(c.to_string(), "01");
  EXPECT_EQ(c.bin_seconds(), 2);
}

TEST(Coarsen, SecondResolutionToTenMinutes) {
  Bits bits(57600, 0);
  bits[599] = 1;
  bits[600] = 1;
  bits[57599] = 1;
  const BinarySeries s(bits, 1, 57600, 1);
  const auto c = coarsen(s, 600);
  EXPECT_EQ(c.bins_per_day(), 96u);
  EXPECT_EQ(c.bin_seconds(), 600);
  EXPECT_EQ(c.ones(), 3u);
  EXPECT_EQ(c.bits()[0], 1);
  EXPECT_EQ(c.bits()[1], 1);
  EXPECT_EQ(c.bits()[95], 1);
}

TEST(Coarsen, FactorOneIsIdentity) {
  const auto s = random_series(1, 12, 3);
  EXPECT_EQ(coarsen(s, 1), s);
}

TEST(Coarsen, NeverMergesAcrossDays) {
  const auto s = BinarySeries::from_string("001" "100", 3, 1);
  EXPECT_THROW(coarsen(s, 2), ConfigError);
  EXPECT_THROW(coarsen(s, 0), ConfigError);
}

TEST(Coarsen, ComposesOverFactors) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = random_series(seed, 24, 3, 0.1);
    EXPECT_EQ(coarsen(s, 6), coarsen(coarsen(s, 2), 3));
    EXPECT_EQ(coarsen(s, 12), coarsen(coarsen(s, 4), 3));
  }
}

TEST(Split, PaperGeometry) {
  const auto s = random_series(2, 96, 49);
  const auto [train, test] = split_train_test(s, 45);
  EXPECT_EQ(train.size(), 4320u);
  EXPECT_EQ(test.size(), 384u);
  Bits joined = train.bits();
  joined.insert(joined.end(), test.bits().begin(), test.bits().end());
  EXPECT_EQ(joined, s.bits());
}

TEST(Split, TwoDaysIntoHalves) {
  const auto s = BinarySeries::from_string("0110", 2);
  const auto [a, b] = split_train_test(s, 1);
  EXPECT_EQ(a.to_string(), "01");
  EXPECT_EQ(b.to_string(), "10");
}

TEST(Split, RejectsEmptySide) {
  const auto s = random_series(3, 4, 3);
  EXPECT_THROW(split_train_test(s, 3), ConfigError);
  EXPECT_THROW(split_train_test(s, 0), ConfigError);
}

TEST(FlipBits, ExtremesAndHalf) {
  const auto s = random_series(5, 96, 1);
  EXPECT_EQ(flip_bits(s, 0.0, 9), s);
  const auto all = flip_bits(s, 1.0, 9);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(all.bits()[i], 1 - s.bits()[i]);
  EXPECT_EQ(hamming_distance(flip_bits(s, 0.5, 9), s), 48u);
}

TEST(FlipBits, RejectsBadProportion) {
  const auto s = random_series(5, 8, 1);
  EXPECT_THROW(flip_bits(s, -0.1, 1), std::invalid_argument);
  EXPECT_THROW(flip_bits(s, 1.1, 1), std::invalid_argument);
}

TEST(FlipBits, InvolutionAndExactCountProperties) {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto s = random_series(100 + trial, 1 + rng.below(50), 1 + rng.below(5));
    const double q = rng.uniform();
    const std::uint64_t seed = rng.next_u64();
    const auto f = flip_bits(s, q, seed);
    EXPECT_EQ(flip_bits(f, q, seed), s);
    EXPECT_EQ(hamming_distance(f, s), static_cast<std::size_t>(std::llround(q * static_cast<double>(s.size()))));
    EXPECT_EQ(f, flip_bits(s, q, seed));
  }
}

TEST(Rastergram, ReshapesByDay) {
  const auto s = BinarySeries::from_string("100011", 3);
  EXPECT_EQ(rastergram(s), (std::vector<std::string>{"100", "011"}));
  const auto z = BinarySeries::from_string("000000", 3);
  EXPECT_EQ(rastergram(z), (std::vector<std::string>{"000", "000"}));
}

TEST(Rastergram, FullSizeGridAndRoundTrip) {
  const auto s = random_series(8, 96, 49);
  const auto rows = rastergram(s);
  ASSERT_EQ(rows.size(), 49u);
  std::string joined;
  for (const auto& r : rows) {
    EXPECT_EQ(r.size(), 96u);
    joined += r;
  }
  EXPECT_EQ(joined, s.to_string());
}

TEST(Rastergram, PgmHeaderAndPixels) {
  std::ostringstream out;
  write_rastergram_pgm(out, BinarySeries::from_string("10" "01", 2));
  EXPECT_EQ(out.str(), "P2\n2 2\n255\n0 255\n255 0\n");
}

TEST(TweetRate, Basics) {
  EXPECT_DOUBLE_EQ(tweet_rate(BinarySeries::from_string("1111", 2)), 1.0);
  EXPECT_DOUBLE_EQ(tweet_rate(BinarySeries::from_string("1001", 4)), 0.5);
  EXPECT_THROW(tweet_rate(BinarySeries{}), std::invalid_argument);
}

TEST(TweetRate, SparseBernoulliSample) {
  const auto s = random_series(11, 100, 1000, 0.05);
  EXPECT_NEAR(tweet_rate(s), 0.05, 0.01);
}

TEST(EventsCsv, ParsesSortsUsersAndWarns) {
  std::istringstream in(
      "user_id,epoch_second\n"
      "# comment\n"
      "bob,100\n"
      "alice,5.9\n"
      "\n"
      "bob,200\n"
      "garbage line\n"
      "carol,notanumber\n");
  const auto r = parse_events_csv(in);
  ASSERT_EQ(r.users.size(), 2u);
  EXPECT_EQ(r.users[0].user_id, "alice");
  EXPECT_EQ(r.users[0].timestamps, (std::vector<std::int64_t>{5}));
  EXPECT_EQ(r.users[1].timestamps, (std::vector<std::int64_t>{100, 200}));
  EXPECT_EQ(r.warnings.size(), 2u);
}

TEST(EventsCsv, RejectsUnsortedUser) {
  std::istringstream in("a,10\na,5\nb,1\n");
  const auto r = parse_events_csv(in);
  ASSERT_EQ(r.users.size(), 1u);
  EXPECT_EQ(r.users[0].user_id, "b");
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("not sorted"), std::string::npos);
}

TEST(EventsJsonl, ParsesAndAutodetects) {
  std::istringstream in(
      "{\"user_id\": \"x\", \"timestamps\": [1, 2.7, 9]}\n"
      "{\"user_id\": \"y\", \"timestamps\": [5, 4]}\n"
      "not json\n");
  const auto r = parse_events(in);
  ASSERT_EQ(r.users.size(), 1u);
  EXPECT_EQ(r.users[0].timestamps, (std::vector<std::int64_t>{1, 2, 9}));
  EXPECT_EQ(r.warnings.size(), 2u);
}

TEST(SeriesFile, RoundTrip) {
  std::vector<SeriesRecord> recs = {{"a", random_series(1, 6, 2)}, {"b", random_series(2, 6, 2)}};
  std::ostringstream out;
  write_series_file(out, recs);
  EXPECT_EQ(out.str().substr(0, 45), "#bin_seconds=600\n#bins_per_day=6\n#n_days=2\na\t");
  std::istringstream in(out.str());
  const auto back = read_series_file(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].id, "a");
  EXPECT_EQ(back[1].series, recs[1].series);
}

TEST(SeriesFile, RejectsMissingHeaderOrWrongLength) {
  std::istringstream no_header("a\t0101\n");
  EXPECT_THROW(read_series_file(no_header), DataError);
  std::istringstream wrong("#bin_seconds=600\n#bins_per_day=2\n#n_days=3\na\t0101\n");
  EXPECT_THROW(read_series_file(wrong), DataError);
  std::vector<SeriesRecord> mixed = {{"a", random_series(1, 6, 2)}, {"b", random_series(2, 3, 2)}};
  std::ostringstream out;
  EXPECT_THROW(write_series_file(out, mixed), DataError);
}

TEST(Random, DeterministicAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(a.below(7), 7u);
    b.below(7);
  }
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(hash_id("user0001"), hash_id("user0001"));
  EXPECT_NE(hash_id("user0001"), hash_id("user0002"));
}
