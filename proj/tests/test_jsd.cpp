#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>
#include <random>

#include "pplsim/jsd.hpp"

using namespace pplsim;

namespace {

// JSD via entropies: H(m) - (H(p) + H(q)) / 2.
double entropy_jsd(const std::vector<double>& p, const std::vector<double>& q) {
  const auto h = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
      if (x > 0) s -= x * std::log(x);
    }
    return s;
  };
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return h(m) - 0.5 * (h(p) + h(q));
}

std::vector<double> random_dist(std::mt19937_64& rng, std::size_t n, bool sparse = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& x : p) {
    x = (sparse && u(rng) < 0.3) ? 0.0 : u(rng);
    s += x;
  }
  if (s == 0.0) {
    p[0] = 1.0;
    s = 1.0;
  }
  for (auto& x : p) x /= s;
  return p;
}

template <typename Fn>
ErrorKind error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

}  // namespace

TEST(Jsd, Examples) {
  const std::vector<std::string> v = {"x", "y"};
  EXPECT_EQ(jsd({v, {0.3, 0.7}}, {v, {0.3, 0.7}}), 0.0);
  EXPECT_NEAR(jsd({v, {1.0, 0.0}}, {v, {0.0, 1.0}}), std::numbers::ln2, 1e-15);
  const double expect = entropy_jsd({0.75, 0.25}, {0.25, 0.75});
  EXPECT_NEAR(expect, 0.13081204, 5e-9);
  EXPECT_NEAR(jsd({v, {0.75, 0.25}}, {v, {0.25, 0.75}}), expect, 1e-15);
}

TEST(Jsd, DifferentSupportsRejected) {
  EXPECT_EQ(error_kind([] { jsd({{"a", "b"}, {0.5, 0.5}}, {{"b", "a"}, {0.5, 0.5}}); }),
            ErrorKind::SupportMismatch);
}

TEST(Jsd, AgreesWithEntropyFormAndIsBoundedAndSymmetric) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 2 + rng() % 30;
    const auto p = random_dist(rng, n, t % 2 == 0), q = random_dist(rng, n, t % 3 == 0);
    const double d = jsd_values(p, q);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, std::numbers::ln2 + 1e-12);
    EXPECT_EQ(d, jsd_values(q, p));
    EXPECT_NEAR(d, entropy_jsd(p, q), 1e-12);
  }
}

TEST(Jsd, SqrtTriangleInequality) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 2 + rng() % 10;
    const auto p = random_dist(rng, n), q = random_dist(rng, n), r = random_dist(rng, n);
    EXPECT_LE(std::sqrt(jsd_values(p, r)), std::sqrt(jsd_values(p, q)) + std::sqrt(jsd_values(q, r)) + 1e-9);
  }
}

TEST(Gate, Examples) {
  const std::vector<std::string> abc = {"a", "b", "c"}, bcd = {"b", "c", "d"}, xyz = {"x", "y", "z"};
  const auto same = vocab_overlap(abc, abc);
  EXPECT_EQ(same.ratio, 1.0);
  EXPECT_TRUE(same.eligible());
  const auto part = vocab_overlap(abc, bcd);
  EXPECT_NEAR(part.ratio, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(part.overlap, 2u);
  EXPECT_FALSE(part.eligible());
  EXPECT_EQ(vocab_overlap(abc, xyz).ratio, 0.0);
  EXPECT_EQ(error_kind([&] { vocab_overlap(abc, std::vector<std::string>{}); }), ErrorKind::EmptyVocabulary);
  EXPECT_EQ(error_kind([&] { require_gate(abc, bcd, 0.7); }), ErrorKind::GateFailed);
  EXPECT_NO_THROW(require_gate(abc, bcd, 0.6));
}

TEST(Gate, AddingASharedTokenNeverLowersTheRatio) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    std::vector<std::string> a, b;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 20); ++i) a.push_back("t" + std::to_string(rng() % 30));
    for (int i = 0; i < 1 + static_cast<int>(rng() % 20); ++i) b.push_back("t" + std::to_string(rng() % 30));
    const double before = vocab_overlap(a, b).ratio;
    a.push_back("shared" + std::to_string(t));
    b.push_back("shared" + std::to_string(t));
    EXPECT_GE(vocab_overlap(a, b).ratio, before);
    EXPECT_LE(vocab_overlap(a, b).ratio, 1.0);
  }
}

TEST(SharedSupport, RestrictsAndRenormalizes) {
  const NextTokenDistribution p{{"a", "b", "c"}, {0.5, 0.25, 0.25}};
  const NextTokenDistribution q{{"d", "c", "b"}, {0.5, 0.25, 0.25}};
  const auto [rp, rq] = restrict_to_shared(p, q);
  EXPECT_EQ(rp.vocab, (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(rq.vocab, rp.vocab);
  EXPECT_EQ(rp.probs, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(rq.probs, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(jsd(rp, rq), 0.0);
}

TEST(SharedSupport, ExactlySymmetricAcrossVocabularies) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::string> va, vb;
    for (int i = 0; i < 20; ++i) va.push_back("w" + std::to_string(i));
    for (int i = 3; i < 25; ++i) vb.push_back("w" + std::to_string(i));
    std::shuffle(va.begin(), va.end(), rng);
    std::shuffle(vb.begin(), vb.end(), rng);
    const NextTokenDistribution p{va, random_dist(rng, va.size())};
    const NextTokenDistribution q{vb, random_dist(rng, vb.size())};
    const auto [a1, b1] = restrict_to_shared(p, q);
    const auto [b2, a2] = restrict_to_shared(q, p);
    EXPECT_EQ(jsd(a1, b1), jsd(a2, b2));
  }
}

TEST(JsdSeq, MeanOverPrefixes) {
  const std::vector<std::string> v = {"x", "y"};
  const SharedSupport s(v, v);
  // prefix JSDs 0 and ln 2
  const auto a = [](std::size_t i) -> std::optional<std::vector<double>> {
    return i == 1 ? std::vector<double>{0.5, 0.5} : std::vector<double>{1.0, 0.0};
  };
  const auto b = [](std::size_t i) -> std::optional<std::vector<double>> {
    return i == 1 ? std::vector<double>{0.5, 0.5} : std::vector<double>{0.0, 1.0};
  };
  EXPECT_NEAR(jsd_seq(s, a, b, 3), std::numbers::ln2 / 2, 1e-15);
  EXPECT_EQ(jsd_seq(s, a, a, 3), 0.0);
  const auto missing = [](std::size_t i) -> std::optional<std::vector<double>> {
    if (i == 2) return std::nullopt;
    return std::vector<double>{0.5, 0.5};
  };
  EXPECT_EQ(error_kind([&] { jsd_seq(s, a, missing, 3); }), ErrorKind::MissingDistribution);
  EXPECT_EQ(error_kind([&] { jsd_seq(s, a, b, 1); }), ErrorKind::TooShort);
}

TEST(Validate, Distribution) {
  EXPECT_NO_THROW(validate_distribution({{"a", "b"}, {0.5, 0.5 + 1e-10}}));
  EXPECT_EQ(error_kind([] { validate_distribution({{"a", "b"}, {0.5, 0.6}}); }), ErrorKind::MalformedRecord);
  EXPECT_EQ(error_kind([] { validate_distribution({{"a", "a"}, {0.5, 0.5}}); }), ErrorKind::MalformedRecord);
  EXPECT_EQ(error_kind([] { validate_distribution({{"a", "b"}, {1.5, -0.5}}); }), ErrorKind::MalformedRecord);
}

TEST(DistributionFile, RoundTripAndCompare) {
  const auto dir = std::filesystem::temp_directory_path() / "pplsim_jsd_test";
  std::filesystem::remove_all(dir);
  DistributionSet a{"A", {"x", "y", "z"}, {}};
  DistributionSet b{"B", {"z", "y", "x", "w"}, {}};
  std::mt19937_64 rng(5);
  for (int s = 0; s < 4; ++s) {
    const std::string id = "s" + std::to_string(s);
    for (int i = 0; i < 2 + s; ++i) {
      a.samples[id].push_back(random_dist(rng, 3));
      b.samples[id].push_back(random_dist(rng, 4));
    }
  }
  write_distribution_file(dir / "a.jsonl", a);
  write_distribution_file(dir / "b.jsonl", b);
  EXPECT_TRUE(std::filesystem::exists(dir / "a.vocab.json"));
  const auto ra = read_distribution_file(dir / "a.jsonl");
  EXPECT_EQ(ra.model_id, "A");
  EXPECT_EQ(ra.vocab, a.vocab);
  EXPECT_EQ(ra.samples.at("s2").size(), 4u);
  const auto rb = read_distribution_file(dir / "b.jsonl");

  // overlap 2*3/7 = 0.857
  const auto r = compare_distributions(ra, rb, 0.7, "toy");
  const auto back = compare_distributions(rb, ra, 0.7, "toy", 3);
  EXPECT_EQ(r.corpus_value, back.corpus_value);
  EXPECT_EQ(r.per_sample[2].n, 5u);
  EXPECT_GT(r.corpus_value, 0.0);
  EXPECT_EQ(compare_distributions(ra, ra).corpus_value, 0.0);
  EXPECT_EQ(error_kind([&] { compare_distributions(ra, rb, 0.9); }), ErrorKind::GateFailed);

  // manual check of one sample
  const SharedSupport sup(a.vocab, b.vocab);
  double sum = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto [pa, pb] = sup.restrict(a.samples["s0"][i], b.samples["s0"][i]);
    sum += entropy_jsd(pa, pb);
  }
  EXPECT_NEAR(r.per_sample[0].value, sum / 2, 1e-12);
}

TEST(DistributionFile, MissingPrefixAndCoverage) {
  const auto dir = std::filesystem::temp_directory_path() / "pplsim_jsd_test2";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "v.json", R"({"model_id":"A","vocab":["x","y"]})");
  write_file_atomic(dir / "gap.jsonl",
                    R"({"sample_id":"s","model_id":"A","prefix_index":1,"vocab_ref":"v.json","probs":[0.5,0.5]})"
                    "\n"
                    R"({"sample_id":"s","model_id":"A","prefix_index":3,"vocab_ref":"v.json","probs":[0.5,0.5]})"
                    "\n");
  EXPECT_EQ(error_kind([&] { read_distribution_file(dir / "gap.jsonl"); }), ErrorKind::MissingDistribution);
  write_file_atomic(dir / "bad.jsonl",
                    R"({"sample_id":"s","model_id":"A","prefix_index":1,"vocab_ref":"v.json","probs":[0.5,0.6]})"
                    "\n");
  EXPECT_EQ(error_kind([&] { read_distribution_file(dir / "bad.jsonl"); }), ErrorKind::MalformedRecord);

  DistributionSet a{"A", {"x", "y"}, {{"s", {{0.5, 0.5}}}}};
  DistributionSet b{"B", {"x", "y"}, {{"t", {{0.5, 0.5}}}}};
  EXPECT_EQ(error_kind([&] { compare_distributions(a, b); }), ErrorKind::CoverageMismatch);
}
