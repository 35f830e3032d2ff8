#include <gtest/gtest.h>

#include <sstream>

#include "nnv/config.hpp"
#include "nnv/report.hpp"
#include "support.hpp"

namespace {

using nnv::ClassLabel;
using nnv::Vector;

TEST(Hash, Fnv1aReferenceValues) {
  EXPECT_EQ(nnv::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(nnv::fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(nnv::fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(RunConfig, HashIgnoresPathsAndWorkers) {
  nnv::RunConfig a, b;
  b.grid = "elsewhere.json";
  b.out = "out";
  b.workers = 7;
  EXPECT_EQ(a.hash(), b.hash());
  b.eps = 0.02;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(RunConfig, JsonRoundTrip) {
  nnv::RunConfig c;
  c.seed = 11;
  c.eps_grid = {0.001, 0.1};
  c.train.epochs = 12;
  c.sparsity = 0.5;
  c.power_balance = true;
  const auto back = nnv::config_from_json(c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(back.seed, 11u);
  EXPECT_EQ(back.train_config().seed, 11u);
}

TEST(RunConfig, RejectsBadValues) {
  EXPECT_THROW(nnv::config_from_json({{"verify", {{"epz", 1}}}}), nnv::ConfigError);
  EXPECT_THROW(nnv::config_from_json({{"seed", "one"}}), nnv::ConfigError);
  nnv::RunConfig c;
  c.eps_grid = {0.1, 0.01};
  EXPECT_THROW(c.validate(), nnv::ConfigError);
  c.eps_grid = {0.0, 0.01};
  EXPECT_THROW(c.validate(), nnv::ConfigError);
  c = {};
  c.sparsity = 1.0;
  EXPECT_THROW(c.validate(), nnv::ConfigError);
  c = {};
  EXPECT_NO_THROW(c.validate());
}

TEST(Report, SummaryCsvLayout) {
  std::vector<nnv::CampaignPoint> curve{{0.01, 0.9, 0.05, 0.02, 0, 0}, {0.1, 0.5, 0.05, 0.2, 0, 0}};
  std::ostringstream out;
  nnv::write_summary_csv(curve, out);
  EXPECT_EQ(out.str(),
            "eps,robust_fraction,misclassified_fraction,adversarial_fraction\n"
            "0.01,0.90000000000000002,0.050000000000000003,0.02\n"
            "0.10000000000000001,0.5,0.050000000000000003,0.20000000000000001\n");
}

TEST(Report, RecordWitnessIsReplayed) {
  const auto net = testing_support::hand_net();
  nnv::QueryRecord r;
  r.sample_id = 4;
  r.eps = 0.1;
  r.label = r.predicted = nnv::classify(net, Vector::Constant(net.input_dim(), 0.5));
  r.verdict = nnv::Verdict::Falsified;
  r.witness = Vector::Constant(net.input_dim(), 0.5);  // same class as the reference: not a witness
  EXPECT_THROW(nnv::record_json(net, r), nnv::EncodingError);
  r.witness.reset();
  r.verdict = nnv::Verdict::Certified;
  r.margin = nnv::kInf;
  const auto j = nnv::record_json(net, r);
  EXPECT_EQ(j.at("verdict"), "certified");
  EXPECT_EQ(j.at("margin"), "inf");
  EXPECT_TRUE(j.at("witness").is_null());
}

TEST(Report, AdversarialsRoundTrip) {
  const auto net = testing_support::hand_net();
  std::mt19937_64 rng(3);
  nnv::MiningResult m;
  for (int i = 0; i < 20 && m.examples.size() < 3; ++i) {
    const Vector w = testing_support::random_point(rng, net.input_dim());
    const auto c = nnv::classify(net, w);
    m.examples.push_back({i, 0.01, Vector::Zero(net.input_dim()), w, nnv::detail::other(c), c});
  }
  const nlohmann::json rep{{"adversarials", nnv::adversarials_json(net, m)}};
  const auto back = nnv::read_adversarials(rep);
  ASSERT_EQ(back.size(), m.examples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].x, m.examples[i].witness);
    EXPECT_EQ(back[i].label, m.examples[i].true_label);
  }
  EXPECT_THROW(nnv::read_adversarials({{"adversarials", {{{"witness", {0.1}}}}}}), nnv::DataError);
}

}  // namespace
