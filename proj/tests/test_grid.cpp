#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "grid_oracles.hpp"
#include "nnv/grid_io.hpp"

namespace {

using nnv::ClassLabel;
using nnv::GridModel;
using nnv::Vector;
using testing_support::enumerate_n1;
using testing_support::pinned_lp;

const GridModel& nine_bus() {
  static const GridModel g = nnv::load_grid(NNV_DATA_DIR "/ieee9_modified.json");
  return g;
}

// Two buses, one line; bus 2 hosts a 0-200 MW load input.
GridModel two_bus(double x = 0.1, double limit = 500.0) {
  GridModel g;
  g.buses = {{1, nnv::BusType::Slack}, {2, nnv::BusType::PQ}};
  g.branches = {{1, 2, x, limit, true}};
  g.generators = {{1, 0.0, 1000.0, true}};
  g.inputs = {{nnv::InputKind::Load, 2, 0.0, 200.0, "L"}};
  return g;
}

// Chain 1-2-3 plus a parallel 1-2 line; outaging 2-3 islands bus 3.
GridModel chain() {
  GridModel g;
  g.buses = {{1, nnv::BusType::Slack}, {2, nnv::BusType::PQ}, {3, nnv::BusType::PQ}};
  g.branches = {{1, 2, 0.1, 500, true}, {1, 2, 0.1, 500, true}, {2, 3, 0.1, 500, true}};
  g.generators = {{1, 0.0, 1000.0, true}};
  g.inputs = {{nnv::InputKind::Load, 3, 0.0, 100.0, "L"}};
  return g;
}

Vector uniform(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(n);
  for (int i = 0; i < n; ++i) x(i) = u(rng);
  return x;
}

TEST(GridModel, FixtureLoads) {
  const auto& g = nine_bus();
  EXPECT_EQ(g.num_buses(), 9);
  EXPECT_EQ(g.branches.size(), 9u);
  EXPECT_EQ(g.num_inputs(), 4);
  EXPECT_EQ(g.contingencies.size(), 6u);
  EXPECT_EQ(g.slack_generator().bus, 1);
}

TEST(GridModel, LoaderRejectsBrokenFiles) {
  const auto good = nnv::read_json_file(NNV_DATA_DIR "/ieee9_modified.json");
  auto j = good;
  j.erase("branches");
  EXPECT_THROW(nnv::grid_from_json(j), nnv::DataError);
  j = good;
  j["generators"][1]["slack"] = true;
  EXPECT_THROW(nnv::grid_from_json(j), nnv::DataError);
  j = good;
  j["contingencies"].push_back(42);
  EXPECT_THROW(nnv::grid_from_json(j), nnv::DataError);
  j = good;
  j["inputs"][0]["p_max"] = 0.0;
  EXPECT_THROW(nnv::grid_from_json(j), nnv::DataError);
  j = good;
  j["branches"][0]["in_service"] = false;  // bus 1 only connects through this branch
  EXPECT_THROW(nnv::grid_from_json(j), nnv::DataError);
}

TEST(DcPowerFlow, ZeroInjectionsGiveZeroFlows) {
  auto g = nine_bus();
  g.fixed_loads.clear();
  const auto pf = nnv::dc_power_flow(g, Vector::Zero(4));
  EXPECT_FALSE(pf.islanded);
  EXPECT_NEAR(pf.theta.cwiseAbs().maxCoeff(), 0.0, 1e-15);
  for (double f : pf.flows) EXPECT_NEAR(f, 0.0, 1e-12);
  EXPECT_NEAR(pf.slack_p, 0.0, 1e-12);
  EXPECT_EQ(nnv::classify_n1(g, Vector::Zero(4)), ClassLabel::Safe);
}

TEST(DcPowerFlow, TwoBusClosedForm) {
  const auto g = two_bus(0.1);
  const auto pf = nnv::dc_power_flow(g, Vector::Constant(1, 0.5));
  EXPECT_NEAR(pf.flows[0], 100.0, 1e-10);
  EXPECT_NEAR(pf.theta(0) - pf.theta(1), 0.1 * 100.0 / 100.0, 1e-12);
  EXPECT_NEAR(pf.slack_p, 100.0, 1e-12);
}

TEST(DcPowerFlow, NodalBalanceAndEnergyBalance) {
  const auto& g = nine_bus();
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = uniform(rng, 4);
    const Vector inj = g.injections(x);
    for (int c : g.cases()) {
      const auto pf = nnv::dc_power_flow(g, x, c);
      ASSERT_FALSE(pf.islanded);
      Vector out = Vector::Zero(g.num_buses());
      for (std::size_t k = 0; k < g.branches.size(); ++k) {
        out(g.bus_index(g.branches[k].from)) += pf.flows[k];
        out(g.bus_index(g.branches[k].to)) -= pf.flows[k];
      }
      Vector net = inj;
      net(g.bus_index(1)) += pf.slack_p;
      EXPECT_LE((out - net).cwiseAbs().maxCoeff(), 1e-8);
      // generation (slack included) equals load
      double gen = pf.slack_p, load = 0.0;
      const Vector mw = g.to_mw(x);
      for (int i = 0; i < 4; ++i) (g.inputs[i].kind == nnv::InputKind::Load ? load : gen) += mw(i);
      for (const auto& l : g.fixed_loads) load += l.p_mw;
      EXPECT_NEAR(gen, load, 1e-8);
      if (c >= 0) EXPECT_EQ(pf.flows[static_cast<std::size_t>(c)], 0.0);
    }
  }
}

TEST(DcPowerFlow, DetectsIslanding) {
  const auto g = chain();
  EXPECT_FALSE(nnv::dc_power_flow(g, Vector::Constant(1, 0.5), 0).islanded);
  EXPECT_TRUE(nnv::dc_power_flow(g, Vector::Constant(1, 0.5), 2).islanded);
  auto with_bridge = g;
  with_bridge.contingencies = {0};
  EXPECT_EQ(nnv::classify_n1(with_bridge, Vector::Constant(1, 0.5)), ClassLabel::Safe);
  with_bridge.contingencies = {0, 2};
  EXPECT_EQ(nnv::classify_n1(with_bridge, Vector::Constant(1, 0.5)), ClassLabel::Unsafe);
  EXPECT_EQ(enumerate_n1(with_bridge, Vector::Constant(1, 0.5)), ClassLabel::Unsafe);
}

// Largest violation over every case, in MW, computed from raw power flows.
double worst_violation(const GridModel& g, const Vector& x) {
  double worst = -nnv::kInf;
  for (int c : g.cases()) {
    const auto pf = nnv::dc_power_flow(g, x, c);
    const auto& s = g.slack_generator();
    worst = std::max({worst, pf.slack_p - s.p_max, s.p_min - pf.slack_p});
    for (std::size_t k = 0; k < g.branches.size(); ++k)
      if (g.branch_active(static_cast<int>(k), c)) worst = std::max(worst, std::abs(pf.flows[k]) - g.branches[k].limit_mw);
  }
  return worst;
}

TEST(ClassifyN1, OneMegawattPastTheLimitIsUnsafe) {
  const auto& g = nine_bus();
  // A safe point, then push wind up until some limit is exceeded by exactly 1 MW.
  Vector x0(4);
  x0 << 0.3, 0.3, 0.5, 0.2;
  ASSERT_EQ(nnv::classify_n1(g, x0), ClassLabel::Safe);
  const Vector dir = (Vector(4) << 0.0, 0.0, -0.5, 1.0).finished();
  auto at = [&](double t) { return Vector(x0 + t * dir); };
  ASSERT_GT(worst_violation(g, at(0.75)), 1.0);
  auto solve_for = [&](double target) {
    double lo = 0.0, hi = 0.75;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (worst_violation(g, at(mid)) < target ? lo : hi) = mid;
    }
    return at(hi);
  };
  EXPECT_EQ(nnv::classify_n1(g, solve_for(1.0)), ClassLabel::Unsafe);
  EXPECT_EQ(nnv::classify_n1(g, solve_for(-1.0)), ClassLabel::Safe);
  // Inclusive limits with the 1e-6 MW tolerance.
  EXPECT_EQ(nnv::classify_n1(g, solve_for(0.5e-6)), ClassLabel::Safe);
}

TEST(ClassifyN1, MatchesIndependentEnumerationAndPinnedLp) {
  const auto& g = nine_bus();
  const auto d = nnv::generate_dataset(g, 500, 12, 0.85);
  int safe = 0;
  for (int i = 0; i < d.size(); ++i) {
    const Vector x = d.row(i);
    const auto label = nnv::classify_n1(g, x);
    EXPECT_EQ(label, enumerate_n1(g, x)) << "row " << i;
    EXPECT_EQ(label, pinned_lp(g, x)) << "row " << i;
    safe += label == ClassLabel::Safe;
  }
  EXPECT_GT(safe, 0);
  EXPECT_LT(safe, d.size());
}

TEST(ClassifyN1, ScreenAgreesWithPowerFlow) {
  const auto& g = nine_bus();
  const nnv::N1Screen screen(g);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 3000; ++i) {
    const Vector x = uniform(rng, 4);
    EXPECT_EQ(screen.classify(x), nnv::classify_n1(g, x));
  }
}

TEST(GenerateDataset, StratifiedDeterministicAndSplit) {
  const auto& g = nine_bus();
  const int n = 400;
  const auto a = nnv::generate_dataset(g, n, 3);
  const auto b = nnv::generate_dataset(g, n, 3);
  std::ostringstream sa, sb;
  nnv::write_dataset_csv(a, sa);
  nnv::write_dataset_csv(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  for (int j = 0; j < 4; ++j) {
    std::vector<int> hits(n, 0);
    for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(std::min(n - 1, static_cast<int>(a.inputs(i, j) * n)))];
    EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; })) << "dim " << j;
  }
  EXPECT_EQ(a.indices(nnv::Split::Train).size(), 340u);
  EXPECT_EQ(a.indices(nnv::Split::Test).size(), 60u);
  for (int i = 0; i < n; ++i) EXPECT_EQ(a.labels[i], nnv::classify_n1(g, a.row(i)));
  const auto c = nnv::generate_dataset(g, n, 4);
  EXPECT_NE(a.inputs, c.inputs);
  EXPECT_THROW(nnv::generate_dataset(g, 1, 3), nnv::ConfigError);
}

TEST(GenerateDataset, BothClassesPresent) {
  const auto d = nnv::generate_dataset(nine_bus(), 10000, 1);
  const int safe = d.count(ClassLabel::Safe, nnv::Split::Train) + d.count(ClassLabel::Safe, nnv::Split::Test);
  EXPECT_GT(safe, 0);
  EXPECT_LT(safe, d.size());
  std::cout << "safe share " << static_cast<double>(safe) / d.size() << "\n";
}

TEST(GroundTruth, DistanceFromAllMaxPoint) {
  const auto& g = nine_bus();
  const auto r = nnv::scdcopf_ground_truth_distance(g, Vector::Ones(4));
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.value, 0.537, 0.01);
  EXPECT_EQ(nnv::classify_n1(g, r.x), ClassLabel::Safe);
  EXPECT_NEAR((r.x - Vector::Ones(4)).cwiseAbs().maxCoeff(), r.value, 1e-7);

  // No safe point strictly inside the ball.
  std::mt19937_64 rng(21);
  const double rad = r.value * (1.0 - 1e-3);
  std::uniform_real_distribution<double> u(1.0 - rad, 1.0);
  for (int i = 0; i < 10000; ++i) {
    Vector x(4);
    for (int k = 0; k < 4; ++k) x(k) = u(rng);
    ASSERT_EQ(nnv::classify_n1(g, x), ClassLabel::Unsafe);
  }
}

TEST(GroundTruth, SafePointHasZeroDistance) {
  const auto& g = nine_bus();
  Vector x(4);
  x << 0.3, 0.3, 0.5, 0.2;
  ASSERT_EQ(nnv::classify_n1(g, x), ClassLabel::Safe);
  EXPECT_NEAR(nnv::scdcopf_ground_truth_distance(g, x).value, 0.0, 1e-9);
}

TEST(GroundTruth, MoreContingenciesNeverShrinkDistance) {
  auto g = nine_bus();
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = uniform(rng, 4);
    auto partial = g;
    double prev = 0.0;
    for (std::size_t k = 0; k <= g.contingencies.size(); ++k) {
      partial.contingencies.assign(g.contingencies.begin(), g.contingencies.begin() + static_cast<long>(k));
      const double e = nnv::scdcopf_ground_truth_distance(partial, x).value;
      EXPECT_GE(e, prev - 1e-9);
      prev = e;
    }
  }
}

TEST(GroundTruth, MaximumWindInfeed) {
  const auto& g = nine_bus();
  const auto r = nnv::max_wind_ground_truth(g, 3);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.value, 0.925, 0.01);
  EXPECT_NEAR(r.mw, 277.5, 3.0);
  EXPECT_EQ(nnv::classify_n1(g, r.x), ClassLabel::Safe);
  const auto relaxed = nnv::max_wind_ground_truth(g, 3, nnv::kInf);
  ASSERT_TRUE(relaxed.feasible);
  EXPECT_GE(relaxed.mw, r.mw - 1e-9);
  EXPECT_THROW(nnv::max_wind_ground_truth(g, 0), nnv::ConfigError);
}

TEST(SamplingEstimate, SlackLimitBoundsTheOriginBall) {
  const auto& g = nine_bus();
  // Near the origin the slack unit supplies 215 MW of fixed load plus 200 x_3;
  // its 250 MW limit caps any all-safe ball at x_3 = 35/200 = 0.175.
  const auto est = nnv::safe_region_sampling_estimate(g, Vector::Zero(4), 0.025);
  EXPECT_LE(est.radius, 0.175 + 1e-12);
  EXPECT_GE(est.radius, 0.175 - 0.025 - 1e-12);
  ASSERT_TRUE(est.first_unsafe.has_value());
  EXPECT_EQ(nnv::classify_n1(g, *est.first_unsafe), ClassLabel::Unsafe);
}

TEST(SamplingEstimate, RefinementAndAudit) {
  const auto& g = nine_bus();
  Vector x(4);
  x << 0.3, 0.3, 0.5, 0.2;
  const auto coarse = nnv::safe_region_sampling_estimate(g, x, 0.02);
  const auto fine = nnv::safe_region_sampling_estimate(g, x, 0.01);
  EXPECT_LE(std::abs(coarse.radius - fine.radius), 0.02 + 1e-12);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-fine.radius, fine.radius);
  for (int i = 0; i < 5000; ++i) {
    Vector p = x;
    for (int k = 0; k < 4; ++k) p(k) = std::clamp(p(k) + u(rng), 0.0, 1.0);
    // The lattice misses points between nodes; anything found here must sit
    // within one lattice step of the boundary.
    if (nnv::classify_n1(g, p) == ClassLabel::Unsafe)
      EXPECT_GT((p - x).cwiseAbs().maxCoeff(), fine.radius - 0.01);
  }
  EXPECT_THROW(nnv::safe_region_sampling_estimate(g, Vector::Ones(4), 0.1), nnv::ConfigError);
}

TEST(PowerBalance, HandDenormalization) {
  const auto& g = nine_bus();
  const auto rows = nnv::power_balance_constraint(g);
  ASSERT_EQ(rows.size(), 2u);
  // slack(x) = 90 + 125 + 200 x3 - 300 x1 - 270 x2 - 300 x4, limits [0, 250]
  EXPECT_DOUBLE_EQ(rows[0].a(0), -300.0);
  EXPECT_DOUBLE_EQ(rows[0].a(1), -270.0);
  EXPECT_DOUBLE_EQ(rows[0].a(2), 200.0);
  EXPECT_DOUBLE_EQ(rows[0].a(3), -300.0);
  EXPECT_DOUBLE_EQ(rows[0].b, 250.0 - 215.0);
  EXPECT_EQ(rows[1].a, -rows[0].a);
  EXPECT_DOUBLE_EQ(rows[1].b, 215.0);
  // All-max dispatch: slack would be 215 + 200 - 870 = -455 MW, below its minimum.
  EXPECT_DOUBLE_EQ(215.0 + rows[0].a.sum(), -455.0);
  EXPECT_GT(rows[1].a.sum(), rows[1].b);
}

TEST(PowerBalance, SecurePointsSatisfyRows) {
  const auto& g = nine_bus();
  const auto rows = nnv::power_balance_constraint(g);
  std::mt19937_64 rng(13);
  int safe = 0;
  for (int i = 0; i < 5000; ++i) {
    const Vector x = uniform(rng, 4);
    if (nnv::classify_n1(g, x) != ClassLabel::Safe) continue;
    ++safe;
    for (const auto& r : rows) EXPECT_LE(r.a.dot(x), r.b + 1e-9);
  }
  EXPECT_GT(safe, 100);
}

TEST(DatasetCsv, RoundTripAndDiagnostics) {
  const auto d = nnv::generate_dataset(nine_bus(), 30, 5);
  std::stringstream ss;
  nnv::write_dataset_csv(d, ss);
  const auto back = nnv::read_dataset_csv(ss);
  EXPECT_EQ(back.inputs, d.inputs);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.split, d.split);

  std::istringstream bad_header("a,b,label,split\n");
  EXPECT_THROW(nnv::read_dataset_csv(bad_header), nnv::DataError);
  std::istringstream bad_row("x_1,label,split\n0.5,safe,train\n1.5,safe,train\n");
  try {
    nnv::read_dataset_csv(bad_row);
    FAIL();
  } catch (const nnv::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::istringstream bad_label("x_1,label,split\n0.5,maybe,train\n");
  EXPECT_THROW(nnv::read_dataset_csv(bad_label), nnv::DataError);
}

}  // namespace
