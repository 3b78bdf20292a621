#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "c2eden/algorithms/c2eden_run.hpp"
#include "c2eden/objective_full.hpp"
#include "c2eden/protocol/client.hpp"
#include "c2eden/protocol/ledger.hpp"
#include "c2eden/protocol/message.hpp"
#include "c2eden/protocol/server.hpp"
#include "c2eden/protocol/transport.hpp"
#include "test_util.hpp"

using namespace c2eden;
using namespace c2eden::protocol;

namespace {

std::vector<ClientShard> toy_shards(std::uint32_t n, double lambda = 1e-3) {
  return partition(test::toy(), n, 1, lambda, Regularizer::L2);
}

// Records every step so tests can inspect the server state at each round.
struct Recorder : RoundObserver {
  struct Step {
    Round k;
    Vec x, snapshot, g, y;
    Round hessian_round;
    SymMat H;
  };
  std::vector<Step> steps;
  std::vector<Vec> iterates;
  std::vector<RoundCounts> cumulative;
  void on_iterate(Round k, const Vec& x, const CommLedger& ledger) override {
    EXPECT_EQ(k, iterates.size());
    iterates.push_back(x);
    cumulative.push_back(ledger.cumulative(k));
  }
  void on_step(const StepEvent& e) override {
    steps.push_back({e.k, e.x, e.x_snapshot, e.g, e.step.y, e.hessian_round, e.H});
  }
};

// Forwards to an in-process transport but silently loses one client's
// reports from a given round on.
class LossyTransport final : public ServerTransport {
 public:
  LossyTransport(std::span<const ClientShard> shards, ClientId victim, Round from)
      : inner_(shards), victim_(victim), from_(from) {}
  std::uint32_t clients() const override { return inner_.clients(); }
  void send(ClientId to, const Message& m) override { inner_.send(to, m); }
  Message receive(Round round) override {
    for (;;) {
      Message m = inner_.receive(round);
      if (const auto* r = std::get_if<ClientReport>(&m); r && r->client == victim_ && r->round >= from_) continue;
      return m;
    }
  }

 private:
  InProcessTransport inner_;
  ClientId victim_;
  Round from_;
};

}  // namespace

TEST(Wire, BroadcastLayout) {
  Vec x(2);
  x << 0.0, 1.0;
  const auto bytes = wire_encode(Broadcast{7, x});
  ASSERT_EQ(bytes.size(), 4u + 9u + 16u);
  EXPECT_EQ(std::to_integer<int>(bytes[0]), 25);  // 16 + 9
  EXPECT_EQ(std::to_integer<int>(bytes[1]), 0);
  EXPECT_EQ(std::to_integer<int>(bytes[4]), 1);   // tag
  EXPECT_EQ(std::to_integer<int>(bytes[5]), 7);   // round, little-endian
  EXPECT_EQ(std::to_integer<int>(bytes[9]), 0);   // client id for server messages
  // 1.0 = 0x3FF0000000000000, little-endian
  EXPECT_EQ(std::to_integer<int>(bytes[4 + 9 + 8 + 7]), 0x3F);
  EXPECT_EQ(std::to_integer<int>(bytes[4 + 9 + 8 + 6]), 0xF0);
  EXPECT_EQ(frame_bytes(Broadcast{7, x}), bytes.size());
}

TEST(Wire, RandomRoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const Index d = 1 + static_cast<Index>(rng() % 40);
    Vec g = test::random_vec(rng, d, 1e3), v = test::random_vec(rng, d, 1e-3);
    if (t % 7 == 0) g[0] = -0.0;
    if (t % 11 == 0) v[0] = std::numeric_limits<double>::denorm_min();
    const Message m = ClientReport{static_cast<ClientId>(rng()), static_cast<Round>(rng()), g, v};
    EXPECT_TRUE(bit_equal(wire_decode(wire_encode(m)), m));
  }
  for (const Message& m :
       {Message{Start{120, 0.5, 10, 4, 3}}, Message{Stop{9}}, Message{WarmupReport{2, 3, Vec::Ones(5)}},
        Message{Broadcast{0, Vec::Zero(1)}}})
    EXPECT_TRUE(bit_equal(wire_decode(wire_encode(m)), m));
}

TEST(Wire, DecodeErrors) {
  auto frame = wire_encode(Broadcast{1, Vec::Ones(3)});
  for (std::size_t cut : {0u, 3u, 4u, 12u, 20u}) {
    std::vector<std::byte> part(frame.begin(), frame.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(wire_decode(part), FrameError) << "cut=" << cut;
  }
  auto extra = frame;
  extra.push_back(std::byte{0});
  EXPECT_THROW(wire_decode(extra), FrameError);
  auto bad_tag = frame;
  bad_tag[4] = std::byte{9};
  EXPECT_THROW(wire_decode(bad_tag), FrameError);
  auto odd = wire_encode(Broadcast{1, Vec::Ones(3)});
  odd[4] = std::byte{2};  // ClientReport needs an even payload
  EXPECT_THROW(wire_decode(odd), FrameError);

  // Body of 2^32 - 15 bytes: a whole number of doubles, but past the 2^31 cap.
  std::vector<std::byte> huge{std::byte{0xF1}, std::byte{0xFF}, std::byte{0xFF}, std::byte{0xFF}};
  EXPECT_THROW(read_length_prefix(huge), FrameError);
  std::vector<std::byte> small{std::byte{3}, std::byte{0}, std::byte{0}, std::byte{0}};
  EXPECT_THROW(read_length_prefix(small), FrameError);
  EXPECT_THROW(wire_encode(ClientReport{0, 0, Vec::Ones(2), Vec::Ones(3)}), FrameError);
}

TEST(Ledger, CumulativeIsSumOfRounds) {
  CommLedger l;
  l.record_up(0, 5, 53);
  l.record_up(2, 7, 69);
  l.record_broadcast(2, 3, 37, 4);
  l.record_setup_down(10, 93);
  EXPECT_EQ(l.cumulative(3), l.total());
  EXPECT_EQ(l.cumulative(1).up_scalars, 5u);
  EXPECT_EQ(l.total().down_bytes, 148u);
  EXPECT_EQ(l.total().down_messages, 4u);
  EXPECT_EQ(l.setup().down_scalars, 10u);
}

TEST(Server, WarmupFillsExactHessian) {
  for (std::uint32_t n : {1u, 3u}) {
    const auto shards = toy_shards(n);
    const Index d = shards[0].dim();
    InProcessTransport tx(shards);
    C2edenServer server(tx, ServerConfig{static_cast<std::uint32_t>(2 * d), 1.0, 0.0, 0.0});
    std::mt19937_64 rng(2);
    const Vec x0 = test::random_vec(rng, d, 0.3);
    server.start(x0);
    server.run_warmup_epoch();
    const auto& st = server.state();
    const SymMat ref = global_hessian(shards, x0);
    EXPECT_LE((st.H_plus.dense() - ref.dense()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(st.x == x0);
    EXPECT_EQ(st.ledger.cumulative(static_cast<std::uint32_t>(d)).up_scalars, n * d * d);
    EXPECT_EQ(st.ledger.cumulative(static_cast<std::uint32_t>(d)).down_scalars, 0u);
  }
}

TEST(Server, SingleDimensionWarmupIsOneRound) {
  FeatureMatrix a(4, 1);
  a << 1, -2, 0.5, 3;
  Vec b(4);
  b << 1, -1, -1, 1;
  const std::vector<ClientShard> shards{ClientShard(a, b, 0.1, Regularizer::L2)};
  InProcessTransport tx(shards);
  Recorder rec;
  C2edenServer server(tx, ServerConfig{4, 1.0, 0.0, 0.0}, &rec);
  server.run(Vec::Zero(1));
  ASSERT_EQ(rec.iterates.size(), 5u);
  EXPECT_TRUE(rec.iterates[1] == rec.iterates[0]);  // x_d = x_0 after the single warm-up round
  EXPECT_EQ(rec.steps.front().k, 1u);
  EXPECT_EQ(server.state().ledger.total().up_scalars, 1u + 2u * 3u);
}

TEST(Server, PerRoundCountsAndLedgerLaw) {
  for (std::uint32_t n : {1u, 2u, 5u}) {
    for (std::uint32_t K : {11u, 30u, 47u}) {
      const auto shards = toy_shards(n);
      const std::uint64_t d = 10;
      InProcessTransport tx(shards);
      C2edenServer server(tx, ServerConfig{K, 1.0, 0.0, 0.0});
      const auto res = server.run(Vec::Zero(10));
      EXPECT_EQ(res.rounds, K);
      const auto& l = server.state().ledger;
      EXPECT_EQ(l.total().up_scalars, n * d * d + 2 * n * d * (K - d));
      EXPECT_EQ(l.total().down_scalars, d * (K - d));
      for (std::uint32_t k = 10; k < K; ++k) {
        EXPECT_EQ(l.per_round()[k].up_scalars, 2 * d * n);
        EXPECT_EQ(l.per_round()[k].up_messages, n);
        EXPECT_EQ(l.per_round()[k].down_scalars, d);
        EXPECT_EQ(l.per_round()[k].down_bytes, n * (13 + 8 * d));
      }
    }
  }
}

TEST(Server, SnapshotScheduleMatchesStaleHessian) {
  const auto shards = toy_shards(3);
  const Index d = 10;
  InProcessTransport tx(shards);
  Recorder rec;
  C2edenServer server(tx, ServerConfig{5 * 10, 1.0, 0.0, 0.0}, &rec);
  server.run(Vec::Zero(d));
  ASSERT_EQ(rec.steps.size(), 40u);
  for (const auto& s : rec.steps) {
    const Round t = 10 * (s.k / 10 - 1);
    EXPECT_EQ(s.hessian_round, t);
    EXPECT_TRUE(s.snapshot == rec.iterates[s.k - s.k % 10]);
    const SymMat ref = global_hessian(shards, rec.iterates[t]);
    EXPECT_LE((s.H.dense() - ref.dense()).cwiseAbs().maxCoeff(), 1e-12) << "k=" << s.k;
    if (s.k < 20) {
      EXPECT_TRUE(s.H == rec.steps.front().H);  // first main epoch: Hessian at x_0
    }
  }
}

TEST(Server, ArrivalOrderDoesNotChangeResults) {
  const auto shards = toy_shards(4);
  auto run = [&](InProcessOptions opts) {
    InProcessTransport tx(shards, opts);
    Recorder rec;
    C2edenServer server(tx, ServerConfig{40, 1.0, 0.0, 0.0}, &rec);
    server.run(Vec::Zero(10));
    return rec.iterates;
  };
  const auto base = run({});
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    const auto other = run({true, seed});
    ASSERT_EQ(other.size(), base.size());
    for (std::size_t k = 0; k < base.size(); ++k) EXPECT_TRUE(bit_equal(other[k], base[k]));
  }
}

TEST(Server, MissingReportAbortsWithRound) {
  const auto shards = toy_shards(3);
  LossyTransport tx(shards, 1, 14);
  C2edenServer server(tx, ServerConfig{30, 1.0, 0.0, 0.0});
  try {
    server.run(Vec::Zero(10));
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.round(), 14u);
  }
}

TEST(Server, NewtonModeOnIndefiniteHessianNamesRound) {
  std::mt19937_64 rng(3);
  const std::vector<ClientShard> shards{test::random_shard(rng, 30, 4, 2.0, Regularizer::SmoothNonconvex)};
  // Start where the nonconvex regularizer dominates with negative curvature.
  Vec x0 = Vec::Constant(4, 1.0);
  InProcessTransport tx(shards);
  C2edenServer server(tx, ServerConfig{12, 0.0, 0.0, 0.0});
  ASSERT_LT(min_eigenvalue(global_hessian(shards, x0)), 0.0);
  try {
    server.run(x0);
    FAIL() << "expected NotPositiveDefinite";
  } catch (const NotPositiveDefinite& e) {
    EXPECT_NE(std::string(e.what()).find("round 4"), std::string::npos) << e.what();
  }
}

TEST(Server, RejectsBadConfiguration) {
  const auto shards = toy_shards(2);
  InProcessTransport tx(shards);
  EXPECT_THROW(C2edenServer(tx, ServerConfig{10, -1.0, 0.0, 0.0}), Error);
  C2edenServer server(tx, ServerConfig{10, 1.0, 0.0, 0.0});
  EXPECT_THROW(server.run(Vec::Zero(10)), Error);  // K must exceed d
}

TEST(Server, GradientToleranceStopsEarly) {
  const auto shards = toy_shards(2);
  InProcessTransport tx(shards);
  Recorder rec;
  C2edenServer server(tx, ServerConfig{200, 1.0, 1e-6, 0.0}, &rec);
  const auto res = server.run(Vec::Zero(10));
  EXPECT_TRUE(res.stopped_early);
  EXPECT_LT(res.rounds, 200u);
  EXPECT_LE(global_gradient(shards, res.x).norm(), 1e-6);
  EXPECT_GT(global_gradient(shards, rec.iterates[res.rounds - 1]).norm(), 1e-6);
}

TEST(Server, StationaryStartTakesZeroSteps) {
  // Ridge-regularized least squares with zero labels: x = 0 is the minimizer.
  std::mt19937_64 rng(4);
  FeatureMatrix a(20, 3);
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 3; ++j) a(i, j) = std::normal_distribution<double>()(rng);
  const std::vector<ClientShard> shards{ClientShard(a, Vec::Zero(20), 0.1, Regularizer::L2, Loss::Squared),
                                        ClientShard(a, Vec::Zero(20), 0.1, Regularizer::L2, Loss::Squared)};
  for (double M : {0.0, 1.0}) {
    InProcessTransport tx(shards);
    Recorder rec;
    C2edenServer server(tx, ServerConfig{9, M, 0.0, 0.0}, &rec);
    server.run(Vec::Zero(3));
    for (const auto& x : rec.iterates) EXPECT_EQ(x.norm(), 0.0);
  }
}

TEST(Client, RejectsOutOfOrderTraffic) {
  const auto shards = toy_shards(1);
  C2edenClient c(shards[0]);
  EXPECT_THROW(c.handle(Broadcast{0, Vec::Zero(10)}), ProtocolError);  // before Start
  EXPECT_TRUE(c.handle(Start{20, 1.0, 10, 1, 0}).empty());
  EXPECT_THROW(c.handle(Start{20, 1.0, 10, 1, 0}), ProtocolError);
  EXPECT_THROW(c.handle(Broadcast{3, Vec::Zero(10)}), ProtocolError);  // first broadcast must be x_0
  const auto out = c.handle(Broadcast{0, Vec::Zero(10)});
  EXPECT_EQ(out.size(), 11u);  // d warm-up columns plus the report for round d
  EXPECT_THROW(c.handle(Broadcast{10, Vec::Zero(10)}), ProtocolError);  // not after round d
  EXPECT_EQ(c.handle(Broadcast{11, Vec::Zero(10)}).size(), 1u);
  EXPECT_THROW(c.handle(ClientReport{}), ProtocolError);
  EXPECT_TRUE(c.handle(Stop{20}).empty());
  EXPECT_TRUE(c.stopped());
  EXPECT_THROW(c.handle(Stop{20}), ProtocolError);

  C2edenClient wrong(shards[0]);
  EXPECT_THROW(wrong.handle(Start{20, 1.0, 11, 1, 0}), ProtocolError);
}
