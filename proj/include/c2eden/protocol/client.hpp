#ifndef C2EDEN_PROTOCOL_CLIENT_HPP
#define C2EDEN_PROTOCOL_CLIENT_HPP

// Client side of the C2EDEN exchange. The client only ever evaluates its
// local gradient and one local Hessian column per round; it holds two
// d-vectors of state (current iterate and snapshot point).
//
// Driven entirely by server messages:
//   Start{K, M, d, n, id}  remember the schedule and our id
//   Broadcast{0, x0}       setup: send the d warm-up columns at x0, then the
//                          report for round d (x_d = x0)
//   Broadcast{k, x_k}      k > d: refresh the snapshot when k % d == 0 and
//                          send the report for round k, unless k == K
//   Stop                   done

#include <vector>

#include "c2eden/error.hpp"
#include "c2eden/objective.hpp"
#include "c2eden/protocol/message.hpp"

namespace c2eden::protocol {

class C2edenClient {
 public:
  explicit C2edenClient(const ClientShard& shard) : shard_(&shard) {}

  ClientId id() const noexcept { return id_; }
  bool stopped() const noexcept { return stopped_; }

  std::vector<Message> handle(const Message& m) {
    if (stopped_) throw ProtocolError("message after Stop", last_round_, id_);
    std::vector<Message> out;
    if (const auto* s = std::get_if<Start>(&m)) {
      if (started_) throw ProtocolError("duplicate Start", 0, id_);
      if (s->d != static_cast<std::uint32_t>(shard_->dim()))
        throw ProtocolError("Start announces d=" + std::to_string(s->d) + " but shard has d=" +
                                std::to_string(shard_->dim()),
                            0, s->assigned);
      started_ = true;
      id_ = s->assigned;
      K_ = s->K;
      d_ = s->d;
    } else if (const auto* b = std::get_if<Broadcast>(&m)) {
      if (!started_) throw ProtocolError("Broadcast before Start", b->round, id_);
      require_dim(b->x, d_, "broadcast iterate");
      if (!initialized_) {
        if (b->round != 0) throw ProtocolError("expected setup broadcast of x0", b->round, id_);
        initialized_ = true;
        x_ = b->x;
        snapshot_ = b->x;
        for (std::uint32_t k = 0; k < d_; ++k)
          out.push_back(WarmupReport{id_, k, hessian_column(*shard_, snapshot_, k)});
        last_round_ = d_;
        if (d_ < K_) out.push_back(report(d_));
      } else {
        if (b->round <= last_round_)
          throw ProtocolError("non-monotone broadcast round", b->round, id_);
        last_round_ = b->round;
        x_ = b->x;
        if (b->round % d_ == 0) snapshot_ = x_;
        if (b->round < K_) out.push_back(report(b->round));
      }
    } else if (std::holds_alternative<Stop>(m)) {
      stopped_ = true;
    } else {
      throw ProtocolError("client received a client-to-server message", last_round_, id_);
    }
    return out;
  }

 private:
  Message report(Round k) const {
    return ClientReport{id_, k, gradient(*shard_, x_), hessian_column(*shard_, snapshot_, k % d_)};
  }

  const ClientShard* shard_;
  ClientId id_ = 0;
  std::uint32_t K_ = 0;
  std::uint32_t d_ = 0;
  Vec x_;
  Vec snapshot_;
  Round last_round_ = 0;
  bool started_ = false;
  bool initialized_ = false;
  bool stopped_ = false;
};

}  // namespace c2eden::protocol

#endif  // C2EDEN_PROTOCOL_CLIENT_HPP
