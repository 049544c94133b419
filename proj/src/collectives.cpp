#include "collsim/collectives.hpp"

#include <algorithm>
#include <stdexcept>

namespace collsim::collectives {

using valuemodel::DatatypeKind;
using valuemodel::in_place;
using valuemodel::make_local_op;

int log2floor(int n) {
  int p = 0;
  while (n > 0) {
    n >>= 1;
    p++;
  }
  return p - 1;
}

int pof2(int n) {
  if (n > 0) {
    return 1 << log2floor(n);
  }
  return 0;
}

RdTopology rd_topology(int comm_size) {
  if (comm_size < 1) throw std::invalid_argument("rd_topology: comm_size must be >= 1");
  RdTopology t;
  t.comm_size = comm_size;
  t.pof2 = pof2(comm_size);
  t.rem = comm_size - t.pof2;
  t.newrank.resize(static_cast<std::size_t>(comm_size));
  for (int rank = 0; rank < comm_size; ++rank) {
    if (rank < 2 * t.rem)
      t.newrank[static_cast<std::size_t>(rank)] = (rank % 2 == 0) ? -1 : rank / 2;
    else
      t.newrank[static_cast<std::size_t>(rank)] = rank - t.rem;
  }
  return t;
}

ChunkRange chunk_range(std::int64_t count, int nchunks, int chunk) {
  if (nchunks < 1 || chunk < 0 || chunk >= nchunks)
    throw std::invalid_argument("chunk_range: bad chunk index");
  if (count < 0) throw std::invalid_argument("chunk_range: negative count");
  const std::int64_t q = count / nchunks;
  const std::int64_t r = count % nchunks;
  const std::int64_t begin = chunk * q + std::min<std::int64_t>(chunk, r);
  const std::int64_t size = q + (chunk < r ? 1 : 0);
  return ChunkRange{begin, begin + size};
}

namespace {

// Elements spanned by chunks [chunk_lo, chunk_hi).
ChunkRange element_span(std::int64_t count, int nchunks, int chunk_lo, int chunk_hi) {
  if (chunk_lo >= chunk_hi) return ChunkRange{0, 0};
  return ChunkRange{chunk_range(count, nchunks, chunk_lo).begin,
                    chunk_range(count, nchunks, chunk_hi - 1).end};
}

// Scratch sized by the extent model: count * max(extent, true_extent) bytes.
// The true lower bound is 0 for every datatype here, so no base adjustment.
Buffer make_scratch(DatatypeKind dt, std::int64_t count) {
  const auto [true_lb, true_extent] = valuemodel::type_true_extent(dt);
  const std::int64_t extent = valuemodel::type_size(dt);
  const std::int64_t bytes = count * std::max<std::int64_t>(extent, true_extent);
  return Buffer::zeros(dt, bytes / extent);
}

void validate_collective_args(const Buffer* sendbuf, const Buffer& recvbuf,
                              const AllreduceParams& params) {
  if (params.count < 0) throw std::invalid_argument("allreduce: negative count");
  if (recvbuf.count() != params.count || recvbuf.datatype() != params.datatype)
    throw std::invalid_argument("allreduce: recvbuf does not match params");
  if (sendbuf == nullptr) throw std::invalid_argument("allreduce: null sendbuf");
  if (sendbuf != in_place() &&
      (sendbuf->count() != params.count || sendbuf->datatype() != params.datatype))
    throw std::invalid_argument("allreduce: sendbuf does not match params");
}

}  // namespace

Task allreduce_oracle_op(Rank& self, const Buffer& sendbuf, Buffer& result,
                         const LocalReduceOp& op, int tag) {
  const int rank = self.rank();
  const int size = self.size();

  result = sendbuf;  // own contribution
  if (rank == 0) {
    Buffer tmp = Buffer::zeros(sendbuf.datatype(), sendbuf.count());
    for (int src = 1; src < size; ++src) {
      co_await self.recv_into(src, tag, tmp);
      // keep the accumulated value as the left operand: fold ascending
      self.reduce_local(result, tmp, op);
      self.local_copy(tmp, result);
    }
    for (int dst = 1; dst < size; ++dst) co_await self.send(dst, tag, result);
  } else {
    co_await self.send(0, tag, result);
    co_await self.recv_into(0, tag, result);
  }
}

Task allreduce_oracle(Rank& self, const Buffer& sendbuf, Buffer& result,
                      AllreduceParams params) {
  validate_collective_args(&sendbuf, sendbuf, params);
  result = Buffer::zeros(params.datatype, params.count);
  const LocalReduceOp op = make_local_op(params.op);
  co_await allreduce_oracle_op(self, sendbuf, result, op, kOracleTag);
}

Task allreduce_recursive_doubling_op(Rank& self, const Buffer* sendbuf, Buffer& recvbuf,
                                     const LocalReduceOp& op, int tag) {
  const int rank = self.rank();
  const int comm_size = self.size();
  const std::int64_t count = recvbuf.count();
  const bool is_commutative = op.commutative;

  // temporary buffer to store incoming data
  Buffer tmp_buf = make_scratch(recvbuf.datatype(), count);

  // copy local data into recvbuf
  if (sendbuf != in_place()) self.local_copy(*sendbuf, recvbuf);

  // nearest power of two less than or equal to comm_size
  const int pof2_ = pof2(comm_size);
  const int rem = comm_size - pof2_;

  // In the non-power-of-two case, all even-numbered processes of rank <
  // 2*rem send their data to (rank+1) and sit out until the very end; the
  // remaining processes form a power of two.
  int newrank;
  if (rank < 2 * rem) {
    if (rank % 2 == 0) {  // even
      co_await self.send(rank + 1, tag, recvbuf);
      newrank = -1;  // does not participate in recursive doubling
    } else {  // odd
      co_await self.recv_into(rank - 1, tag, tmp_buf);
      // the received data is the lower rank's, so the ordering is right
      // whether or not the operation is commutative
      self.reduce_local(tmp_buf, recvbuf, op);
      newrank = rank / 2;
    }
  } else {  // rank >= 2*rem
    newrank = rank - rem;
  }

  if (newrank != -1) {
    int mask = 0x1;
    while (mask < pof2_) {
      const int newdst = newrank ^ mask;
      // find real rank of dest
      const int dst = (newdst < rem) ? newdst * 2 + 1 : newdst + rem;

      // send the most current data (recvbuf); receive into tmp_buf
      co_await self.sendrecv(recvbuf, dst, tag, tmp_buf, dst, tag);

      if (is_commutative || (dst < rank)) {
        // op is commutative OR the order is already right
        self.reduce_local(tmp_buf, recvbuf, op);
      } else {
        // op is noncommutative and the order is not right
        self.reduce_local(recvbuf, tmp_buf, op);
        self.local_copy(tmp_buf, recvbuf);
      }
      mask <<= 1;
    }
  }

  // In the non-power-of-two case, all odd-numbered processes of rank <
  // 2*rem send the result to (rank-1), the ranks that sat out.
  if (rank < 2 * rem) {
    if (rank % 2)  // odd
      co_await self.send(rank - 1, tag, recvbuf);
    else  // even
      co_await self.recv_into(rank + 1, tag, recvbuf);
  }
}

Task allreduce_recursive_doubling(Rank& self, const Buffer* sendbuf, Buffer& recvbuf,
                                  AllreduceParams params) {
  validate_collective_args(sendbuf, recvbuf, params);
  const LocalReduceOp op = make_local_op(params.op);
  co_await allreduce_recursive_doubling_op(self, sendbuf, recvbuf, op, params.tag);
}

Task allreduce_reduce_scatter_allgather_op(Rank& self, const Buffer* sendbuf, Buffer& recvbuf,
                                           const LocalReduceOp& op, int tag) {
  const int rank = self.rank();
  const int comm_size = self.size();
  const std::int64_t count = recvbuf.count();
  const DatatypeKind dt = recvbuf.datatype();

  const int pof2_ = pof2(comm_size);
  const int rem = comm_size - pof2_;

  // short vectors cannot be split into pof2 nonempty chunks
  if (count < pof2_) {
    co_await allreduce_recursive_doubling_op(self, sendbuf, recvbuf, op, tag);
    co_return;
  }

  if (!op.commutative)
    throw std::invalid_argument(
        "reduce-scatter-allgather requires a commutative operator");

  Buffer tmp_buf = make_scratch(dt, count);

  if (sendbuf != in_place()) self.local_copy(*sendbuf, recvbuf);

  // same non-power-of-two fold as recursive doubling
  int newrank;
  if (rank < 2 * rem) {
    if (rank % 2 == 0) {  // even
      co_await self.send(rank + 1, tag, recvbuf);
      newrank = -1;
    } else {  // odd
      co_await self.recv_into(rank - 1, tag, tmp_buf);
      self.reduce_local(tmp_buf, recvbuf, op);
      newrank = rank / 2;
    }
  } else {
    newrank = rank - rem;
  }

  if (newrank != -1) {
    // reduce-scatter by recursive halving over the chunk window [lo, hi):
    // keep the half holding this rank's own chunk, fold the partner's copy
    // of that half, hand over the other half.
    int lo = 0, hi = pof2_;
    for (int mask = pof2_ >> 1; mask >= 1; mask >>= 1) {
      const int newdst = newrank ^ mask;
      const int dst = (newdst < rem) ? newdst * 2 + 1 : newdst + rem;
      const int mid = lo + (hi - lo) / 2;
      int keep_lo, keep_hi, give_lo, give_hi;
      if ((newrank & mask) == 0) {
        keep_lo = lo, keep_hi = mid, give_lo = mid, give_hi = hi;
      } else {
        keep_lo = mid, keep_hi = hi, give_lo = lo, give_hi = mid;
      }
      const ChunkRange give = element_span(count, pof2_, give_lo, give_hi);
      const ChunkRange keep = element_span(count, pof2_, keep_lo, keep_hi);

      Buffer send_part = recvbuf.slice(give.begin, give.end);
      Buffer recv_part = Buffer::zeros(dt, keep.end - keep.begin);
      co_await self.sendrecv(send_part, dst, tag, recv_part, dst, tag);

      Buffer acc = recvbuf.slice(keep.begin, keep.end);
      self.reduce_local(recv_part, acc, op);
      recvbuf.write_slice(keep.begin, acc);

      lo = keep_lo;
      hi = keep_hi;
    }

    // allgather by recursive doubling: exchange the owned window with the
    // partner's adjacent aligned window, doubling the owned span each step
    for (int mask = 1; mask < pof2_; mask <<= 1) {
      const int newdst = newrank ^ mask;
      const int dst = (newdst < rem) ? newdst * 2 + 1 : newdst + rem;
      const int plo = lo ^ mask;
      const int phi = plo + mask;
      const ChunkRange mine = element_span(count, pof2_, lo, hi);
      const ChunkRange theirs = element_span(count, pof2_, plo, phi);

      Buffer send_part = recvbuf.slice(mine.begin, mine.end);
      Buffer recv_part = Buffer::zeros(dt, theirs.end - theirs.begin);
      co_await self.sendrecv(send_part, dst, tag, recv_part, dst, tag);
      recvbuf.write_slice(theirs.begin, recv_part);

      lo = std::min(lo, plo);
      hi = std::max(hi, phi);
    }
  }

  // epilogue identical to recursive doubling
  if (rank < 2 * rem) {
    if (rank % 2)  // odd
      co_await self.send(rank - 1, tag, recvbuf);
    else  // even
      co_await self.recv_into(rank + 1, tag, recvbuf);
  }
}

Task allreduce_reduce_scatter_allgather(Rank& self, const Buffer* sendbuf, Buffer& recvbuf,
                                        AllreduceParams params) {
  validate_collective_args(sendbuf, recvbuf, params);
  const LocalReduceOp op = make_local_op(params.op);
  co_await allreduce_reduce_scatter_allgather_op(self, sendbuf, recvbuf, op, params.tag);
}

}  // namespace collsim::collectives
