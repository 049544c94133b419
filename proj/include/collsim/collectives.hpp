#pragma once

#include <cstdint>
#include <vector>

#include "collsim/simnet.hpp"
#include "collsim/valuemodel.hpp"

namespace collsim::collectives {

using simnet::Rank;
using simnet::Task;
using valuemodel::Buffer;
using valuemodel::LocalReduceOp;

/// Fixed tag used by every allreduce variant.
inline constexpr int kAllreduceTag = 14;
/// Tag used by the reference reduce-then-broadcast, kept distinct so variant
/// traffic can be told apart in traces.
inline constexpr int kOracleTag = 15;

/// floor(log2 n) for n >= 1 (returns -1 for n <= 0, matching the shift loop).
int log2floor(int n);
/// Largest power of two <= n for n > 0; 0 otherwise.
int pof2(int n);

/// Non-power-of-two rank folding: the first 2*rem ranks collapse pairwise
/// onto the odd member, leaving pof2 participants.
struct RdTopology {
  int comm_size = 1;
  int pof2 = 1;
  int rem = 0;
  std::vector<int> newrank;  // per rank; -1 marks folded-out ranks

  bool operator==(const RdTopology&) const = default;
};

RdTopology rd_topology(int comm_size);

struct AllreduceParams {
  std::int64_t count = 0;
  valuemodel::DatatypeKind datatype = valuemodel::DatatypeKind::Int64;
  valuemodel::ReduceOp op;
  int tag = kAllreduceTag;
};

/// Canonical reduce-then-broadcast reference: rank 0 folds contributions in
/// ascending rank order (a fixed left fold), then sends the result to every
/// rank. Defines the equivalence target for the variants.
Task allreduce_oracle(Rank& self, const Buffer& sendbuf, Buffer& result, AllreduceParams params);

/// Recursive doubling allreduce. Pass valuemodel::in_place() as sendbuf when
/// the contribution is preloaded in recvbuf.
Task allreduce_recursive_doubling(Rank& self, const Buffer* sendbuf, Buffer& recvbuf,
                                  AllreduceParams params);

/// Reduce-scatter (recursive halving) followed by allgather (recursive
/// doubling). Falls back to recursive doubling when count < pof2, where the
/// vector cannot be split into pof2 nonempty chunks.
Task allreduce_reduce_scatter_allgather(Rank& self, const Buffer* sendbuf, Buffer& recvbuf,
                                        AllreduceParams params);

// Operator-parameterized cores. The callers above use the builtin operators;
// tests may inject noncommutative operators to exercise ordering branches.
Task allreduce_oracle_op(Rank& self, const Buffer& sendbuf, Buffer& result,
                         const LocalReduceOp& op, int tag = kOracleTag);
Task allreduce_recursive_doubling_op(Rank& self, const Buffer* sendbuf, Buffer& recvbuf,
                                     const LocalReduceOp& op, int tag = kAllreduceTag);
Task allreduce_reduce_scatter_allgather_op(Rank& self, const Buffer* sendbuf, Buffer& recvbuf,
                                           const LocalReduceOp& op, int tag = kAllreduceTag);

/// Deterministic partition of `count` elements into `nchunks` contiguous
/// chunks: as even as possible, earlier chunks take the remainder.
struct ChunkRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;
};
ChunkRange chunk_range(std::int64_t count, int nchunks, int chunk);

}  // namespace collsim::collectives
