#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace collsim::valuemodel {

/// Exact arbitrary-precision rational, the concrete analogue of real
/// arithmetic: Sum/Prod reassociate without rounding, so equivalence
/// checks over this domain are exact.
using Rational = boost::multiprecision::cpp_rational;

enum class DatatypeKind { Int32, Int64, Float64, ExactRational };

/// Bytes per element. ExactRational reports a fixed nominal extent.
int type_size(DatatypeKind dt);

struct TrueExtent {
  std::int64_t lb;      // always 0 for the builtin types modeled here
  std::int64_t extent;  // equal to type_size; size and extent are conflated
                        // for contiguous builtins
};
TrueExtent type_true_extent(DatatypeKind dt);

const char* to_string(DatatypeKind dt);

enum class ReduceKind { Sum, Prod, Min, Max };

struct ReduceOp {
  ReduceKind kind = ReduceKind::Sum;
  bool commutative = true;  // every builtin reduction operator is commutative
};

const char* to_string(ReduceKind kind);

using Scalar = std::variant<std::int32_t, std::int64_t, double, Rational>;

std::string to_string(const Scalar& s);
DatatypeKind scalar_kind(const Scalar& s);

/// Homogeneous fixed-length element sequence in one arithmetic domain.
/// Value semantics throughout: copies are deep and independent.
class Buffer {
 public:
  Buffer() : dt_(DatatypeKind::Int32), data_(std::vector<std::int32_t>{}) {}

  static Buffer zeros(DatatypeKind dt, std::int64_t count);
  static Buffer of_int32(std::vector<std::int32_t> v);
  static Buffer of_int64(std::vector<std::int64_t> v);
  static Buffer of_float64(std::vector<double> v);
  static Buffer of_rational(std::vector<Rational> v);

  DatatypeKind datatype() const { return dt_; }
  std::int64_t count() const;

  Scalar at(std::int64_t i) const;
  void set(std::int64_t i, const Scalar& v);

  /// Copy of elements [begin, end).
  Buffer slice(std::int64_t begin, std::int64_t end) const;
  /// Overwrite elements [begin, begin + src.count()) with src.
  void write_slice(std::int64_t begin, const Buffer& src);

  const std::vector<std::int32_t>& as_int32() const;
  const std::vector<std::int64_t>& as_int64() const;
  const std::vector<double>& as_float64() const;
  const std::vector<Rational>& as_rational() const;

  bool operator==(const Buffer& other) const = default;

  std::string to_string() const;

 private:
  template <typename T>
  Buffer(DatatypeKind dt, std::vector<T> v) : dt_(dt), data_(std::move(v)) {}

  DatatypeKind dt_;
  std::variant<std::vector<std::int32_t>, std::vector<std::int64_t>,
               std::vector<double>, std::vector<Rational>>
      data_;

  friend void reduce_local(const Buffer&, Buffer&, ReduceOp);
  friend void local_copy(const Buffer&, Buffer&);
};

/// Distinguished marker accepted where an algorithm tests whether the caller's
/// contribution already resides in the receive buffer.
const Buffer* in_place();

/// Elementwise inoutbuf[i] := op(inbuf[i], inoutbuf[i]).  The first argument
/// is the left operand; argument order is preserved exactly so that ports of
/// order-sensitive call sites stay faithful even though the builtin operators
/// are all commutative.
/// Throws std::invalid_argument on count or datatype mismatch.
void reduce_local(const Buffer& inbuf, Buffer& inoutbuf, ReduceOp op);

/// dst := src. Requires equal counts and datatypes; a direct copy, never a
/// self-message.
void local_copy(const Buffer& src, Buffer& dst);

/// A local reduction as the collective algorithms consume it: apply(in, inout)
/// performs inout[i] := op(in[i], inout[i]) with `in` as the left operand.
/// Tests may supply noncommutative operators to exercise ordering branches.
struct LocalReduceOp {
  std::function<void(const Buffer& in, Buffer& inout)> apply;
  bool commutative = true;
};

LocalReduceOp make_local_op(ReduceOp op);

}  // namespace collsim::valuemodel
