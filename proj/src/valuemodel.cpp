#include "collsim/valuemodel.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace collsim::valuemodel {

int type_size(DatatypeKind dt) {
  switch (dt) {
    case DatatypeKind::Int32:
      return 4;
    case DatatypeKind::Int64:
      return 8;
    case DatatypeKind::Float64:
      return 8;
    case DatatypeKind::ExactRational:
      return 16;  // nominal; rationals have no fixed wire width
  }
  throw std::invalid_argument("type_size: bad datatype");
}

TrueExtent type_true_extent(DatatypeKind dt) {
  return TrueExtent{0, type_size(dt)};
}

const char* to_string(DatatypeKind dt) {
  switch (dt) {
    case DatatypeKind::Int32:
      return "i32";
    case DatatypeKind::Int64:
      return "i64";
    case DatatypeKind::Float64:
      return "f64";
    case DatatypeKind::ExactRational:
      return "rational";
  }
  return "?";
}

const char* to_string(ReduceKind kind) {
  switch (kind) {
    case ReduceKind::Sum:
      return "sum";
    case ReduceKind::Prod:
      return "prod";
    case ReduceKind::Min:
      return "min";
    case ReduceKind::Max:
      return "max";
  }
  return "?";
}

DatatypeKind scalar_kind(const Scalar& s) {
  switch (s.index()) {
    case 0:
      return DatatypeKind::Int32;
    case 1:
      return DatatypeKind::Int64;
    case 2:
      return DatatypeKind::Float64;
    default:
      return DatatypeKind::ExactRational;
  }
}

std::string to_string(const Scalar& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          char buf[40];
          std::snprintf(buf, sizeof buf, "%.17g", v);
          return buf;
        } else if constexpr (std::is_same_v<T, Rational>) {
          std::ostringstream os;
          os << v;
          return os.str();
        } else {
          return std::to_string(v);
        }
      },
      s);
}

Buffer Buffer::zeros(DatatypeKind dt, std::int64_t count) {
  if (count < 0) throw std::invalid_argument("Buffer::zeros: negative count");
  auto n = static_cast<std::size_t>(count);
  switch (dt) {
    case DatatypeKind::Int32:
      return Buffer(dt, std::vector<std::int32_t>(n, 0));
    case DatatypeKind::Int64:
      return Buffer(dt, std::vector<std::int64_t>(n, 0));
    case DatatypeKind::Float64:
      return Buffer(dt, std::vector<double>(n, 0.0));
    case DatatypeKind::ExactRational:
      return Buffer(dt, std::vector<Rational>(n, Rational(0)));
  }
  throw std::invalid_argument("Buffer::zeros: bad datatype");
}

Buffer Buffer::of_int32(std::vector<std::int32_t> v) {
  return Buffer(DatatypeKind::Int32, std::move(v));
}
Buffer Buffer::of_int64(std::vector<std::int64_t> v) {
  return Buffer(DatatypeKind::Int64, std::move(v));
}
Buffer Buffer::of_float64(std::vector<double> v) {
  return Buffer(DatatypeKind::Float64, std::move(v));
}
Buffer Buffer::of_rational(std::vector<Rational> v) {
  return Buffer(DatatypeKind::ExactRational, std::move(v));
}

std::int64_t Buffer::count() const {
  return std::visit([](const auto& v) { return static_cast<std::int64_t>(v.size()); }, data_);
}

Scalar Buffer::at(std::int64_t i) const {
  if (i < 0 || i >= count()) throw std::out_of_range("Buffer::at");
  return std::visit([&](const auto& v) -> Scalar { return v[static_cast<std::size_t>(i)]; },
                    data_);
}

void Buffer::set(std::int64_t i, const Scalar& v) {
  if (i < 0 || i >= count()) throw std::out_of_range("Buffer::set");
  if (scalar_kind(v) != dt_)
    throw std::invalid_argument("Buffer::set: scalar kind does not match buffer datatype");
  std::visit(
      [&](auto& vec) {
        using T = typename std::decay_t<decltype(vec)>::value_type;
        vec[static_cast<std::size_t>(i)] = std::get<T>(v);
      },
      data_);
}

Buffer Buffer::slice(std::int64_t begin, std::int64_t end) const {
  if (begin < 0 || end < begin || end > count())
    throw std::out_of_range("Buffer::slice: bad range");
  Buffer out = *this;
  std::visit(
      [&](auto& vec) {
        using V = std::decay_t<decltype(vec)>;
        const auto& src = std::get<V>(data_);
        vec.assign(src.begin() + begin, src.begin() + end);
      },
      out.data_);
  return out;
}

void Buffer::write_slice(std::int64_t begin, const Buffer& src) {
  if (src.dt_ != dt_) throw std::invalid_argument("Buffer::write_slice: datatype mismatch");
  if (begin < 0 || begin + src.count() > count())
    throw std::out_of_range("Buffer::write_slice: bad range");
  std::visit(
      [&](auto& vec) {
        using V = std::decay_t<decltype(vec)>;
        const auto& s = std::get<V>(src.data_);
        std::copy(s.begin(), s.end(), vec.begin() + begin);
      },
      data_);
}

const std::vector<std::int32_t>& Buffer::as_int32() const {
  return std::get<std::vector<std::int32_t>>(data_);
}
const std::vector<std::int64_t>& Buffer::as_int64() const {
  return std::get<std::vector<std::int64_t>>(data_);
}
const std::vector<double>& Buffer::as_float64() const {
  return std::get<std::vector<double>>(data_);
}
const std::vector<Rational>& Buffer::as_rational() const {
  return std::get<std::vector<Rational>>(data_);
}

std::string Buffer::to_string() const {
  std::string out = "[";
  for (std::int64_t i = 0; i < count(); ++i) {
    if (i) out += ", ";
    out += valuemodel::to_string(at(i));
  }
  out += "]";
  return out;
}

const Buffer* in_place() {
  static const Buffer sentinel;
  return &sentinel;
}

namespace {

// Integer Sum/Prod wrap (two's-complement modular) so associativity holds
// without overflow traps.
std::int32_t apply_i32(ReduceKind k, std::int32_t a, std::int32_t b) {
  switch (k) {
    case ReduceKind::Sum:
      return static_cast<std::int32_t>(static_cast<std::uint32_t>(a) +
                                       static_cast<std::uint32_t>(b));
    case ReduceKind::Prod:
      return static_cast<std::int32_t>(static_cast<std::uint32_t>(a) *
                                       static_cast<std::uint32_t>(b));
    case ReduceKind::Min:
      return std::min(a, b);
    case ReduceKind::Max:
      return std::max(a, b);
  }
  return 0;
}

std::int64_t apply_i64(ReduceKind k, std::int64_t a, std::int64_t b) {
  switch (k) {
    case ReduceKind::Sum:
      return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) +
                                       static_cast<std::uint64_t>(b));
    case ReduceKind::Prod:
      return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) *
                                       static_cast<std::uint64_t>(b));
    case ReduceKind::Min:
      return std::min(a, b);
    case ReduceKind::Max:
      return std::max(a, b);
  }
  return 0;
}

double apply_f64(ReduceKind k, double a, double b) {
  switch (k) {
    case ReduceKind::Sum:
      return a + b;
    case ReduceKind::Prod:
      return a * b;
    case ReduceKind::Min:
      return std::min(a, b);
    case ReduceKind::Max:
      return std::max(a, b);
  }
  return 0;
}

Rational apply_rat(ReduceKind k, const Rational& a, const Rational& b) {
  switch (k) {
    case ReduceKind::Sum:
      return a + b;
    case ReduceKind::Prod:
      return a * b;
    case ReduceKind::Min:
      return a < b ? a : b;
    case ReduceKind::Max:
      return a > b ? a : b;
  }
  return Rational(0);
}

void check_shapes(const Buffer& a, const Buffer& b, const char* who) {
  if (a.datatype() != b.datatype())
    throw std::invalid_argument(std::string(who) + ": datatype mismatch");
  if (a.count() != b.count())
    throw std::invalid_argument(std::string(who) + ": count mismatch");
}

}  // namespace

void reduce_local(const Buffer& inbuf, Buffer& inoutbuf, ReduceOp op) {
  check_shapes(inbuf, inoutbuf, "reduce_local");
  const ReduceKind k = op.kind;
  switch (inbuf.dt_) {
    case DatatypeKind::Int32: {
      const auto& in = std::get<std::vector<std::int32_t>>(inbuf.data_);
      auto& io = std::get<std::vector<std::int32_t>>(inoutbuf.data_);
      for (std::size_t i = 0; i < io.size(); ++i) io[i] = apply_i32(k, in[i], io[i]);
      break;
    }
    case DatatypeKind::Int64: {
      const auto& in = std::get<std::vector<std::int64_t>>(inbuf.data_);
      auto& io = std::get<std::vector<std::int64_t>>(inoutbuf.data_);
      for (std::size_t i = 0; i < io.size(); ++i) io[i] = apply_i64(k, in[i], io[i]);
      break;
    }
    case DatatypeKind::Float64: {
      const auto& in = std::get<std::vector<double>>(inbuf.data_);
      auto& io = std::get<std::vector<double>>(inoutbuf.data_);
      for (std::size_t i = 0; i < io.size(); ++i) io[i] = apply_f64(k, in[i], io[i]);
      break;
    }
    case DatatypeKind::ExactRational: {
      const auto& in = std::get<std::vector<Rational>>(inbuf.data_);
      auto& io = std::get<std::vector<Rational>>(inoutbuf.data_);
      for (std::size_t i = 0; i < io.size(); ++i) io[i] = apply_rat(k, in[i], io[i]);
      break;
    }
  }
}

void local_copy(const Buffer& src, Buffer& dst) {
  check_shapes(src, dst, "local_copy");
  dst.data_ = src.data_;
}

LocalReduceOp make_local_op(ReduceOp op) {
  return LocalReduceOp{
      [op](const Buffer& in, Buffer& inout) { reduce_local(in, inout, op); },
      op.commutative};
}

}  // namespace collsim::valuemodel
