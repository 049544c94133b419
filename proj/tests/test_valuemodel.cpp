#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "collsim/valuemodel.hpp"

using namespace collsim::valuemodel;

TEST_CASE("type sizes and true extents") {
  CHECK(type_size(DatatypeKind::Int32) == 4);
  CHECK(type_size(DatatypeKind::Int64) == 8);
  CHECK(type_size(DatatypeKind::Float64) == 8);
  CHECK(type_size(DatatypeKind::ExactRational) > 0);

  for (DatatypeKind dt : {DatatypeKind::Int32, DatatypeKind::Int64, DatatypeKind::Float64,
                          DatatypeKind::ExactRational}) {
    const TrueExtent te = type_true_extent(dt);
    CHECK(te.lb == 0);  // true lower bound is 0 for every builtin
    CHECK(te.extent == type_size(dt));
  }
}

TEST_CASE("reduce_local elementwise examples") {
  Buffer in = Buffer::of_int64({2, 3});
  Buffer io = Buffer::of_int64({10, 20});
  reduce_local(in, io, ReduceOp{ReduceKind::Sum});
  CHECK(io == Buffer::of_int64({12, 23}));

  Buffer m1 = Buffer::of_int64({7});
  reduce_local(Buffer::of_int64({5}), m1, ReduceOp{ReduceKind::Max});
  CHECK(m1 == Buffer::of_int64({7}));
  Buffer m2 = Buffer::of_int64({7});
  reduce_local(Buffer::of_int64({9}), m2, ReduceOp{ReduceKind::Max});
  CHECK(m2 == Buffer::of_int64({9}));
}

TEST_CASE("reduce_local identity elements leave the input") {
  const Buffer x = Buffer::of_int64({-4, 0, 11});

  Buffer sum_id = Buffer::of_int64({0, 0, 0});
  reduce_local(x, sum_id, ReduceOp{ReduceKind::Sum});
  CHECK(sum_id == x);

  Buffer prod_id = Buffer::of_int64({1, 1, 1});
  reduce_local(x, prod_id, ReduceOp{ReduceKind::Prod});
  CHECK(prod_id == x);

  const auto max64 = std::numeric_limits<std::int64_t>::max();
  const auto min64 = std::numeric_limits<std::int64_t>::min();
  Buffer min_id = Buffer::of_int64({max64, max64, max64});
  reduce_local(x, min_id, ReduceOp{ReduceKind::Min});
  CHECK(min_id == x);
  Buffer max_id = Buffer::of_int64({min64, min64, min64});
  reduce_local(x, max_id, ReduceOp{ReduceKind::Max});
  CHECK(max_id == x);

  const double inf = std::numeric_limits<double>::infinity();
  const Buffer fx = Buffer::of_float64({-2.5, 3.25});
  Buffer fmin_id = Buffer::of_float64({inf, inf});
  reduce_local(fx, fmin_id, ReduceOp{ReduceKind::Min});
  CHECK(fmin_id == fx);
  Buffer fmax_id = Buffer::of_float64({-inf, -inf});
  reduce_local(fx, fmax_id, ReduceOp{ReduceKind::Max});
  CHECK(fmax_id == fx);
}

TEST_CASE("integer Sum/Prod wrap around") {
  Buffer a = Buffer::of_int32({std::numeric_limits<std::int32_t>::max()});
  reduce_local(Buffer::of_int32({1}), a, ReduceOp{ReduceKind::Sum});
  CHECK(a == Buffer::of_int32({std::numeric_limits<std::int32_t>::min()}));

  Buffer b = Buffer::of_int64({std::numeric_limits<std::int64_t>::max()});
  reduce_local(Buffer::of_int64({2}), b, ReduceOp{ReduceKind::Prod});
  CHECK(b == Buffer::of_int64({-2}));
}

TEST_CASE("local_copy copies values, not references") {
  const Buffer src = Buffer::of_int64({1, 2, 3});
  Buffer dst = Buffer::zeros(DatatypeKind::Int64, 3);
  local_copy(src, dst);
  CHECK(dst == src);

  dst.set(0, std::int64_t{99});
  CHECK(src == Buffer::of_int64({1, 2, 3}));

  Buffer empty_src = Buffer::zeros(DatatypeKind::Float64, 0);
  Buffer empty_dst = Buffer::zeros(DatatypeKind::Float64, 0);
  local_copy(empty_src, empty_dst);
  CHECK(empty_dst.count() == 0);
}

TEST_CASE("shape mismatches are rejected") {
  Buffer io = Buffer::of_int64({1, 2});
  CHECK_THROWS_AS(reduce_local(Buffer::of_int64({1}), io, ReduceOp{}), std::invalid_argument);
  CHECK_THROWS_AS(reduce_local(Buffer::of_int32({1, 2}), io, ReduceOp{}),
                  std::invalid_argument);
  Buffer dst = Buffer::zeros(DatatypeKind::Int64, 3);
  CHECK_THROWS_AS(local_copy(io, dst), std::invalid_argument);
}

namespace {

Scalar fold_scalar(ReduceKind op, const Scalar& a, const Scalar& b) {
  Buffer io = Buffer::zeros(scalar_kind(a), 1);
  io.set(0, b);
  Buffer in = Buffer::zeros(scalar_kind(a), 1);
  in.set(0, a);
  reduce_local(in, io, ReduceOp{op});
  return io.at(0);
}

// every full parenthesization of vals in the given order
std::vector<Scalar> all_parenthesizations(ReduceKind op, const std::vector<Scalar>& vals,
                                          std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return {vals[lo]};
  std::vector<Scalar> out;
  for (std::size_t mid = lo + 1; mid < hi; ++mid)
    for (const Scalar& left : all_parenthesizations(op, vals, lo, mid))
      for (const Scalar& right : all_parenthesizations(op, vals, mid, hi))
        out.push_back(fold_scalar(op, left, right));
  return out;
}

std::vector<Scalar> random_multiset(DatatypeKind dt, std::size_t size, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> v(-7, 7);
  std::uniform_int_distribution<std::int64_t> den(1, 5);
  std::vector<Scalar> vals;
  for (std::size_t i = 0; i < size; ++i) {
    switch (dt) {
      case DatatypeKind::Int32:
        vals.emplace_back(static_cast<std::int32_t>(v(rng)));
        break;
      case DatatypeKind::Int64:
        vals.emplace_back(v(rng));
        break;
      case DatatypeKind::Float64:
        vals.emplace_back(static_cast<double>(v(rng)));
        break;
      case DatatypeKind::ExactRational:
        vals.emplace_back(Rational(v(rng), den(rng)));
        break;
    }
  }
  return vals;
}

}  // namespace

TEST_CASE("exact domains: ops associative and commutative under brute force") {
  std::mt19937_64 rng(7);
  for (DatatypeKind dt :
       {DatatypeKind::Int32, DatatypeKind::Int64, DatatypeKind::ExactRational}) {
    for (ReduceKind op :
         {ReduceKind::Sum, ReduceKind::Prod, ReduceKind::Min, ReduceKind::Max}) {
      for (int trial = 0; trial < 4; ++trial) {
        std::vector<Scalar> vals =
            random_multiset(dt, 2 + static_cast<std::size_t>(trial), rng);
        std::sort(vals.begin(), vals.end());
        std::vector<Scalar> results;
        do {
          auto r = all_parenthesizations(op, vals, 0, vals.size());
          results.insert(results.end(), r.begin(), r.end());
        } while (std::next_permutation(vals.begin(), vals.end()));
        for (const Scalar& r : results) CHECK(r == results.front());
      }
    }
  }
}

TEST_CASE("Float64 Min/Max associative and commutative without rounding") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(-100.0, 100.0);
  for (ReduceKind op : {ReduceKind::Min, ReduceKind::Max}) {
    for (int trial = 0; trial < 8; ++trial) {
      std::vector<Scalar> vals;
      for (int i = 0; i < 5; ++i) vals.emplace_back(v(rng));
      std::sort(vals.begin(), vals.end());
      std::vector<Scalar> results;
      do {
        auto r = all_parenthesizations(op, vals, 0, vals.size());
        results.insert(results.end(), r.begin(), r.end());
      } while (std::next_permutation(vals.begin(), vals.end()));
      for (const Scalar& r : results) CHECK(r == results.front());
    }
  }
}

TEST_CASE("reduce_local is elementwise independent") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::int64_t> v(-50, 50);
  for (ReduceKind op :
       {ReduceKind::Sum, ReduceKind::Prod, ReduceKind::Min, ReduceKind::Max}) {
    std::vector<std::int64_t> a(16), b(16);
    for (auto& x : a) x = v(rng);
    for (auto& x : b) x = v(rng);
    Buffer in = Buffer::of_int64(a);
    Buffer whole = Buffer::of_int64(b);
    reduce_local(in, whole, ReduceOp{op});
    // against single-element applications
    Buffer pieces = Buffer::of_int64(b);
    for (std::int64_t i = 0; i < 16; ++i) {
      Buffer slot = pieces.slice(i, i + 1);
      reduce_local(in.slice(i, i + 1), slot, ReduceOp{op});
      pieces.write_slice(i, slot);
    }
    CHECK(whole == pieces);
  }
}

TEST_CASE("buffer slicing") {
  const Buffer b = Buffer::of_int64({0, 1, 2, 3, 4});
  CHECK(b.slice(1, 4) == Buffer::of_int64({1, 2, 3}));
  CHECK(b.slice(2, 2).count() == 0);
  Buffer c = Buffer::zeros(DatatypeKind::Int64, 5);
  c.write_slice(2, Buffer::of_int64({8, 9}));
  CHECK(c == Buffer::of_int64({0, 0, 8, 9, 0}));
  CHECK_THROWS_AS(b.slice(3, 6), std::out_of_range);
}

TEST_CASE("rational arithmetic is exact") {
  Buffer io = Buffer::of_rational({Rational(1, 6)});
  reduce_local(Buffer::of_rational({Rational(1, 3)}), io, ReduceOp{ReduceKind::Sum});
  CHECK(io == Buffer::of_rational({Rational(1, 2)}));

  // (2/3 * 3/4) * 4/5 == 2/5 exactly
  Buffer p = Buffer::of_rational({Rational(2, 3)});
  Buffer q = Buffer::of_rational({Rational(3, 4)});
  reduce_local(p, q, ReduceOp{ReduceKind::Prod});
  Buffer r = Buffer::of_rational({Rational(4, 5)});
  reduce_local(q, r, ReduceOp{ReduceKind::Prod});
  CHECK(r == Buffer::of_rational({Rational(2, 5)}));
}

TEST_CASE("in-place marker is a stable distinguished value") {
  CHECK(in_place() == in_place());
  const Buffer real;
  CHECK(in_place() != &real);
}

TEST_CASE("scalar formatting") {
  CHECK(to_string(Scalar{std::int64_t{-3}}) == "-3");
  CHECK(to_string(Scalar{Rational(7, 2)}) == "7/2");
  CHECK(to_string(Scalar{1.5}) == "1.5");
}
