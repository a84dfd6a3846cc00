/*
 * Copyright 2026 The zakailab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <doctest.h>

#include <cmath>

#include "zakailab/paths.hpp"

using namespace zakailab;
using namespace zakailab::paths;

// Frozen outputs of tools/gen_reference_values.py (independent Python
// implementation).  The first three blocks reproduce the published
// Random123 philox4x32-10 known-answer vectors.
TEST_CASE("philox4x32-10 known answers") {
  auto out = philox4x32({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);

  out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                   {0xffffffffu, 0xffffffffu});
  CHECK(out[0] == 0x408f276du);
  CHECK(out[1] == 0x41c83b0eu);
  CHECK(out[2] == 0xa20bc7c6u);
  CHECK(out[3] == 0x6d5451fdu);

  out = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                   {0xa4093822u, 0x299f31d0u});
  CHECK(out[0] == 0xd16cfe09u);
  CHECK(out[1] == 0x94fdccebu);
  CHECK(out[2] == 0x5001e420u);
  CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("lineage digests match the reference implementation") {
  StreamKey root(42);
  CHECK(root.digest() == 0u);
  CHECK(root.child("run", 0).digest() == 0x9ff9ac529c12e07eull);
  CHECK(root.child("run", 1).digest() == 0xfcd0478745f1158full);
  CHECK(root.child("run", 0).child("particle", 7).child("B", 0).digest() ==
        0x4bb93b3cad163bbaull);
  // digest depends only on the lineage, not the seed
  CHECK(StreamKey(7).child("run", 0).digest() ==
        StreamKey(42).child("run", 0).digest());
}

TEST_CASE("normal stream: frozen values, addressing, determinism") {
  NormalStream s(StreamKey(42).child("run", 0));
  const double expect[6] = {1.5839720527649541,   0.9255638181770972,
                            -0.8534405641503019,  0.024323587761576768,
                            -1.6062027737124633,  -1.811904763352373};
  for (int i = 0; i < 6; ++i) CHECK(s.at(i) == doctest::Approx(expect[i]).epsilon(1e-15));

  std::vector<double> buf(7);
  s.fill(1, buf);  // odd start exercises the half-block path
  for (int i = 0; i < 7; ++i) CHECK(buf[i] == s.at(1 + i));

  NormalStream t(StreamKey(42).child("run", 0));
  for (std::uint64_t i : {0ull, 1ull, 1000ull, (1ull << 40)})
    CHECK(s.at(i) == t.at(i));

  // different lineage index => different draws
  NormalStream u(StreamKey(42).child("run", 1));
  int same = 0;
  for (int i = 0; i < 100; ++i) same += (s.at(i) == u.at(i));
  CHECK(same == 0);
}

TEST_CASE("brownian increments have the right moments") {
  TimeGrid grid(1.0, 50000);
  auto p = sample_brownian(grid, 2, StreamKey(7).child("W", 0));
  REQUIRE(p.increments.rows() == 50000);
  REQUIRE(p.increments.cols() == 2);

  const double dt = grid.dt();
  const int n = 50000 * 2;
  const double mean = p.increments.mean();
  const double var = (p.increments.array() - mean).square().sum() / (n - 1);
  // 3-sigma bands for the sample mean and variance of N(0, dt)
  CHECK(std::abs(mean) < 3.0 * std::sqrt(dt / n));
  CHECK(std::abs(var - dt) < 3.0 * dt * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("streams differing in one lineage index are uncorrelated") {
  const int n = 100000;
  NormalStream a(StreamKey(3).child("run", 0).child("W", 0));
  NormalStream b(StreamKey(3).child("run", 0).child("W", 1));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = a.at(i), y = b.at(i);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  const double corr = dot / std::sqrt(na * nb);
  CHECK(std::abs(corr) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("cumulate: positions start at zero and telescope") {
  BrownianPath p{TimeGrid(1.0, 2), 1, Mat(2, 1)};
  p.increments << 0.5, -0.25;
  Mat w = cumulate(p);
  REQUIRE(w.rows() == 3);
  CHECK(w(0, 0) == 0.0);
  CHECK(w(1, 0) == 0.5);
  CHECK(w(2, 0) == doctest::Approx(0.25));

  auto q = sample_brownian(TimeGrid(2.0, 64), 3, StreamKey(11).child("W", 2));
  Mat wq = cumulate(q);
  CHECK((wq.row(64) - q.increments.colwise().sum()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("coarsen sums consecutive increments and keeps the endpoint") {
  auto fine = sample_brownian(TimeGrid(1.0, 16), 2, StreamKey(5).child("W", 0));
  auto coarse = coarsen(fine, 4);
  REQUIRE(coarse.grid.steps == 4);
  CHECK(coarse.grid.dt() == doctest::Approx(0.25));
  CHECK((cumulate(coarse).row(4) - cumulate(fine).row(16)).cwiseAbs().maxCoeff() <
        1e-14);
  CHECK_THROWS_AS(coarsen(fine, 3), UnsupportedInput);
}

TEST_CASE("time grid validates its inputs") {
  CHECK_THROWS_AS(TimeGrid(0.0, 10), ConfigError);
  CHECK_THROWS_AS(TimeGrid(1.0, 0), ConfigError);
  TimeGrid g(2.0, 8);
  CHECK(g.dt() == doctest::Approx(0.25));
  CHECK(g.time(8) == doctest::Approx(2.0));
}
