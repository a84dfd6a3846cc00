#!/usr/bin/env python3
# Copyright 2026 The zakailab Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Reference-value generator for the C++ test suite.

Everything here is an independent re-derivation (pure Python, no shared code
with src/) whose outputs are frozen into tests/.  Rerun after editing and
paste the printed blocks if a frozen constant ever needs to change.
"""

import math

M0, M1 = 0xD2511F53, 0xCD9E8D57
W0, W1 = 0x9E3779B9, 0xBB67AE85
MASK = 0xFFFFFFFF


def philox4x32(ctr, key, rounds=10):
    c = list(ctr)
    k = list(key)
    for r in range(rounds):
        if r > 0:
            k[0] = (k[0] + W0) & MASK
            k[1] = (k[1] + W1) & MASK
        p0 = M0 * c[0]
        p1 = M1 * c[2]
        c = [((p1 >> 32) ^ c[1] ^ k[0]) & MASK, p1 & MASK,
             ((p0 >> 32) ^ c[3] ^ k[1]) & MASK, p0 & MASK]
    return c


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def fnv1a64(s):
    h = 0xCBF29CE484222325
    for b in s.encode():
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def lineage_digest(pairs):
    d = 0
    for tag, idx in pairs:
        d = splitmix64(d ^ fnv1a64(tag))
        d = splitmix64(d ^ idx)
    return d


def normal_pair(seed, digest, block):
    ctr = [block & MASK, (block >> 32) & MASK, digest & MASK, (digest >> 32) & MASK]
    key = [seed & MASK, (seed >> 32) & MASK]
    x = philox4x32(ctr, key)
    a = (x[0] << 32) | x[1]
    b = (x[2] << 32) | x[3]
    u1 = ((a >> 11) + 0.5) * 2.0 ** -53
    u2 = ((b >> 11) + 0.5) * 2.0 ** -53
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


def main():
    print("== philox4x32-10 known answers ==")
    for ctr, key in [
        ((0, 0, 0, 0), (0, 0)),
        ((MASK, MASK, MASK, MASK), (MASK, MASK)),
        ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0)),
    ]:
        out = philox4x32(ctr, key)
        print(f"  ctr={['%08x' % c for c in ctr]} key={['%08x' % k for k in key]}"
              f" -> {['%08x' % o for o in out]}")

    print("== lineage digests ==")
    for pairs in [[("run", 0)], [("run", 0), ("particle", 7), ("B", 0)],
                  [("run", 1)], []]:
        print(f"  {pairs} -> 0x{lineage_digest(pairs):016x}")

    print("== first normals, seed=42, lineage=[(run,0)] ==")
    d = lineage_digest([("run", 0)])
    vals = []
    for blk in range(3):
        z0, z1 = normal_pair(42, d, blk)
        vals += [z0, z1]
    for i, v in enumerate(vals):
        print(f"  normal[{i}] = {v!r}")

    print("== moment sanity over 200000 normals (same stream) ==")
    n = 200000
    s = s2 = s3 = s4 = 0.0
    for blk in range(n // 2):
        for z in normal_pair(42, d, blk):
            s += z; s2 += z * z; s3 += z ** 3; s4 += z ** 4
    print(f"  mean={s/n:.6f} var={s2/n:.6f} skew~{s3/n:.6f} kurt~{s4/n:.6f}")

    print("== scalar riccati steady states ==")
    # dP = (2AP + s0^2 + s1^2 - (PC + s1*s2)^2/s2^2) dt, steady state P*
    # A=-1 C=1 s0=1   s1=0   s2=1:  P*^2 + 2P* - 1 = 0
    print(f"  base: {math.sqrt(2.0) - 1.0!r}")
    # A=-1 C=1 s0=1   s1=0.3 s2=1:  0 = -2P + 1.09 - (P+0.3)^2
    print(f"  correlated: {(-2.6 + math.sqrt(10.76)) / 2.0!r}")

    print("== OU variance (b=-x, sigma=1): (1-exp(-2T))/2 ==")
    for T in (0.5, 1.0):
        print(f"  T={T}: {(1.0 - math.exp(-2.0 * T)) / 2.0!r}")


if __name__ == "__main__":
    main()
