"""Smoke test for the dunmri extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import tempfile
from pathlib import Path

import dunmri

N = 64

lines = dunmri.mask_lines(256, 4, "equispaced")
assert len(lines) == 64, len(lines)

x = dunmri.phantom(N, "shepp-logan")
assert len(x) == N * N and max(x) <= 1.0

assert dunmri.psnr(x, x, (N, N)) == 99.0
assert dunmri.ssim(x, x, (N, N)) == 1.0

zero_filled, cppa, iters = dunmri.undersample_and_solve(x, (N, N), accel=4, seed=1)
p_zf = dunmri.psnr(x, zero_filled, (N, N))
p_cp = dunmri.psnr(x, cppa, (N, N))
print(f"zero-filled {p_zf:.2f} dB, primal-dual {p_cp:.2f} dB after {iters} iterations")

with tempfile.TemporaryDirectory() as d:
    print(dunmri.cli(["mask", "--width", "64", "--accel", "4", "--out", str(Path(d) / "m.txt")]))
    try:
        dunmri.cli(["mask", "--width", "64", "--accel", "5", "--out", str(Path(d) / "m.txt")])
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("acceleration 5 accepted")

print("ok")
