"""Kernel diagnostics: centre Green's growth and the averaged diagonal fit."""
import argparse
import math

from lfpp import kernels


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--upsilon", type=float, default=2.0)
    p.add_argument("--sizes", default="32,64,128,256")
    args = p.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    for N in sizes:
        k = kernels.RectKernel(N, N)
        c = (N // 2, N // 2)
        g = kernels.green_spectral(k, c, c)
        print(f"N={N}: G(c,c)={g:.6f}  minus (2/pi)log N = {g - 2 / math.pi * math.log(N):.6f}")
    fit = kernels.avg_green_asymptotic(args.upsilon, [(0.25, 0.75)], sizes)
    print(f"slope {fit.slope:.6f} (2/pi = {2 / math.pi:.6f}); intercept {fit.intercept:.6f}; "
          f"quadrature constant {fit.C_quad:.6f}")


if __name__ == "__main__":
    main()
