"""Compare the two switching strategies on a two-level strip and record per-level growth ratios."""
import argparse
from pathlib import Path

from lfpp import multiscale
from lfpp.cli import dump_json
from lfpp.geometry import ScaleParams

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--N", type=int, default=32)
    p.add_argument("--aspect", type=int, default=8)
    p.add_argument("--beta", type=float, default=4.0)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--out", type=Path, default=ROOT / "results" / "multiscale.json")
    args = p.parse_args()
    params = ScaleParams.from_m(2, m_Gamma=2)
    out = {"gamma": args.gamma, "N": args.N, "aspect": args.aspect, "beta": args.beta,
           "delta": params.delta, "alpha": params.alpha}
    for strategy in ("I", "II"):
        stats, _ = multiscale.recursive_run(params, args.levels, args.gamma, args.replicas, args.seed,
                                            N=args.N, aspect=args.aspect, beta=args.beta,
                                            strategy=strategy, threads=args.threads)
        out[strategy] = [s.__dict__ for s in stats]
        for s in stats:
            print(f"{strategy} level {s.level}: d {s.d_mean:.2f} +- {s.d_se:.2f}, ratio {s.ratio:.4f}, "
                  f"switches max {s.switches_max}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(dump_json(out))


if __name__ == "__main__":
    main()
