"""Uniaxial compression sweep: penalty variants x alpha x resolution.

Writes report.csv plus per-run trace/field CSVs under the output directory.
"""
import argparse

from dgrelax.harness import RunConfig, run_compression


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--output", default="results/compression")
    ap.add_argument("--alphas", type=float, nargs="+", default=[20, 40, 80, 160])
    ap.add_argument("--resolutions", type=int, nargs="+", default=[16])
    ap.add_argument("--max-iterations", type=int, default=5000)
    args = ap.parse_args()

    cfg = RunConfig(experiment="compression", output_dir=args.output,
                    alphas=tuple(args.alphas),
                    resolutions=tuple((n, n) for n in args.resolutions),
                    max_iterations=args.max_iterations)
    for rec in run_compression(cfg):
        print(f"{rec.run_id}: total={rec.total:.8f} W11={rec.err_w11:.3e} "
              f"[{rec.termination} after {rec.iterations} its, {rec.wall_time:.1f}s]")


if __name__ == "__main__":
    main()
