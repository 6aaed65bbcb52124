"""Run the Monte Carlo oracle suite and print a status table.

    python scripts/oracle_report.py --replications 200000 --seed 0
"""
import argparse

from clicklab.oracle import OracleConfig, run_oracle_suite


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--replications", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exponent", type=float, default=0.5)
    args = p.parse_args()
    claims = run_oracle_suite(OracleConfig(args.replications, args.seed, args.exponent))
    width = max(len(c.claim) for c in claims)
    for c in claims:
        print(f"{c.claim:<{width}}  expected {c.expected:9.4f}  measured {c.measured:9.4f}  {c.status.value}")


if __name__ == "__main__":
    main()
