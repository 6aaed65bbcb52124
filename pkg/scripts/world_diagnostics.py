"""Distribution summaries of a generated world and search stream.

Writes CSVs for cluster sizes, searches per cluster, result-list sizes and
records per cluster, and prints a short summary.

    python scripts/world_diagnostics.py --out diag/ --searches 10000 --seed 0
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from clicklab.synthworld import GenConfig, generate_search_stream, generate_world, proxy_relevance_correlation


def write_counts(path, key, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([key, "count"])
        for i, v in enumerate(values):
            w.writerow([i, int(v)])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", required=True)
    p.add_argument("--clusters", type=int, default=100)
    p.add_argument("--mean-size", type=float, default=100.0)
    p.add_argument("--max-results", type=int, default=10)
    p.add_argument("--searches", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gen = GenConfig(args.clusters, args.mean_size, args.max_results, seed=args.seed)
    world = generate_world(gen)
    stream = generate_search_stream(world, args.searches, seed=args.seed + 1)

    sizes = world.cluster_sizes
    per_cluster = np.bincount(stream.cluster_id, minlength=world.n_clusters)
    list_sizes = np.bincount(stream.lengths, minlength=args.max_results + 1)
    records = np.bincount(stream.cluster_id, weights=stream.lengths, minlength=world.n_clusters)

    write_counts(out / "cluster_sizes.csv", "cluster_id", sizes)
    write_counts(out / "searches_per_cluster.csv", "cluster_id", per_cluster)
    write_counts(out / "list_sizes.csv", "list_size", list_sizes)
    write_counts(out / "records_per_cluster.csv", "cluster_id", records)
    world.to_csv(out / "world.csv")

    print(f"documents: {world.n_docs}  clusters: {world.n_clusters}")
    print(f"cluster size min/median/max: {sizes.min()}/{int(np.median(sizes))}/{sizes.max()}")
    print(f"searches per cluster mean/sd: {per_cluster.mean():.1f}/{per_cluster.std():.1f}")
    print(f"share of full lists: {list_sizes[-1] / len(stream):.3f}")
    print(f"proxy-relevance correlation: {proxy_relevance_correlation(world):.3f}")


if __name__ == "__main__":
    main()
