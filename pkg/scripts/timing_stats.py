"""Inter-packet interval statistics of the empirical jitter model."""

import argparse

import numpy as np

from wifiradar.doppler import interval_stats
from wifiradar.scene_sim import PacketTimingModel, generate_packet_times


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=25.0)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--drop", type=float, default=0.0, help="packet drop probability")
    args = ap.parse_args()
    model = PacketTimingModel(jitter_law="empirical", drop_probability=args.drop)
    t = generate_packet_times(model, args.duration, np.random.default_rng(args.seed))
    s = interval_stats(t)
    print(f"intervals {t.size - 1}")
    print(f"median    {s.median_s * 1e3:.4f} ms")
    print(f"MAD       {s.mad_s * 1e3:.5f} ms")
    print(f"range     [{s.min_s * 1e3:.3f}, {s.max_s * 1e3:.3f}] ms")
    d = np.diff(t)
    for q in (0.01, 0.5, 0.99, 0.999):
        print(f"q{q:<8g}{np.quantile(d, q) * 1e3:.4f} ms")


if __name__ == "__main__":
    main()
