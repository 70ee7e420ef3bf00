"""Sweep the channel subsets and convolution filter sizes.

Eight channel subsets always keep the time, frequency and DWT channels and
add combinations of the wavelet packet, AR and entropy channels. Five runs
then vary the square filter from 6x6 down to 2x2 with all channels on.
Each run prints one metrics row.

With the full-width network and the default cohort every run needs a few
minutes per epoch; the defaults below keep the whole sweep short.

    python3 demos/channel_and_filter_sweep.py --epochs 1
"""
import argparse

from cs_emg.pipeline import extract_cohort, run_sweep, split_of
from cs_emg.synthetic import SynthConfig, generate_cohort
from cs_emg.training import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--subjects", type=int, default=20, help="subjects per class")
    ap.add_argument("--length", type=int, default=4096)
    ap.add_argument("--samples", type=int, default=5, help="random samples per subject")
    ap.add_argument("--epochs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    bundles = generate_cohort(SynthConfig(args.subjects, args.length, seed=args.seed))
    samples = extract_cohort(bundles, "random", args.samples, args.seed)
    run_sweep(samples, split_of(samples, args.seed), TrainConfig(max_epoch=args.epochs, seed=args.seed))


if __name__ == "__main__":
    main()
