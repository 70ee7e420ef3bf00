"""Walk one synthetic subject through assembly and feature extraction.

A subject holds 6 muscles x 7 movements x 3 repetitions of sEMG. One sample
picks a repetition per movement, which gives a 6 x 7 grid of recordings, and
every recording becomes six feature vectors (time, frequency, DWT, wavelet
packet, AR, entropy). Stacking those per family gives six 6 x 7 x depth
tensors, one per network channel.

    python3 demos/features_of_one_subject.py --length 4096
"""
import argparse

import numpy as np

from cs_emg.dataset import MOVEMENTS, MUSCLES, assemble_samples
from cs_emg.features import FAMILIES, FEATURE_NAMES, FeatureConfig, extract_sample, extract_signal
from cs_emg.synthetic import SynthConfig, generate_subject


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=int, default=4096)
    ap.add_argument("--label", type=int, default=1, choices=(0, 1))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    bundle = generate_subject(args.label, SynthConfig(length=args.length, seed=args.seed), 0)
    print(f"subject {bundle.subject_id}, label {bundle.label}: {len(bundle.recordings)} recordings")

    # every combination of repetitions is a distinct sample
    grids = assemble_samples(bundle, "exhaustive")
    print(f"exhaustive assembly: {len(grids)} samples")

    rec = bundle.recordings[(0, 0, 0)]
    print(f"\none recording: {MUSCLES[0]} during {MOVEMENTS[0]}, {rec.samples.size} points")
    for family, values in zip(FAMILIES, extract_signal(rec.samples, FeatureConfig())):
        names = FEATURE_NAMES[family]
        shown = ", ".join(f"{n}={v:.3g}" for n, v in list(zip(names, values))[:4])
        print(f"  {family:<8} {len(names):>2} values: {shown}{', ...' if len(names) > 4 else ''}")

    sample = extract_sample(grids[0])
    print("\nper-channel tensors of the first sample:")
    for family, grid in zip(FAMILIES, sample.families):
        print(f"  {family:<8} {grid.shape}  mean {np.nanmean(grid):+.3f}")
    print(f"flattened: {sample.flat().size} features")


if __name__ == "__main__":
    main()
