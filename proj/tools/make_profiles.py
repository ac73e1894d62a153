#!/usr/bin/env python3
"""Writes the default synthetic class profiles (config/profiles_default.json).

Each class has a base frequency, amplitude and noise level; channels jitter
around them. Frequencies stay in [0.5, 8] Hz and noise std in [0.05, 0.5].
Run is derived channel by channel from Walk: faster and stronger, same noise.
"""
import argparse
import json
import random

CLASSES = [
    # name, base frequency (Hz), base amplitude, base noise std, seed
    ("Drive", 1.2, 0.6, 0.15, 101),
    ("E-scooter", 4.5, 0.8, 0.25, 202),
    ("Still", 0.5, 0.1, 0.05, 404),
    ("Walk", 1.8, 1.2, 0.3, 505),
]
RUN_SEED = 303
CHANNELS = 22


def clamp(x, lo, hi):
    return max(lo, min(hi, x))


def make(seed, run_freq_scale, run_amp_scale):
    rng = random.Random(seed)
    classes = []
    for name, f, a, s, class_seed in CLASSES:
        channels = []
        for _ in range(CHANNELS):
            channels.append({
                "amplitude": round(a * rng.uniform(0.7, 1.3), 4),
                "frequency_hz": round(clamp(f * rng.uniform(0.8, 1.25), 0.5, 8.0), 4),
                "noise_std": round(clamp(s * rng.uniform(0.8, 1.25), 0.05, 0.5), 4),
                "drift": 0.0,
            })
        classes.append({"name": name, "seed": class_seed, "channels": channels})
    walk = next(c for c in classes if c["name"] == "Walk")["channels"]
    run = [{
        "amplitude": round(ch["amplitude"] * run_amp_scale, 4),
        "frequency_hz": round(clamp(ch["frequency_hz"] * run_freq_scale, 0.5, 8.0), 4),
        "noise_std": ch["noise_std"],
        "drift": 0.0,
    } for ch in walk]
    classes.append({"name": "Run", "seed": RUN_SEED, "channels": run})
    classes.sort(key=lambda c: c["name"])
    return {
        "sample_rate_hz": 120.0,
        "samples_per_window": 120,
        "session_length": 300,
        "classes": classes,
    }


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--run-freq-scale", type=float, default=1.2)
    p.add_argument("--run-amp-scale", type=float, default=1.2)
    p.add_argument("--out", default="config/profiles_default.json")
    args = p.parse_args()
    with open(args.out, "w") as f:
        json.dump(make(args.seed, args.run_freq_scale, args.run_amp_scale), f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
