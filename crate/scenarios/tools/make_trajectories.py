"""Writes the external-arm trajectories in ../trajectories.

Each external arm alternates between a parked posture and reaches into the
controlled arm's path region. Keyframe tip positions are solved to joint
positions here and joined by cosine blends.
"""
import math
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from chain import Chain, frame

ROOT = Path(__file__).resolve().parent.parent
RATE = 50.0


def ik(chain, target, seed, nominal, lower, upper):
    def res(q):
        return np.concatenate([10 * (chain.tip(q) - target), 0.05 * (q - nominal)])
    return least_squares(res, seed, bounds=(lower, upper)).x


def limits(chain):
    lo, hi = [], []
    for j in chain.doc["joints"]:
        if j["kind"] == "revolute":
            lo.append(j["limits"]["pos"][0] + 0.05)
            hi.append(j["limits"]["pos"][1] - 0.05)
    return np.array(lo), np.array(hi)


def trajectory(chain, park, keyframes, duration):
    """keyframes: [(time, tip or None)] with None meaning the parked posture."""
    lo, hi = limits(chain)
    park = np.array(park, float)
    qs, q = [], park
    for _, tip in keyframes:
        q = park if tip is None else ik(chain, np.array(tip), q, park, lo, hi)
        qs.append(q)
    times = [t for t, _ in keyframes]
    rows = []
    for k in range(int(round(duration * RATE)) + 1):
        t = k / RATE
        i = max(i for i in range(len(times)) if times[i] <= t) if t >= times[0] else 0
        if i + 1 < len(times):
            s = (t - times[i]) / (times[i + 1] - times[i])
            s = 0.5 - 0.5 * math.cos(math.pi * min(max(s, 0), 1))
            q = qs[i] + s * (qs[i + 1] - qs[i])
        else:
            q = qs[-1]
        rows.append([t, *q])
    return rows


def reaches(targets, start=0.5, travel=1.2, dwell=0.6, rest=0.6):
    """Park, reach each target in turn and park again between them."""
    frames, t = [(0.0, None), (start, None)], start
    for tip in targets:
        frames += [(t + travel, tip), (t + travel + dwell, tip), (t + 2 * travel + dwell, None)]
        t += 2 * travel + dwell + rest
        frames.append((t, None))
    return frames


def write(name, rows):
    path = ROOT / "trajectories" / f"{name}.csv"
    with open(path, "w") as f:
        f.write("stamp," + ",".join(f"q{i + 1}" for i in range(len(rows[0]) - 1)) + "\n")
        for r in rows:
            f.write(f"{r[0]:.2f}," + ",".join(f"{v:.6f}" for v in r[1:]) + "\n")


S7 = str(ROOT / "models" / "s7.json")
S6 = str(ROOT / "models" / "s6.json")
DURATION = 12.1

# S2: one S7 facing the controlled arm across the path
s2_base = frame((1.0, 0, 0), (0, 0, math.pi))
s2 = Chain(S7, s2_base)
s2_park = [0, -0.9, 0, 2.4, 0, 1.2, 0]
write("s2_yz", trajectory(s2, s2_park, reaches([
    (0.60, -0.12, 0.38), (0.60, 0.0, 0.52), (0.60, 0.12, 0.38), (0.60, 0.0, 0.30),
]), DURATION))
write("s2_xy", trajectory(s2, s2_park, reaches([
    (0.50, -0.12, 0.26), (0.42, 0.0, 0.26), (0.50, 0.12, 0.26), (0.56, 0.0, 0.26),
]), DURATION))

# S3: two arms on either side sweeping across the path in turn
left_base = frame((0.5, 0.75, 0), (0, 0, -math.pi / 2))
right_base = frame((0.5, -0.75, 0), (0, 0, math.pi / 2))
left, right = Chain(S7, left_base), Chain(S6, right_base)
park7, park6 = [0, -0.9, 0, 2.4, 0, 1.2, 0], [0, -1.0, 2.4, 0, 0.5, 0]
write("s3_yz_left", trajectory(left, park7, reaches([
    (0.60, 0.05, 0.45), (0.62, 0.0, 0.32), (0.60, 0.08, 0.52),
], start=0.5, travel=1.4, dwell=0.8, rest=1.6), DURATION))
write("s3_yz_right", trajectory(right, park6, reaches([
    (0.60, -0.05, 0.35), (0.62, 0.0, 0.48), (0.60, -0.08, 0.28),
], start=2.6, travel=1.4, dwell=0.8, rest=1.6), DURATION))
write("s3_xy_left", trajectory(left, park7, reaches([
    (0.40, 0.05, 0.26), (0.30, 0.0, 0.27), (0.50, 0.06, 0.26),
], start=0.5, travel=1.4, dwell=0.8, rest=1.6), DURATION))
write("s3_xy_right", trajectory(right, park6, reaches([
    (0.50, -0.05, 0.26), (0.36, 0.0, 0.27), (0.44, -0.06, 0.26),
], start=2.6, travel=1.4, dwell=0.8, rest=1.6), DURATION))
