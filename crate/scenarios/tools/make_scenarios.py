"""Writes the scenario corpus in .. (one file per scenario, shape and plane).
External arms replay the CSVs written by make_trajectories.py."""
import json
import math
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
HALF_PI = math.pi / 2

# tool pointing along +x for vertical paths, straight down for horizontal ones
PLANES = {
    "YZ": {"center": [0.55, 0.0, 0.40], "rpy": [0, 0, 0], "home": [0, -0.6, 1.4, 0, -0.8, 0]},
    "XY": {"center": [0.40, 0.0, 0.20], "rpy": [0, HALF_PI, 0], "home": [0, 0.3, 0.6, 0, 0.6, 0]},
}
SHAPES = {
    "square": {"size": 0.40, "duration": 12.03},
    "circle": {"size": 0.18, "duration": 12.0},
    "eight": {"size": 0.10, "duration": 12.0},
}


def controlled(name, shape, plane, base=None, center=None, offset=0.0, model="models/s6.json", home=None):
    p = PLANES[plane]
    arm = {
        "name": name,
        "model": model,
        "home": home or p["home"],
        "path": {"shape": shape, "plane": plane, "center": center or p["center"], **SHAPES[shape]},
        "orientation_rpy": p["rpy"],
    }
    if base:
        arm["base"] = base
    if offset:
        arm["path_offset"] = offset
    return arm


def scenario(sid, shape, plane, seed, controlled_arms, external=()):
    return {
        "id": sid,
        "name": f"{sid.lower()}_{shape}_{plane.lower()}",
        "seed": seed,
        "trials": 5,
        "expect_no_collisions": True,
        "controlled": controlled_arms,
        "external": list(external),
    }


def write(doc):
    (ROOT / f"{doc['name']}.json").write_text(json.dumps(doc, indent=2) + "\n")


seed = 100
for shape in SHAPES:
    for plane in PLANES:
        seed += 1
        write(scenario("S1", shape, plane, seed, [controlled("s6", shape, plane)]))



def external(name, model, xyz, yaw, trajectory):
    return {"name": name, "model": model, "base": {"xyz": xyz, "rpy": [0, 0, yaw]},
            "trajectory": f"trajectories/{trajectory}.csv"}


seed = 200
for shape in SHAPES:
    for plane in PLANES:
        seed += 1
        write(scenario("S2", shape, plane, seed, [controlled("s6", shape, plane)], [
            external("s7", "models/s7.json", [1.0, 0, 0], math.pi, f"s2_{plane.lower()}"),
        ]))

seed = 300
for shape in SHAPES:
    for plane in PLANES:
        seed += 1
        write(scenario("S3", shape, plane, seed, [controlled("s6", shape, plane)], [
            external("left", "models/s7.json", [0.5, 0.75, 0], -HALF_PI, f"s3_{plane.lower()}_left"),
            external("right", "models/s6.json", [0.5, -0.75, 0], HALF_PI, f"s3_{plane.lower()}_right"),
        ]))

# S4: an S7 facing the S6 across a shared path, half a lap apart (a quarter
# on the eight, whose halves both start at the crossing). The circle starts
# on the S7 side, so there the S6 takes the lead to keep the arms uncrossed.
S4 = {
    "YZ": {"base": [1.1, 0, 0], "home": [0, -0.6, 0, 1.4, 0, -0.8, 0], "rpy": [0, 0, math.pi]},
    "XY": {"base": [0.8, 0, 0], "home": [0, 0.3, 0, 0.6, 0, 0.6, 0], "rpy": [0, HALF_PI, 0]},
}
seed = 400
for shape in SHAPES:
    for plane in PLANES:
        seed += 1
        s4 = S4[plane]
        lag = SHAPES[shape]["duration"] / (4 if shape == "eight" else 2)
        lead = shape == "circle" and plane == "XY"
        own = controlled("s6", shape, plane, offset=lag if lead else 0.0)
        partner = controlled("s7", shape, plane, base={"xyz": s4["base"], "rpy": [0, 0, math.pi]},
                             offset=0.0 if lead else lag, model="models/s7.json", home=s4["home"])
        partner["orientation_rpy"] = s4["rpy"]
        write(scenario("S4", shape, plane, seed, [own, partner]))
