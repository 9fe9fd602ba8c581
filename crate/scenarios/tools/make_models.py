"""Writes the synthetic arm descriptions in ../models.

Each arm is a serial chain of revolute joints with one capsule per link
along the link's x axis (the first link stands vertically).
"""
import json
import math
from pathlib import Path

HALF_PI = math.pi / 2


def arm(name, base_height, column, segments, never_collide):
    """segments: (axis, length, radius, (lower, upper)) after the column joint."""
    joints = [{
        "name": "j1", "kind": "revolute", "axis": [0, 0, 1],
        "origin": {"xyz": [0, 0, base_height]},
        "limits": {"pos": [-3.0, 3.0], "vel": 2.5, "acc": 15.0},
    }]
    links = [
        {"name": "base", "parent_joint": None},
        {"name": "link1", "parent_joint": "j1", "collision": [{
            "type": "capsule", "dims": [column[1], column[0] / 2 - column[1] / 2],
            "pose": {"xyz": [0, 0, column[0] / 2]}}]},
    ]
    prev_offset = [0, 0, column[0]]
    for i, (axis, length, radius, lim) in enumerate(segments, start=2):
        joints.append({
            "name": f"j{i}", "kind": "revolute", "axis": axis,
            "origin": {"xyz": prev_offset},
            "limits": {"pos": list(lim), "vel": 2.5, "acc": 15.0},
        })
        links.append({"name": f"link{i}", "parent_joint": f"j{i}", "collision": [{
            "type": "capsule", "dims": [radius, length / 2],
            "pose": {"xyz": [length / 2, 0, 0], "rpy": [0, HALF_PI, 0]}}]})
        prev_offset = [length, 0, 0]
    joints.append({"name": "tool_joint", "kind": "fixed", "origin": {"xyz": prev_offset}})
    links.append({"name": "tool", "parent_joint": "tool_joint"})
    return {"name": name, "joints": joints, "links": links, "end_effector": "tool",
            "never_collide": [list(p) for p in never_collide]}


Y, X = [0, 1, 0], [1, 0, 0]
s6 = arm("s6", 0.10, (0.25, 0.05), [
    (Y, 0.25, 0.045, (-2.0, 2.0)),
    (Y, 0.20, 0.040, (-2.6, 2.6)),
    (X, 0.15, 0.035, (-3.0, 3.0)),
    (Y, 0.10, 0.030, (-1.7, 1.7)),
    (X, 0.08, 0.030, (-3.0, 3.0)),
], [("link3", "link5"), ("link3", "link6"), ("link4", "link6")])

s7 = arm("s7", 0.10, (0.25, 0.05), [
    (Y, 0.20, 0.045, (-2.0, 2.0)),
    (X, 0.12, 0.040, (-3.0, 3.0)),
    (Y, 0.20, 0.040, (-2.5, 2.5)),
    (X, 0.12, 0.035, (-3.0, 3.0)),
    (Y, 0.10, 0.030, (-1.7, 1.7)),
    (X, 0.08, 0.030, (-3.0, 3.0)),
], [("link2", "link4"), ("link4", "link6"), ("link4", "link7"), ("link5", "link7")])

out = Path(__file__).resolve().parent.parent / "models"
for m in (s6, s7):
    (out / f"{m['name']}.json").write_text(json.dumps(m, indent=2) + "\n")
