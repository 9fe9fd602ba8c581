"""Forward kinematics for the shipped description files, used to author
external-arm trajectories."""
import json
import math

import numpy as np


def rot(axis, a):
    x, y, z = axis / np.linalg.norm(axis)
    c, s = math.cos(a), math.sin(a)
    C = 1 - c
    return np.array([[c + x * x * C, x * y * C - z * s, x * z * C + y * s],
                     [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
                     [z * x * C - y * s, z * y * C + x * s, c + z * z * C]])


def rpy(r, p, y):
    return rot(np.array([0, 0, 1.0]), y) @ rot(np.array([0, 1.0, 0]), p) @ rot(np.array([1.0, 0, 0]), r)


def frame(xyz=(0, 0, 0), angles=(0, 0, 0)):
    T = np.eye(4)
    T[:3, :3] = rpy(*angles)
    T[:3, 3] = xyz
    return T


class Chain:
    def __init__(self, path, base=frame()):
        self.doc = json.load(open(path))
        self.base = base

    def joint_frames(self, q):
        """World frame of every joint's child link, in joint order."""
        T = self.base.copy()
        out = []
        i = 0
        for j in self.doc["joints"]:
            o = j.get("origin", {})
            T = T @ frame(o.get("xyz", (0, 0, 0)), o.get("rpy", (0, 0, 0)))
            if j["kind"] == "revolute":
                R = np.eye(4)
                R[:3, :3] = rot(np.array(j["axis"], float), q[i])
                T = T @ R
                i += 1
            out.append(T.copy())
        return out

    def tip(self, q):
        return self.joint_frames(q)[-1][:3, 3]

    def segments(self, q):
        """Capsule axes as (start, end, radius) in world coordinates."""
        frames = self.joint_frames(q)
        segs = []
        for link in self.doc["links"]:
            for c in link.get("collision", []):
                T = frames[[j["name"] for j in self.doc["joints"]].index(link["parent_joint"])]
                P = T @ frame(c["pose"].get("xyz", (0, 0, 0)), c["pose"].get("rpy", (0, 0, 0)))
                r, h = c["dims"]
                a = P[:3, 2]
                segs.append((P[:3, 3] - h * a, P[:3, 3] + h * a, r))
        return segs
