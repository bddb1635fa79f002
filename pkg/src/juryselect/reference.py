"""Reference values (mean, SD) for the reproduction reports.

Misclassification cells are fractions; MCS cells are percentages.  Cells
printed as a dash in the source tables are stored as exact 0 / 100 with SD 0.
"""

from __future__ import annotations

NOISES = ("LOW", "MID", "HIGH")
POPULATIONS = ("All", "B_up", "D_up", "L_up")

MISCLASS_TOLERANCE = 0.05
MCS_TOLERANCE = 3.0

_Z = (0.0, 0.0)
_H = (100.0, 0.0)

# (method, group) -> noise -> population -> (mean, sd)
MISCLASS = {
    ("GMM", "authentic"): {
        "LOW": {"All": (0.04, 0.04), "B_up": _Z, "D_up": _Z, "L_up": (0.03, 0.05)},
        "MID": {"All": (0.11, 0.13), "B_up": _Z, "D_up": (0.00, 0.008), "L_up": (0.04, 0.03)},
        "HIGH": {"All": (0.5, 0.26), "B_up": (0.01, 0.02), "D_up": (0.01, 0.02), "L_up": (0.09, 0.06)},
    },
    ("GMM", "inauthentic"): {
        "LOW": {"All": (0.03, 0.03), "B_up": (0.13, 0.00), "D_up": _Z, "L_up": _Z},
        "MID": {"All": (0.04, 0.04), "B_up": (0.13, 0.00), "D_up": _Z, "L_up": (0.03, 0.12)},
        "HIGH": {"All": (0.35, 0.17), "B_up": (0.13, 0.002), "D_up": _Z, "L_up": (0.81, 0.11)},
    },
    ("KM", "authentic"): {
        "LOW": {"All": (0.2, 0.4), "B_up": _Z, "D_up": _Z, "L_up": (0.002, 0.006)},
        "MID": {"All": (0.07, 0.17), "B_up": (0.01, 0.03), "D_up": (0.00, 0.01), "L_up": (0.016, 0.016)},
        "HIGH": {"All": (0.31, 0.29), "B_up": (0.03, 0.004), "D_up": (0.05, 0.07), "L_up": (0.01, 0.03)},
    },
    ("KM", "inauthentic"): {
        "LOW": {"All": (0.43, 0.28), "B_up": (0.13, 0.00), "D_up": (0.05, 0.06), "L_up": (0.00, 0.001)},
        "MID": {"All": (0.48, 0.12), "B_up": (0.13, 0.003), "D_up": (0.05, 0.06), "L_up": (0.06, 0.11)},
        "HIGH": {"All": (0.56, 0.16), "B_up": (0.13, 0.01), "D_up": (0.44, 0.41), "L_up": (0.97, 0.07)},
    },
}

# KM false-negative rates on the All population, LOW noise, by rounds.
KM_ROBUSTNESS_LOW = {
    "B_up": {500: (0.44, 0.41), 250: (0.56, 0.43)},
    "B_down": {500: (0.39, 0.5), 250: (0.52, 0.5)},
    "B_both": {500: (0.37, 0.48), 250: (0.51, 0.5)},
    "D_up": {500: (0.54, 0.44), 250: (0.68, 0.4)},
    "D_down": {500: (0.39, 0.5), 250: (0.52, 0.5)},
    "D_both": {500: (0.24, 0.36), 250: (0.34, 0.41)},
}


def _baw(best, average, worst):
    return {"best": best, "average": average, "worst": worst}


_ALL_H = _baw(_H, _H, _H)

# population -> filter -> noise -> {"baseline": cell, "GMM": {mode: cell}, "KM": {mode: cell}}
MCS = {
    "B_up": {
        "NONE": {
            "LOW": {"baseline": (81.11, 1.99), "GMM": _ALL_H, "KM": _ALL_H},
            "MID": {"baseline": (87.50, 1.39), "GMM": _ALL_H, "KM": _ALL_H},
            "HIGH": {"baseline": (97.58, 0.73), "GMM": _ALL_H, "KM": _ALL_H},
        },
        "ACTIVE": {
            "LOW": {"baseline": (74.83, 2.75), "GMM": _ALL_H, "KM": _ALL_H},
            "MID": {"baseline": (75.41, 3.8), "GMM": _ALL_H, "KM": _ALL_H},
            "HIGH": {"baseline": (77.17, 21.54), "GMM": _ALL_H, "KM": _ALL_H},
        },
    },
    "D_up": {
        "NONE": {
            "LOW": {"baseline": (77.43, 2.18), "GMM": _ALL_H, "KM": _ALL_H},
            "MID": {"baseline": (87.62, 1.6), "GMM": _ALL_H, "KM": _ALL_H},
            "HIGH": {
                "baseline": (97.59, 0.73),
                "GMM": _ALL_H,
                "KM": _baw(_H, (99.89, 0.14), (97.59, 0.73)),
            },
        },
        "ACTIVE": {
            "LOW": {"baseline": (74.83, 2.75), "GMM": _ALL_H, "KM": _ALL_H},
            "MID": {"baseline": (75.41, 3.8), "GMM": _ALL_H, "KM": _ALL_H},
            "HIGH": {
                "baseline": (77.17, 21.54),
                "GMM": _ALL_H,
                "KM": _baw(_H, (99.20, 3.52), (77.17, 21.54)),
            },
        },
    },
    "L_up": {
        "NONE": {
            "LOW": {"baseline": (74.94, 2.25), "GMM": _ALL_H, "KM": _ALL_H},
            "MID": {"baseline": (99.98, 0.07), "GMM": _ALL_H, "KM": _ALL_H},
            "HIGH": {"baseline": _H, "GMM": _ALL_H, "KM": _ALL_H},
        },
        "ACTIVE": {
            "LOW": {"baseline": (74.93, 2.77), "GMM": _ALL_H, "KM": _ALL_H},
            "MID": {"baseline": (99.99, 0.07), "GMM": _ALL_H, "KM": _ALL_H},
            "HIGH": {"baseline": _H, "GMM": _ALL_H, "KM": _ALL_H},
        },
    },
    "All": {
        "NONE": {
            "LOW": {
                "baseline": (66.21, 2.18),
                "GMM": _baw(_H, _H, (92.41, 1.27)),
                "KM": _baw(_H, (82.19, 1.98), (64.21, 2.27)),
            },
            "MID": {
                "baseline": (75.12, 2.08),
                "GMM": _ALL_H,
                "KM": _baw((100.00, 0.02), (97.07, 0.77), (92.99, 1.1)),
            },
            "HIGH": {
                "baseline": (98.37, 0.45),
                "GMM": _baw(_H, _H, (99.90, 0.14)),
                "KM": _baw(_H, _H, (99.95, 0.1)),
            },
        },
        "ACTIVE": {
            "LOW": {
                "baseline": (74.83, 2.75),
                "GMM": _baw(_H, _H, (89.84, 1.81)),
                "KM": _baw(_H, (74.83, 2.75), (74.83, 2.75)),
            },
            "MID": {
                "baseline": (75.41, 3.8),
                "GMM": _ALL_H,
                "KM": _baw((99.99, 0.07), (89.54, 2.8), (78.43, 3.72)),
            },
            "HIGH": {
                "baseline": (94.18, 11.34),
                "GMM": _baw(_H, _H, (91.02, 12.79)),
                "KM": _baw(_H, _H, (94.92, 10.74)),
            },
        },
    },
}

# Authentic-only juries reach this MCS from this many agents on.
CONDORCET_SUFFICIENT = 25
# MCS of one authentic agent among 100 coordinated up-voters, active rounds only.
HOSPITABLE_MCS = 75.0
