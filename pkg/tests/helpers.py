"""Shared builders for the test suite.

Everything here is deterministic; tests that want randomness seed their own
numpy generator locally.
"""

import json

import numpy as np

from nutaxis.scenario import (
    ConstantEnvelope,
    ConstantProfile,
    SeparableSource,
    parse_scenario,
)


def scenario_doc(**overrides):
    """A small plateau scenario document, cheap enough for unit tests."""
    doc = {
        "L": 1.0,
        "n": 40,
        "t_end": 0.5,
        "u0_spec": {
            "kind": "plateau",
            "amplitude": 1.0,
            "x_left": 0.25,
            "x_right": 0.75,
        },
        "f_spec": {
            "space": {"kind": "constant", "amplitude": 1.0},
            "time": {"kind": "constant", "value": 1.0},
        },
        "eps_schedule": {"eps0": 0.4, "count": 2, "ratio": 0.5},
        "snapshot_count": 17,
        "lp_exponents": [2.0, 3.0],
    }
    doc.update(overrides)
    return doc


def make_scenario(**overrides):
    return parse_scenario(json.dumps(scenario_doc(**overrides)))


def homogeneous_doc(**overrides):
    doc = scenario_doc(
        u0_spec={"kind": "constant", "amplitude": 1.0},
        eps_schedule={"eps0": 0.4, "count": 4, "ratio": 0.5},
    )
    doc.update(overrides)
    return doc


def make_homogeneous(**overrides):
    return parse_scenario(json.dumps(homogeneous_doc(**overrides)))


def constant_source(value=1.0):
    return SeparableSource(ConstantProfile(value), ConstantEnvelope(1.0))


class ValuesOnlySource:
    """Wrapper hiding the separable structure, forcing the per-step path."""

    def __init__(self, inner):
        self._inner = inner

    def values(self, grid, t):
        return self._inner.values(grid, t)


class ZeroSource:
    """f identically zero; a scheme sanity case, rejected at scenario level."""

    def values(self, grid, t):
        return np.zeros(grid.n)
