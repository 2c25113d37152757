"""Shared builders: specs from short names, hand-built realizations and
trajectories for fixture tests that need exact point placement."""

import math

import numpy as np
import pytest

from gwlab import (
    INTERSECTING,
    PARALLEL,
    SINGLE_LINE,
    ProcessSpec,
    Realization,
    Site,
    Space,
    Trajectory,
    distance,
)


@pytest.fixture
def spec_for():
    def build(construction, L=25.0, rate=1.0, r=1.0, alpha=None, p=0.5,
              s=0.3, allow=False):
        if construction == "single-line":
            return ProcessSpec(construction=construction,
                               space=Space(SINGLE_LINE, L), rate_lambda=rate)
        if construction == "intersecting":
            a = alpha if alpha is not None else math.pi / 3
            return ProcessSpec(construction=construction,
                               space=Space(INTERSECTING, L, alpha=a),
                               rate_lambda=rate)
        space = Space(PARALLEL, L, separation_r=r)
        kw = {}
        if construction == "parallel-thinned":
            kw["thinning_p"] = p
        if construction == "parallel-shifted":
            kw["shift_s"] = s
            kw["allow_unproven_shift"] = allow
        return ProcessSpec(construction=construction, space=space,
                           rate_lambda=rate, **kw)

    return build


@pytest.fixture
def hand_real(spec_for):
    """Realization from explicit point lists, bypassing the sampler."""

    def build(construction, line0, line1=None, flags=None, **kw):
        spec = spec_for(construction, **kw)
        a0 = np.asarray(line0, dtype=np.float64)
        if construction == "single-line":
            a1 = np.empty(0)
        elif construction == "parallel-duplicated":
            a1 = a0.copy()
        elif construction == "parallel-shifted":
            a1 = a0 + spec.shift_s
        else:
            a1 = np.asarray([] if line1 is None else line1, dtype=np.float64)
        real = Realization(
            spec=spec,
            seed=0,
            line0=a0,
            line1=a1,
            base_points=np.union1d(a0, a1),
            duplicate_flags=tuple(flags) if flags else None,
        )
        real.check_invariants()
        return real

    return build


@pytest.fixture
def hand_traj():
    """Trajectory from an explicit visit order.

    Builds consistent visited-step arrays and true geometric step
    distances; it does not enforce that the order is greedy, which is the
    point: analysis code must take any trajectory at face value.
    """

    def build(real, us, lines, start=Site(0.0, 0), stop_reason="truncated"):
        us = np.asarray(us, dtype=np.float64)
        lines = np.asarray(lines, dtype=np.int8)
        vis0 = np.full(len(real.line0), -1, dtype=np.int64)
        vis1 = np.full(len(real.line1), -1, dtype=np.int64)
        prev = start
        dists = []
        for t, (u, l) in enumerate(zip(us, lines), start=1):
            arr = real.line0 if l == 0 else real.line1
            i = int(np.searchsorted(arr, u))
            assert i < len(arr) and arr[i] == u, f"({u}, {l}) not in realization"
            (vis0 if l == 0 else vis1)[i] = t
            here = Site(float(u), int(l))
            dists.append(distance(real.spec.space, prev, here))
            prev = here
        return Trajectory(
            start=start,
            us=us,
            lines=lines,
            step_distances=np.asarray(dists, dtype=np.float64),
            stop_reason=stop_reason,
            visited_step0=vis0,
            visited_step1=vis1,
        )

    return build
