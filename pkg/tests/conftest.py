"""Closed-loop runs are slow (~15 s each); run each configuration once per session.

Acceptance tests report through ``acceptance``; the outcome lines are printed
in the terminal summary so they show even with output capture on.
"""
import contextlib
import time

import pytest

from hapticforceps.errors import PhaseTimeout
from hapticforceps.sim import run_grasp_procedure

from support import default_config

FAST_CAMERA = {"fx": 200.0, "fy": 200.0, "u0": 100.0, "v0": 100.0, "width": 200, "height": 200}


def simulate(cfg):
    """Run the procedure; returns (trace, timeout exception or None)."""
    try:
        return run_grasp_procedure(cfg.grasp_config(), cfg.plant(), cfg.estimator()), None
    except PhaseTimeout as exc:
        return exc.trace, exc


@pytest.fixture(scope="session")
def timed_default_run():
    t0 = time.perf_counter()
    trace, err = simulate(default_config())
    elapsed = time.perf_counter() - t0
    assert err is None, err
    return trace, elapsed


@pytest.fixture(scope="session")
def default_run(timed_default_run):
    return timed_default_run[0]


@pytest.fixture(scope="session")
def pull02_run():
    trace, err = simulate(default_config(grasp={"F_p_target": 0.2}))
    assert err is None, err
    return trace


@pytest.fixture(scope="session")
def uncompensated_run():
    trace, err = simulate(default_config(grasp={"compensation": False}))
    assert err is None, err
    return trace


@pytest.fixture(scope="session")
def fast_overrides():
    """A 200x200 camera with short pends; used where only plumbing is under test."""
    return ([f"camera.{k}={v}" for k, v in FAST_CAMERA.items()]
            + ["render.occlusion_radius=5.0", "grasp.pend_duration=0.3", "grasp.hold_duration=0.2"])


ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """``with acceptance(n, title) as info:`` records PASS/FAIL for criterion n.

    Put measured numbers in ``info["detail"]``; they are shown on the line.
    """
    @contextlib.contextmanager
    def record(n, title):
        info = {"detail": ""}
        try:
            yield info
        except BaseException as exc:
            why = str(exc).strip().splitlines()[0] if str(exc).strip() else exc.__class__.__name__
            ACCEPTANCE[n] = ("FAIL", title, (info["detail"] + "; " if info["detail"] else "") + why)
            print(f"criterion {n}: FAIL {title}")
            raise
        ACCEPTANCE[n] = ("PASS", title, info["detail"])
        print(f"criterion {n}: PASS {title}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}" + (f"  [{detail}]" if detail else ""))
