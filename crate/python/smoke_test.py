#!/usr/bin/env python3
"""Smoke test for the cdpr_py extension module.

Builds the extension if needed, stages it as an importable module in a temp
directory, and exercises the main surface end to end:

    python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    lib = ROOT / "target" / "debug" / "libcdpr_py.so"
    if not lib.exists():
        subprocess.run(["cargo", "build", "-p", "cdpr-py"], cwd=ROOT, check=True)
    stage = Path(tempfile.mkdtemp(prefix="cdpr-py-"))
    shutil.copy2(lib, stage / "cdpr_py.so")
    sys.path.insert(0, str(stage))
    import cdpr_py

    return cdpr_py


def check(name, ok):
    print(f"{'ok' if ok else 'FAIL':4} {name}")
    if not ok:
        sys.exit(1)


def main():
    m = load_module()
    r = m.Robot()
    check("robot: reference has two cables", r.cable_count() == 2)

    lengths = r.ik(750.0, 750.0)
    check(
        "ik: centre pose",
        all(abs(l - 975.8073580374356) < 1e-12 for l in lengths),
    )

    x, y = r.fk(lengths)
    check("fk: inverts ik", abs(x - 750.0) < 1e-9 and abs(y - 750.0) < 1e-9)

    try:
        r.fk([1.0, 1.0])
        check("fk: rejects impossible lengths", False)
    except ValueError:
        check("fk: rejects impossible lengths", True)

    t = r.tensions(750.0, 750.0)
    check(
        "tensions: centre pose",
        all(abs(ti - 6.9367175234400325) < 1e-12 for ti in t),
    )

    check(
        "feasibility: centre in, near anchor line out",
        r.is_feasible(750.0, 750.0) and not r.is_feasible(750.0, 1435.0),
    )

    check("workspace: 3x3 patch fully feasible",
          r.workspace(700.0, 800.0, 700.0, 800.0, spacing=50.0) == (9, 9))

    plan = m.Plan.square(speed=100.0)
    check("plan: square duration", abs(plan.duration() - 8.2) < 1e-12)
    check("plan: starts at the bottom-left corner",
          plan.pose_at(0.0) == (650.0, 750.0))

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "plan.json"
        plan.save(path)
        check("plan: JSON round trip",
              m.Plan.load(path).duration() == plan.duration())

    setpoints = plan.sample(r, cycle_s=0.01)
    check("plan: sampling covers the whole path",
          len(setpoints) == 821 and setpoints[-1][0] == plan.duration())

    p = m.Plant(r, mode="ideal-kinematic")
    cmd = r.ik(760.0, 750.0)
    p.step(cmd, n=200)  # 100 ms, ample for the 2 ms axis servo
    px, py = p.pose()
    check("plant: ideal mode settles on the commanded pose",
          abs(px - 760.0) < 1e-6 and abs(py - 750.0) < 1e-6)

    dyn = m.Plant(r, mode="dynamic")
    dyn.step(r.ik(750.0, 750.0), n=100)
    check("plant: dynamic mode holds tension at rest",
          all(ti > 0.0 for ti in dyn.tensions()))

    fast = m.Plan.square(side=50.0, speed=1000.0)
    direct = m.run_loop(r, fast, plant_mode="ideal")
    check("run_loop: direct log holds every cycle", len(direct) >= 100)

    remote = m.run_loop(r, fast, gateway=(30.0, 5.0, 7))
    rep = remote.delay_report("remote")
    check(
        "delay_report: 30 ms gateway delay visible on both axes",
        len(rep) == 2 and all(30.0 < d < 45.0 for (_, d, _, _) in rep),
    )

    again = m.run_loop(r, fast, gateway=(30.0, 5.0, 7))
    check("run_loop: deterministic given a seed",
          again.records() == remote.records())

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "loop.csv"
        remote.save(path)
        back = m.LoopLog.load(path).records()  # CSV keeps 6 significant digits
        check(
            "log: CSV round trip",
            len(back) == len(remote)
            and all(
                ta == tb and math.isclose(xa, xb, rel_tol=1e-5)
                for (ta, (xa, _), _), (tb, (xb, _), _) in zip(back, remote.records())
            ),
        )

    base = [math.sin(0.05 * i) for i in range(300)]
    d = m.estimate_delay(base[10:210], base[0:200], 0.001)
    check("estimate_delay: recovers a 10-sample shift", abs(d - 10.0) < 0.5)

    print("all smoke tests passed")


if __name__ == "__main__":
    main()
