"""Smoke test for the Python bindings.

Build first:
    cargo build -p dualdrm-py --release --features extension-module
then run from the repository root:
    python3 python/smoke_test.py
"""

import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def import_module():
    lib = os.path.join(ROOT, "target", "release", "libdualdrm_py.so")
    if not os.path.exists(lib):
        sys.exit(f"missing {lib}; build the extension first")
    tmp = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(tmp, "dualdrm_py.so"))
    sys.path.insert(0, tmp)
    import dualdrm_py

    return dualdrm_py, tmp


def main():
    dd, tmp = import_module()

    robot = dd.RobotModel.load(os.path.join(ROOT, "assets", "robots", "mini.json"))
    print(robot)
    dual = dd.DualRoadmap.build(
        robot, 3.141592653589793 / 6, 3.141592653589793 / 6,
        origin=[-0.8, -0.8, 0.0], voxel_size=0.1, dims=[16, 16, 12],
    )
    print(dual, dual.counts())

    path = os.path.join(tmp, "mini.drm")
    dual.save(path)
    again = dd.DualRoadmap.load(path)
    assert again.to_bytes() == dual.to_bytes()

    scenario = dd.Scenario.load(os.path.join(ROOT, "assets", "scenarios", "demo_mini.json"))
    out = dd.plan(dual, robot, scenario)
    print(f"{scenario.name}: {len(out['waypoints'])} waypoints, cost {out['cost']:.4f}")
    assert out["waypoints"][0] == scenario.start
    assert out["waypoints"][-1] == scenario.target
    assert dd.validate(robot, out["waypoints"], scenario) is None

    # Straight line through the wall should be caught by the checker.
    hit = dd.validate(robot, [scenario.start, scenario.target], scenario)
    print("direct segment:", hit and hit["description"])

    gen = dd.generate_scenarios(dual, robot, 3, 7, '{"wall_x": [0.3, 0.4], "board_probability": 0}')
    assert len(gen) == 3
    for s in gen:
        try:
            r = dd.plan(dual, robot, s)
            print(f"{s.name}: ok, cost {r['cost']:.4f}")
        except dd.PlanningError as e:
            print(f"{s.name}: {e.args[0][0]}")

    shutil.rmtree(tmp)
    print("smoke test passed")


if __name__ == "__main__":
    main()
